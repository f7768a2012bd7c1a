use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use readme_sections::abstraction::ListMode;
use readme_sections::model::FineTuneMode;
use readme_sections::pipeline::{self, Overrides, RunConfig};
use readme_sections::Result;

#[derive(Parser)]
#[command(name = "readme-sections", version, about = "Classify README sections by content")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<FineTuneMode>,
    /// LoRA rank
    #[arg(long)]
    rank: Option<usize>,
    /// LoRA scale numerator (defaults to the rank)
    #[arg(long)]
    alpha: Option<f64>,
    /// Decision threshold on sigmoid scores
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long = "list-mode")]
    list_mode: Option<ListMode>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        RunConfig::load(
            self.config.as_deref(),
            &Overrides {
                seed: self.seed,
                mode: self.mode,
                rank: self.rank,
                alpha: self.alpha,
                threshold: self.threshold,
                list_mode: self.list_mode,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split markdown files into sections (JSONL)
    Extract {
        /// A markdown file or a directory searched recursively
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preprocess a gold CSV into split files and a vocabulary
    Prepare {
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train an encoder on a prepared directory
    Train {
        prepared: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on a split file
    Evaluate {
        checkpoint: PathBuf,
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Vocabulary file (defaults to vocab.txt beside the checkpoint)
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Label the sections of a README, as JSON on stdout
    Predict {
        checkpoint: PathBuf,
        readme: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Full versus LoRA trainable parameter counts
    Params {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Extract { input, out } => {
            pipeline::extract(&input, &out, &mut stdout)?;
        }
        Command::Prepare { gold, out, common } => {
            let s = pipeline::prepare(&gold, &common.run_config()?, &out)?;
            let _ = writeln!(
                stdout,
                "rows {} | train {} (oversampled {}) | validation {} | test {} | vocab {}",
                s.total, s.train, s.train_oversampled, s.validation, s.test, s.vocab_size
            );
        }
        Command::Train { prepared, out, common } => {
            let s = pipeline::train(&prepared, &common.run_config()?, &out)?;
            for e in &s.history.epochs {
                let _ = writeln!(
                    stdout,
                    "epoch {:>3}  loss {:.5}  val_f1 {:.4}",
                    e.epoch, e.train_loss, e.val_f1
                );
            }
            let _ = writeln!(
                stdout,
                "best epoch {} (val_f1 {:.4}){} | trainable {} of {} | crc {:08x}",
                s.history.best_epoch,
                s.history.best_f1,
                if s.history.stopped_early { ", stopped early" } else { "" },
                s.trainable_parameters,
                s.full_trainable,
                s.checkpoint_crc
            );
        }
        Command::Evaluate {
            checkpoint,
            split,
            out,
            vocab,
            threshold,
        } => {
            let (_, table) = pipeline::evaluate(&checkpoint, &split, vocab.as_deref(), threshold, &out)?;
            let _ = write!(stdout, "{table}");
        }
        Command::Predict {
            checkpoint,
            readme,
            vocab,
            threshold,
        } => {
            let preds = pipeline::predict(&checkpoint, &readme, vocab.as_deref(), threshold)?;
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&preds)?);
        }
        Command::Params { common } => {
            let _ = write!(stdout, "{}", pipeline::params_table(&common.run_config()?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
