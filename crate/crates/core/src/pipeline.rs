//! End-to-end commands behind the `readme-sections` binary.
//!
//! Every command writes into one output directory. Running a command twice
//! with the same inputs and seed rewrites identical bytes.
//!
//! Sub-seeds come from [`seed::derive`] with these labels: `split`,
//! `validation`, `folds`, `oversample`, `init`, `lora`, `train`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use walkdir::WalkDir;

use crate::abstraction::{abstract_content, AbstractionConfig, Counts, ListMode};
use crate::dataset::{self, label_counts, Label, LabelVector, LabeledSection, SplitSpec};
use crate::metrics::{report, MetricsReport};
use crate::model::{
    self, full_param_count, load_checkpoint, lora_param_count, save_checkpoint, EncoderConfig, Example, FineTuneMode,
    History, LoraConfig, TrainingConfig,
};
use crate::parser::{parse_sections, ReadmeDocument, Section};
use crate::seed::derive;
use crate::text::{build_vocab, encode, tokenize_normalize, Vocabulary, RESERVED};
use crate::{Error, Result};

pub const SECTIONS_FILE: &str = "sections.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const VAL_FILE: &str = "val.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const FOLDS_FILE: &str = "folds.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.rsec";
pub const HISTORY_FILE: &str = "history.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Architecture settings; the vocabulary size comes from the prepared data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self {
            hidden: 64,
            layers: 2,
            heads: 4,
            ff_dim: 128,
            max_len: 128,
            dropout: 0.1,
        }
    }
}

impl EncoderSettings {
    pub fn with_vocab(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            hidden: self.hidden,
            layers: self.layers,
            heads: self.heads,
            ff_dim: self.ff_dim,
            max_len: self.max_len,
            dropout: self.dropout,
            num_labels: dataset::NUM_LABELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub train_fraction: f64,
    pub k: usize,
    /// Share of the training portion held out for early stopping. Zero
    /// validates on the training data itself.
    pub val_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            k: 5,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSettings {
    pub min_freq: usize,
    pub max_size: usize,
}

impl Default for VocabSettings {
    fn default() -> Self {
        Self {
            min_freq: 1,
            max_size: 20_000,
        }
    }
}

/// Everything a run needs, loadable from JSON. Missing fields take their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: FineTuneMode,
    pub encoder: EncoderSettings,
    pub lora: LoraConfig,
    pub training: TrainingConfig,
    pub abstraction: AbstractionConfig,
    pub split: SplitSettings,
    pub vocab: VocabSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: FineTuneMode::Full,
            encoder: EncoderSettings::default(),
            lora: LoraConfig::new(8),
            training: TrainingConfig::default(),
            abstraction: AbstractionConfig::default(),
            split: SplitSettings::default(),
            vocab: VocabSettings::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<FineTuneMode>,
    pub rank: Option<usize>,
    pub alpha: Option<f64>,
    pub threshold: Option<f64>,
    pub list_mode: Option<ListMode>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(r) = o.rank {
            self.lora.rank = r;
        }
        if let Some(a) = o.alpha {
            self.lora.alpha = Some(a);
        }
        if let Some(t) = o.threshold {
            self.training.threshold = t;
        }
        if let Some(l) = o.list_mode {
            self.abstraction.list_mode = l;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.with_vocab(RESERVED).validate()?;
        if self.mode == FineTuneMode::Lora {
            self.lora.validate(self.encoder.hidden)?;
        }
        self.training.validate()?;
        self.split_spec(0).validate()?;
        if !(0.0..1.0).contains(&self.split.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction {} not in [0, 1)",
                self.split.val_fraction
            )));
        }
        if self.vocab.min_freq < 1 || self.vocab.max_size < RESERVED {
            return Err(Error::Config(format!(
                "vocab needs min_freq >= 1 and max_size >= {RESERVED}, got {} and {}",
                self.vocab.min_freq, self.vocab.max_size
            )));
        }
        Ok(())
    }

    fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            seed,
            k: self.split.k,
        }
    }
}

/// One preprocessed section as stored in the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub doc_id: String,
    pub ordinal: usize,
    pub heading: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub labels: LabelVector,
    pub split: String,
}

/// Abstract and normalize gold sections. Returns the records (split left
/// empty) and the summed placeholder counts.
pub fn preprocess(sections: &[LabeledSection], cfg: &AbstractionConfig) -> (Vec<PreparedRecord>, Counts) {
    let mut totals = Counts::new();
    let records = sections
        .iter()
        .map(|s| {
            let section = Section {
                doc_id: s.doc_id.clone(),
                ordinal: s.ordinal,
                level: 0,
                heading: s.heading.clone(),
                body: s.text.clone(),
            };
            let abs = abstract_content(&section, cfg);
            for (k, v) in &abs.counts {
                *totals.entry(k.clone()).or_insert(0) += v;
            }
            PreparedRecord {
                tokens: tokenize_normalize(&abs.text),
                doc_id: abs.doc_id,
                ordinal: abs.ordinal,
                heading: abs.heading,
                text: abs.text,
                labels: s.labels,
                split: String::new(),
            }
        })
        .collect();
    (records, totals)
}

pub fn to_examples(records: &[PreparedRecord], vocab: &Vocabulary, max_len: usize) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            Ok(Example {
                seq: encode(&r.tokens, vocab, max_len)?,
                labels: r.labels,
            })
        })
        .collect()
}

fn histogram<'a>(labels: impl IntoIterator<Item = &'a LabelVector>) -> BTreeMap<&'static str, usize> {
    Label::ALL.iter().map(|l| l.name()).zip(label_counts(labels)).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item =
            serde_json::from_str(&line).map_err(|e| Error::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

/// Merge one command's entry into the directory manifest.
fn update_manifest(dir: &Path, key: &str, entry: Value) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest: BTreeMap<String, Value> = match std::fs::read_to_string(&path) {
        Ok(raw) => serde_json::from_str(&raw).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    manifest.insert(key.to_string(), entry);
    write_json(&path, &manifest)
}

fn is_markdown(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("md") || e.eq_ignore_ascii_case("markdown"))
}

/// Split a markdown file, or every `.md`/`.markdown` file under a
/// directory, into sections. Documents are identified by their path
/// relative to the input and emitted in sorted order.
pub fn extract(input: &Path, out_dir: &Path, log: &mut dyn Write) -> Result<Vec<Section>> {
    let meta = std::fs::metadata(input).map_err(|e| Error::io(input, e))?;
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    if meta.is_dir() {
        for entry in WalkDir::new(input).sort_by_file_name() {
            let entry = entry.map_err(|e| Error::Input(format!("{}: {e}", input.display())))?;
            if entry.file_type().is_file() && is_markdown(entry.path()) {
                let rel = entry.path().strip_prefix(input).unwrap_or(entry.path());
                let id = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                files.push((id, entry.path().to_path_buf()));
            }
        }
    } else {
        let name = input
            .file_name()
            .map_or_else(|| input.display().to_string(), |n| n.to_string_lossy().into_owned());
        files.push((name, input.to_path_buf()));
    }
    let mut sections = Vec::new();
    for (id, path) in files {
        let raw = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let doc = ReadmeDocument::new(id.clone(), String::from_utf8_lossy(&raw));
        let parsed = parse_sections(&doc);
        let _ = writeln!(log, "{id}\t{}", parsed.len());
        sections.extend(parsed);
    }
    create_dir(out_dir)?;
    write_jsonl(&out_dir.join(SECTIONS_FILE), &sections)?;
    let docs: std::collections::BTreeSet<&str> = sections.iter().map(|s| s.doc_id.as_str()).collect();
    update_manifest(
        out_dir,
        "extract",
        json!({"documents": docs.len(), "sections": sections.len()}),
    )?;
    Ok(sections)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepareSummary {
    pub total: usize,
    pub train: usize,
    pub train_oversampled: usize,
    pub validation: usize,
    pub test: usize,
    pub vocab_size: usize,
}

fn tag(records: Vec<PreparedRecord>, split: &str) -> Vec<PreparedRecord> {
    records
        .into_iter()
        .map(|r| PreparedRecord {
            split: split.to_string(),
            ..r
        })
        .collect()
}

/// Gold CSV → abstraction → normalization → stratified split → held-out
/// validation → folds → vocabulary → oversampling (training rows only).
pub fn prepare(gold: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<PrepareSummary> {
    let sections = dataset::load_gold(gold)?;
    let (records, placeholder_totals) = preprocess(&sections, &cfg.abstraction);
    let labels_of = |r: &PreparedRecord| r.labels;

    let (train_all, test) = dataset::stratified_split(&records, labels_of, &cfg.split_spec(derive(cfg.seed, "split")))?;
    let (train, val) = if cfg.split.val_fraction > 0.0 {
        let spec = SplitSpec {
            train_fraction: 1.0 - cfg.split.val_fraction,
            ..cfg.split_spec(derive(cfg.seed, "validation"))
        };
        dataset::stratified_split(&train_all, labels_of, &spec)?
    } else {
        (train_all.clone(), Vec::new())
    };
    let folds = dataset::kfold_assignment(&train_all, labels_of, &cfg.split_spec(derive(cfg.seed, "folds")))?;
    let fold_records: Vec<PreparedRecord> = train_all
        .iter()
        .zip(&folds)
        .map(|(r, f)| PreparedRecord {
            split: format!("fold_{f}"),
            ..r.clone()
        })
        .collect();

    let corpus: Vec<Vec<String>> = train.iter().map(|r| r.tokens.clone()).collect();
    let vocab = build_vocab(&corpus, cfg.vocab.min_freq, cfg.vocab.max_size)?;
    let oversampled = dataset::oversample(&train, labels_of, derive(cfg.seed, "oversample"))?;

    let summary = PrepareSummary {
        total: records.len(),
        train: train.len(),
        train_oversampled: oversampled.len(),
        validation: val.len(),
        test: test.len(),
        vocab_size: vocab.len(),
    };
    let manifest = json!({
        "rows": {
            "total": summary.total,
            "train": summary.train,
            "train_oversampled": summary.train_oversampled,
            "validation": summary.validation,
            "test": summary.test,
        },
        "labels": {
            "total": histogram(records.iter().map(|r| &r.labels)),
            "train": histogram(train.iter().map(|r| &r.labels)),
            "train_oversampled": histogram(oversampled.iter().map(|r| &r.labels)),
            "validation": histogram(val.iter().map(|r| &r.labels)),
            "test": histogram(test.iter().map(|r| &r.labels)),
        },
        "placeholders": placeholder_totals,
        "vocab_size": vocab.len(),
        "vocab_fingerprint": vocab.fingerprint(),
        "seed": cfg.seed,
    });

    create_dir(out_dir)?;
    write_jsonl(&out_dir.join(TRAIN_FILE), &tag(oversampled, "train"))?;
    write_jsonl(&out_dir.join(VAL_FILE), &tag(val, "val"))?;
    write_jsonl(&out_dir.join(TEST_FILE), &tag(test, "test"))?;
    write_jsonl(&out_dir.join(FOLDS_FILE), &fold_records)?;
    vocab.save(&out_dir.join(VOCAB_FILE))?;
    write_json(&out_dir.join(CONFIG_FILE), cfg)?;
    update_manifest(out_dir, "prepare", manifest)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub mode: FineTuneMode,
    pub trainable_parameters: usize,
    pub full_trainable: usize,
    pub lora_trainable: usize,
    pub checkpoint_crc: u32,
    pub history: History,
}

/// Build the model described by `cfg` for a vocabulary of `vocab_size`.
pub fn build_model(cfg: &RunConfig, vocab_size: usize) -> Result<model::Encoder<f32>> {
    let enc = cfg.encoder.with_vocab(vocab_size);
    let mut m = model::Encoder::init(&enc, derive(cfg.seed, "init"))?;
    if cfg.mode == FineTuneMode::Lora {
        m.apply_lora(&cfg.lora, derive(cfg.seed, "lora"))?;
    }
    Ok(m)
}

/// Train on a prepared directory and write the best checkpoint, the
/// per-epoch history and the parameter counts.
pub fn train(prepared: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<TrainSummary> {
    let vocab = Vocabulary::load(&prepared.join(VOCAB_FILE))?;
    let train_records: Vec<PreparedRecord> = read_jsonl(&prepared.join(TRAIN_FILE))?;
    let val_path = prepared.join(VAL_FILE);
    let val_records: Vec<PreparedRecord> = if val_path.exists() {
        read_jsonl(&val_path)?
    } else {
        Vec::new()
    };
    if train_records.is_empty() {
        return Err(Error::Input(format!("{} has no training rows", prepared.display())));
    }
    let max_len = cfg.encoder.max_len;
    let train_set = to_examples(&train_records, &vocab, max_len)?;
    let val_set = if val_records.is_empty() {
        train_set.clone()
    } else {
        to_examples(&val_records, &vocab, max_len)?
    };

    let mut m = build_model(cfg, vocab.len())?;
    let history = model::train(&mut m, &train_set, &val_set, &cfg.training, derive(cfg.seed, "train"))?;

    let enc = m.config().clone();
    let full_trainable = full_param_count(&enc);
    let lora_trainable = lora_param_count(&enc, &cfg.lora);
    let meta = json!({
        "vocab_fingerprint": vocab.fingerprint(),
        "abstraction": cfg.abstraction,
        "threshold": cfg.training.threshold,
    });
    create_dir(out_dir)?;
    let crc = save_checkpoint(&m, &meta, &out_dir.join(CHECKPOINT_FILE))?;
    vocab.save(&out_dir.join(VOCAB_FILE))?;
    write_json(&out_dir.join(HISTORY_FILE), &history)?;
    write_json(&out_dir.join(CONFIG_FILE), cfg)?;
    let summary = TrainSummary {
        mode: cfg.mode,
        trainable_parameters: m.count_trainable(cfg.mode),
        full_trainable,
        lora_trainable,
        checkpoint_crc: crc,
        history,
    };
    update_manifest(
        out_dir,
        "train",
        json!({
            "mode": summary.mode,
            "trainable_parameters": summary.trainable_parameters,
            "full_trainable": full_trainable,
            "lora_trainable": lora_trainable,
            "checkpoint_crc": format!("{crc:08x}"),
            "epochs_run": summary.history.epochs.len(),
            "best_epoch": summary.history.best_epoch,
            "best_f1": summary.history.best_f1,
            "stopped_early": summary.history.stopped_early,
        }),
    )?;
    Ok(summary)
}

struct Loaded {
    model: model::Encoder<f32>,
    vocab: Vocabulary,
    abstraction: AbstractionConfig,
    threshold: f64,
}

fn load_trained(checkpoint: &Path, vocab_path: Option<&Path>) -> Result<Loaded> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    let vocab_path = match vocab_path {
        Some(p) => p.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join(VOCAB_FILE),
    };
    let vocab = Vocabulary::load(&vocab_path)?;
    let expected = meta.get("vocab_fingerprint").and_then(Value::as_u64);
    if expected != Some(u64::from(vocab.fingerprint())) || vocab.len() != model.config().vocab_size {
        return Err(Error::Input(format!(
            "vocabulary {} does not match the checkpoint",
            vocab_path.display()
        )));
    }
    let abstraction = meta
        .get("abstraction")
        .map(|v| serde_json::from_value(v.clone()))
        .transpose()?
        .unwrap_or_default();
    let threshold = meta.get("threshold").and_then(Value::as_f64).unwrap_or(0.5);
    Ok(Loaded {
        model,
        vocab,
        abstraction,
        threshold,
    })
}

/// Score a checkpoint on a split file; writes the JSON report and returns
/// it together with the printable table.
pub fn evaluate(
    checkpoint: &Path,
    split_file: &Path,
    vocab: Option<&Path>,
    threshold: Option<f64>,
    out_dir: &Path,
) -> Result<(MetricsReport, String)> {
    let loaded = load_trained(checkpoint, vocab)?;
    let records: Vec<PreparedRecord> = read_jsonl(split_file)?;
    if records.is_empty() {
        return Err(Error::Input(format!("{} has no rows", split_file.display())));
    }
    let threshold = threshold.unwrap_or(loaded.threshold);
    let examples = to_examples(&records, &loaded.vocab, loaded.model.config().max_len)?;
    let seqs: Vec<_> = examples.iter().map(|e| e.seq.clone()).collect();
    let preds = loaded.model.predict(&seqs, threshold)?;
    let n = preds.len();
    let mut scores = ndarray::Array2::zeros((n, dataset::NUM_LABELS));
    let mut pred = ndarray::Array2::from_elem((n, dataset::NUM_LABELS), false);
    let mut gold = pred.clone();
    for (i, (p, e)) in preds.iter().zip(&examples).enumerate() {
        for j in 0..dataset::NUM_LABELS {
            scores[[i, j]] = p.scores[j];
            pred[[i, j]] = p.labels.has(Label::ALL[j]);
            gold[[i, j]] = e.labels.has(Label::ALL[j]);
        }
    }
    let names: Vec<&str> = Label::ALL.iter().map(|l| l.name()).collect();
    let rep = report(scores.view(), pred.view(), gold.view(), &names)?;
    let row = match loaded.model.mode() {
        FineTuneMode::Full => "encoder (full)",
        FineTuneMode::Lora => "encoder (lora)",
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join(METRICS_FILE), &rep)?;
    Ok((rep.clone(), rep.table(row)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionPrediction {
    pub doc_id: String,
    pub ordinal: usize,
    pub heading: String,
    pub labels: Vec<String>,
    pub scores: BTreeMap<String, f64>,
}

/// Label every section of one markdown file.
pub fn predict(
    checkpoint: &Path,
    readme: &Path,
    vocab: Option<&Path>,
    threshold: Option<f64>,
) -> Result<Vec<SectionPrediction>> {
    let loaded = load_trained(checkpoint, vocab)?;
    let raw = std::fs::read(readme).map_err(|e| Error::io(readme, e))?;
    let id = readme
        .file_name()
        .map_or_else(|| readme.display().to_string(), |n| n.to_string_lossy().into_owned());
    let sections = parse_sections(&ReadmeDocument::new(id, String::from_utf8_lossy(&raw)));
    let max_len = loaded.model.config().max_len;
    let seqs = sections
        .iter()
        .map(|s| {
            encode(
                &tokenize_normalize(&abstract_content(s, &loaded.abstraction).text),
                &loaded.vocab,
                max_len,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let preds = loaded.model.predict(&seqs, threshold.unwrap_or(loaded.threshold))?;
    Ok(sections
        .into_iter()
        .zip(preds)
        .map(|(s, p)| SectionPrediction {
            doc_id: s.doc_id,
            ordinal: s.ordinal,
            heading: s.heading,
            labels: p.labels.names().into_iter().map(String::from).collect(),
            scores: Label::ALL
                .iter()
                .map(|l| (l.name().to_string(), p.scores[l.index()]))
                .collect(),
        })
        .collect())
}

/// A BERT-base sized encoder, for scale comparison in [`params_table`].
pub fn reference_config() -> EncoderConfig {
    EncoderConfig {
        vocab_size: 30_522,
        hidden: 768,
        layers: 12,
        heads: 12,
        ff_dim: 3072,
        max_len: 512,
        dropout: 0.1,
        num_labels: dataset::NUM_LABELS,
    }
}

/// Full versus LoRA trainable counts for the configured model (sized by
/// `vocab.max_size`) and for [`reference_config`].
pub fn params_table(cfg: &RunConfig) -> Result<String> {
    let own = cfg.encoder.with_vocab(cfg.vocab.max_size);
    cfg.lora.validate(own.hidden)?;
    let reference = reference_config();
    let rows = [("configured", &own), ("reference", &reference)];
    let mut out = format!(
        "{:<12} {:>14} {:>14}\n",
        "model",
        "full",
        format!("lora (r={})", cfg.lora.rank)
    );
    for (name, enc) in rows {
        out.push_str(&format!(
            "{:<12} {:>14} {:>14}\n",
            name,
            full_param_count(enc),
            lora_param_count(enc, &cfg.lora)
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overrides_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"encoder": {"hidden": 32}, "lora": {"rank": 4}}"#).unwrap();
        let o = Overrides {
            seed: Some(9),
            mode: Some(FineTuneMode::Lora),
            alpha: Some(16.0),
            list_mode: Some(ListMode::Block),
            ..Default::default()
        };
        let cfg = RunConfig::load(Some(&p), &o).unwrap();
        assert_eq!(cfg.encoder.hidden, 32);
        assert_eq!(cfg.encoder.heads, 4);
        assert_eq!(cfg.lora.scale(), 4.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.abstraction.list_mode, ListMode::Block);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"encoder": {"hidden": 30, "heads": 4}}"#).unwrap();
        let err = RunConfig::load(Some(&p), &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        std::fs::write(&p, r#"{"bogus": 1}"#).unwrap();
        assert!(RunConfig::load(Some(&p), &Overrides::default()).is_err());
        let o = Overrides {
            mode: Some(FineTuneMode::Lora),
            rank: Some(64),
            ..Default::default()
        };
        assert!(RunConfig::load(None, &o).is_err());
    }

    #[test]
    fn params_table_lists_both_models() {
        let t = params_table(&RunConfig::default()).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        for line in &lines[1..] {
            let cols: Vec<usize> = line.split_whitespace().skip(1).map(|c| c.parse().unwrap()).collect();
            assert!(cols[1] < cols[0]);
        }
        assert!(lines[2].contains(&full_param_count(&reference_config()).to_string()));
    }

    #[test]
    fn extract_single_and_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("README.md");
        std::fs::write(&f, "intro\n# Install\nrun it\n").unwrap();
        let mut log = Vec::new();
        let out = dir.path().join("out");
        let secs = extract(&f, &out, &mut log).unwrap();
        assert_eq!(secs.len(), 2);
        assert_eq!(String::from_utf8(log).unwrap(), "README.md\t2\n");
        let back: Vec<Section> = read_jsonl(&out.join(SECTIONS_FILE)).unwrap();
        assert_eq!(back, secs);

        let empty = dir.path().join("empty.md");
        std::fs::write(&empty, "").unwrap();
        let secs = extract(&empty, &out, &mut Vec::new()).unwrap();
        assert_eq!(secs.len(), 1);
        assert_eq!((secs[0].level, secs[0].body.as_str()), (0, ""));
    }

    #[test]
    fn extract_missing_path_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = extract(&dir.path().join("nope.md"), dir.path(), &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
