mod common;

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_readme-sections");

const SMALL_CONFIG: &str = r#"{
  "seed": 3,
  "encoder": { "hidden": 16, "layers": 1, "heads": 2, "ff_dim": 32, "max_len": 32, "dropout": 0.1 },
  "lora": { "rank": 2 },
  "training": { "max_epochs": 2, "batch_size": 8 }
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Prepare and train a small model; returns the training directory.
fn trained(dir: &Path, mode: &str) -> std::path::PathBuf {
    let gold = dir.join("gold.csv");
    common::write_gold_csv(&gold, &common::gold_sections(80, 4));
    let config = dir.join("config.json");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let prepared = dir.join("prepared");
    let out = run(&[
        "prepare",
        path(&gold),
        "--out",
        path(&prepared),
        "--config",
        path(&config),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = dir.join(format!("model-{mode}"));
    let out = run(&[
        "train",
        path(&prepared),
        "--out",
        path(&model),
        "--config",
        path(&config),
        "--mode",
        mode,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("best epoch"));
    model
}

#[test]
fn missing_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "prepare",
        path(&dir.path().join("absent.csv")),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    let out = run(&[
        "extract",
        path(&dir.path().join("absent.md")),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_label_row_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.csv");
    std::fs::write(
        &gold,
        "doc_id,ordinal,heading,text,labels\nr/README.md,0,Intro,Some text,NotALabel\n",
    )
    .unwrap();
    let out = run(&["prepare", path(&gold), "--out", path(&dir.path().join("p"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_flag_exits_with_code_2() {
    assert_eq!(code(&run(&["params", "--no-such-flag"])), 2);
}

#[test]
fn extract_writes_one_record_per_section() {
    let dir = tempfile::tempdir().unwrap();
    let readme = dir.path().join("README.md");
    std::fs::write(
        &readme,
        "Intro line\n\n## Installation\n\n```\n# not a heading\n```\n\n## License\nMIT\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["extract", path(&readme), "--out", path(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let jsonl = std::fs::read_to_string(out_dir.join("sections.jsonl")).unwrap();
    let headings: Vec<String> = jsonl
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["heading"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(headings, ["", "Installation", "License"]);
}

#[test]
fn params_table_lists_both_models() {
    let out = run(&["params", "--rank", "4"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows[0], ["model", "full", "lora", "(r=4)"]);
    for row in &rows[1..] {
        let full: usize = row[1].parse().unwrap();
        let lora: usize = row[2].parse().unwrap();
        assert!(lora < full, "{row:?}");
    }
    assert_eq!(rows.len(), 3);
    assert_eq!(code(&run(&["params", "--rank", "0"])), 2);
}

#[test]
fn train_evaluate_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["full", "lora"] {
        let model = trained(dir.path(), mode);
        let ckpt = model.join("checkpoint.rsec");
        let test = dir.path().join("prepared").join("test.jsonl");
        let eval_dir = dir.path().join(format!("eval-{mode}"));
        let out = run(&["evaluate", path(&ckpt), path(&test), "--out", path(&eval_dir)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let table = stdout(&out);
        let header = table.lines().next().unwrap();
        let at: Vec<usize> = ["F1", "ROC AUC", "MCC", "Kappa"]
            .iter()
            .map(|c| header.find(c).unwrap())
            .collect();
        assert!(at.windows(2).all(|w| w[0] < w[1]), "{header}");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(eval_dir.join("metrics.json")).unwrap()).unwrap();
        assert!(report["weighted_f1"].as_f64().is_some());

        let readme = dir.path().join("README.md");
        std::fs::write(
            &readme,
            "# Tool\nA fast library.\n\n## Installation\nRun `cargo install tool`.\n",
        )
        .unwrap();
        let out = run(&["predict", path(&ckpt), path(&readme)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let preds: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(preds.len(), 2);
        for p in &preds {
            assert!(!p["labels"].as_array().unwrap().is_empty());
            let scores = p["scores"].as_object().unwrap();
            assert_eq!(scores.len(), 7);
            assert!(scores.values().all(|s| s.as_f64().is_some_and(|s| s > 0.0 && s < 1.0)));
        }
    }
}

#[test]
fn evaluate_rejects_a_foreign_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained(dir.path(), "full");
    let other = dir.path().join("other.txt");
    std::fs::write(&other, "[PAD]\n[UNK]\n[CLS]\nsomething\n").unwrap();
    let test = dir.path().join("prepared").join("test.jsonl");
    let out = run(&[
        "evaluate",
        path(&model.join("checkpoint.rsec")),
        path(&test),
        "--out",
        path(&dir.path().join("e")),
        "--vocab",
        path(&other),
    ]);
    assert_eq!(code(&out), 2);
}
