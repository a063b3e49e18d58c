use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use termex::corpus::io::{read_corpus, write_corpus};
use termex::render::{strip_ansi, strip_html};
use termex::Document;

const CONFIG: &str = "seed = 4\n\n[crf]\nepochs = 120\n";

fn termex(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_termex"));
    cmd.current_dir(dir).env_remove("TERMEX_CONFIG");
    if !args.contains(&"--config") {
        cmd.args(["--config", "run.toml"]);
    }
    cmd.args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = termex(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

/// synth, annotate and all three trainers, leaving models under `models/`.
fn trained() -> tempfile::TempDir {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["synth", "--sentences", "1000"]);
    ok(d, &["annotate", "--corpus", "corpus.jsonl", "--split"]);
    ok(d, &["train", "embeddings", "--corpus", "corpus.jsonl"]);
    ok(d, &["train", "classifier", "--embeddings", "models/embeddings.bin", "--train", "train.tsv", "--validation", "validation.tsv"]);
    ok(d, &["train", "crf", "--train", "train.tsv"]);
    dir
}

#[test]
fn staged_commands_train_and_evaluate() {
    let dir = trained();
    let d = dir.path();
    for file in ["gold.tsv", "train.tsv", "validation.tsv", "test.tsv", "models/embeddings.bin", "models/classifier.bin", "models/crf.bin"] {
        assert!(d.join(file).exists(), "{file} missing");
    }
    for mode in ["sentence", "token", "end_to_end"] {
        ok(d, &["evaluate", "--test", "test.tsv", "--mode", mode, "--out", &format!("{mode}.json")]);
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join(format!("{mode}.json"))).unwrap()).unwrap();
        assert_eq!(report["mode"], mode);
        assert!(report["f_score"].as_f64().unwrap() >= 0.9, "{mode}: {report}");
    }
    let jsonl = ok(d, &["extract", "--input", "corpus.jsonl"]);
    let lines: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1000);
    assert!(lines.iter().any(|e| !e["spans"].as_array().unwrap().is_empty()));
}

#[test]
fn crf_training_log_is_non_increasing() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["synth", "--sentences", "300"]);
    ok(d, &["annotate", "--corpus", "corpus.jsonl", "--out", "all.tsv"]);
    let log = ok(d, &["train", "crf", "--train", "all.tsv", "--out", "crf.bin"]);
    let nll: Vec<f64> = log
        .lines()
        .filter_map(|l| l.strip_prefix("epoch "))
        .map(|l| l.split_once(" nll ").unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(nll.len(), 120);
    assert!(nll.windows(2).all(|p| p[1] <= p[0]), "{nll:?}");
}

#[test]
fn rerunning_annotate_is_byte_identical() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["synth", "--sentences", "400"]);
    let first = ok(d, &["annotate", "--corpus", "corpus.jsonl", "--out", "a.tsv"]);
    let second = ok(d, &["annotate", "--corpus", "corpus.jsonl", "--out", "b.tsv"]);
    assert_eq!(first, second);
    assert_eq!(fs::read(d.join("a.tsv")).unwrap(), fs::read(d.join("b.tsv")).unwrap());
    let counts = first.lines().find(|l| l.starts_with("after balancing")).unwrap();
    let n: Vec<&str> = counts.split_whitespace().filter(|w| w.parse::<u64>().is_ok()).collect();
    assert_eq!(n[0], n[1]);
}

#[test]
fn rendering_preserves_the_input_text() {
    let dir = trained();
    let d = dir.path();
    // A document made only of sentences that stage I rejects must come
    // back untouched.
    let docs = read_corpus(fs::read(d.join("corpus.jsonl")).unwrap().as_slice()).unwrap();
    let sentences: Vec<Document> = docs
        .iter()
        .flat_map(|doc| {
            doc.sentences().into_iter().map(move |s| {
                let (a, b) = s.span().unwrap();
                Document { id: format!("{}-{}", doc.id, s.index), text: doc.text[a..b].to_owned() }
            })
        })
        .take(200)
        .collect();
    let mut file = Vec::new();
    write_corpus(&mut file, &sentences).unwrap();
    fs::write(d.join("sentences.jsonl"), file).unwrap();
    let jsonl = ok(d, &["extract", "--input", "sentences.jsonl"]);
    let rejected: Vec<&str> = jsonl
        .lines()
        .zip(&sentences)
        .filter(|(l, _)| serde_json::from_str::<serde_json::Value>(l).unwrap()["positive"] == false)
        .map(|(_, doc)| doc.text.as_str())
        .collect();
    assert!(rejected.len() > 50);
    let plain = rejected.join(" ");
    fs::write(d.join("plain.txt"), &plain).unwrap();
    let ansi = ok(d, &["extract", "--input", "plain.txt", "--format", "ansi"]);
    assert_eq!(ansi, format!("{plain}\n"));

    let html = ok(d, &["extract", "--input", "corpus.jsonl", "--format", "html"]);
    let ansi = ok(d, &["extract", "--input", "corpus.jsonl", "--format", "ansi"]);
    let corpus = fs::read_to_string(d.join("corpus.jsonl")).unwrap();
    let texts: Vec<String> = corpus
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["text"].as_str().unwrap().to_owned())
        .collect();
    assert!(html.contains("<mark class=\"term\">"));
    assert_eq!(strip_html(&html), texts.iter().map(|t| format!("{t}\n")).collect::<String>());
    assert_eq!(strip_ansi(&ansi), texts.iter().map(|t| format!("{t}\n")).collect::<String>());
}

#[test]
fn gold_terms_the_tagger_misses_are_marked() {
    let dir = trained();
    let d = dir.path();
    // The gold file claims an ordinary word is a term; the tagger has
    // never seen it.
    fs::write(d.join("odd.txt"), "Bananas prefer FooLang quietly.").unwrap();
    fs::write(d.join("odd.tsv"), "-DOCSTART- odd\n\nBananas\tT\nprefer\tO\nFooLang\tT\nquietly\tO\n.\tO\n").unwrap();
    let html = ok(d, &["extract", "--input", "odd.txt", "--format", "html", "--gold", "odd.tsv"]);
    assert!(html.contains("<mark class=\"missed\">Bananas</mark>"), "{html}");
    assert_eq!(strip_html(&html), "Bananas prefer FooLang quietly.\n");
    let ansi = ok(d, &["extract", "--input", "odd.txt", "--format", "ansi", "--gold", "odd.tsv"]);
    assert!(ansi.contains("\u{1b}[41mBananas"), "{ansi:?}");
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = workspace();
    let d = dir.path();
    let missing_gazetteer = termex(d, &["synth", "--gazetteer", "nope.txt"]);
    assert_eq!(missing_gazetteer.status.code(), Some(2));
    assert!(!missing_gazetteer.stderr.is_empty());

    ok(d, &["synth", "--sentences", "100"]);
    ok(d, &["annotate", "--corpus", "corpus.jsonl", "--split"]);
    let no_embeddings = termex(d, &["train", "classifier", "--embeddings", "models/embeddings.bin", "--train", "train.tsv"]);
    assert_eq!(no_embeddings.status.code(), Some(2));

    let no_models = termex(d, &["extract", "--input", "corpus.jsonl"]);
    assert_eq!(no_models.status.code(), Some(2));

    fs::write(d.join("bad.toml"), "[crf]\nepochz = 3\n").unwrap();
    let bad_config = Command::new(env!("CARGO_BIN_EXE_termex"))
        .current_dir(d)
        .args(["--config", "bad.toml", "synth"])
        .output()
        .unwrap();
    assert_eq!(bad_config.status.code(), Some(2));
}

#[test]
fn pipeline_writes_a_complete_run_directory() {
    let dir = workspace();
    let d = dir.path();
    fs::write(d.join("run.toml"), format!("{CONFIG}\n[synth]\nn_sentences = 500\n")).unwrap();
    ok(d, &["pipeline", "--out", "run"]);
    for file in ["corpus.jsonl", "gold.tsv", "train.tsv", "test.tsv", "models/crf.bin", "report.json", "config.toml"] {
        assert!(d.join("run").join(file).exists(), "{file} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run/report.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("end_to_end"));
    // The saved config reproduces the run.
    ok(d, &["--config", "run/config.toml", "pipeline", "--out", "again"]);
    assert_eq!(fs::read(d.join("run/models/crf.bin")).unwrap(), fs::read(d.join("again/models/crf.bin")).unwrap());
}
