use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vocabdrift::corpus::write_documents_to;
use vocabdrift::synth::{generate, SynthConfig};

fn vocabdrift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vocabdrift"))
        .args(args)
        .env_remove("VOCABDRIFT_SEED")
        .output()
        .expect("spawn vocabdrift")
}

fn ok(args: &[&str]) -> String {
    let out = vocabdrift(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = generate(&SynthConfig {
            docs_per_epoch: 400,
            ..Default::default()
        })
        .unwrap();
        write_documents_to(root.join("old.jsonl"), &corpus.old).unwrap();
        write_documents_to(root.join("new.jsonl"), &corpus.new).unwrap();
        Fixture { _dir: dir, root }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.root.join(name)
    }
}

#[test]
fn preprocess_normalizes_and_filters_by_year() {
    let f = Fixture::new();
    let raw = f.path("raw.jsonl");
    fs::write(
        &raw,
        concat!(
            r#"{"id":"a","text":"Hi @bob see https://x.io","year":2019}"#,
            "\n\n",
            r#"{"id":"b","text":"mail me@x.org","year":2020}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = f.path("norm.jsonl");
    ok(&["preprocess", "--in", p(&raw), "--out", p(&out), "--year", "2019"]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rec: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(rec["id"], "a");
    assert_eq!(rec["year"], 2019);
    assert!(!rec["text"].as_str().unwrap().contains("bob"));
}

#[test]
fn vocabulary_commands() {
    let f = Fixture::new();
    let vocab = f.path("vocab.tsv");
    ok(&[
        "build-vocab", "--in", p(&f.path("old.jsonl")), "--wp-cap", "300", "--ht-cap", "10", "--out", p(&vocab),
    ]);
    assert!(fs::read_to_string(&vocab).unwrap().lines().any(|l| l.starts_with("[UNK]")));

    let stats: serde_json::Value =
        serde_json::from_str(&ok(&["stats", "--vocab", p(&vocab), "--in", p(&f.path("new.jsonl"))])).unwrap();
    assert!(stats["fertility"].as_f64().unwrap() >= 1.0);

    let toks = f.path("toks.jsonl");
    ok(&["tokenize", "--vocab", p(&vocab), "--in", p(&f.path("new.jsonl")), "--out", p(&toks)]);
    assert_eq!(fs::read_to_string(&toks).unwrap().lines().count(), 400);

    let (updated, plan) = (f.path("updated.tsv"), f.path("plan.json"));
    ok(&[
        "update-vocab", "--current", p(&vocab), "--new", p(&f.path("new.jsonl")), "--out", p(&updated), "--plan",
        p(&plan),
    ]);
    let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    assert!(!plan["wordpiece"]["added"].as_array().unwrap().is_empty());
    assert_eq!(
        fs::read_to_string(&vocab).unwrap().lines().count(),
        fs::read_to_string(&updated).unwrap().lines().count()
    );
}

#[test]
fn shift_report_csv() {
    let f = Fixture::new();
    let csv = ok(&[
        "shift-report", "--a", p(&f.path("old.jsonl")), "--b", p(&f.path("new.jsonl")), "--kind", "word", "--kind",
        "hashtag", "--k", "50",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "kind,epoch_a,epoch_b,k,shift");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("word,2019,2020,50,"));
}

#[test]
fn score_sample_and_mine() {
    let f = Fixture::new();
    let scores = f.path("scores.tsv");
    ok(&[
        "score", "--signal", "mlm", "--docs", p(&f.path("new.jsonl")), "--ref", p(&f.path("old.jsonl")), "--out",
        p(&scores),
    ]);
    let manifest = f.path("m.txt");
    let sample = |seed: &str| {
        ok(&["sample", "--scores", p(&scores), "--k", "25", "--seed", seed, "--out", p(&manifest)]);
        fs::read_to_string(&manifest).unwrap()
    };
    let first = sample("9");
    assert_eq!(first, sample("9"));
    assert!(first.starts_with("# seed=9\n"));
    assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 25);

    let out_dir = f.path("mined");
    ok(&[
        "mine", "--docs", p(&f.path("new.jsonl")), "--signal", "mlm", "--ref", p(&f.path("old.jsonl")), "--sizes",
        "30,20,10", "--out-dir", p(&out_dir),
    ]);
    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["iteration_001.txt", "iteration_002.txt", "iteration_003.txt"]);
}

#[test]
fn seed_environment_overrides_flag() {
    let f = Fixture::new();
    let scores = f.path("scores.tsv");
    ok(&["score", "--signal", "mlm", "--docs", p(&f.path("new.jsonl")), "--out", p(&scores)]);
    let out = Command::new(env!("CARGO_BIN_EXE_vocabdrift"))
        .args(["sample", "--scores", p(&scores), "--k", "5", "--seed", "1", "--out", p(&f.path("m.txt"))])
        .env("VOCABDRIFT_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(fs::read_to_string(f.path("m.txt")).unwrap().starts_with("# seed=77\n"));
}

#[test]
fn pipeline_and_report() {
    let f = Fixture::new();
    let vocab = f.path("vocab.tsv");
    ok(&["build-vocab", "--in", p(&f.path("old.jsonl")), "--wp-cap", "300", "--out", p(&vocab)]);
    let run = f.path("run");
    ok(&[
        "pipeline", "--old", p(&f.path("old.jsonl")), "--new", p(&f.path("new.jsonl")), "--vocab", p(&vocab),
        "--signal", "mlm", "--sizes", "paper-ratio:48", "--k", "100", "--window", "100", "--out", p(&run),
    ]);
    for name in ["vocab.tsv", "plan.json", "epoch.json", "shift.csv", "stats.csv", "monitor.csv", "summary.json"] {
        assert!(run.join(name).exists(), "{name} missing");
    }
    assert_eq!(
        fs::read_to_string(run.join("manifest_sizes.csv")).unwrap(),
        "iteration,size\n1,20\n2,16\n3,12\n"
    );
    let monitor = fs::read_to_string(run.join("monitor.csv")).unwrap();
    assert_eq!(monitor.lines().count(), 1 + 8);

    fs::remove_file(run.join("summary.json")).unwrap();
    ok(&["report", "--run-dir", p(&run)]);
    assert!(run.join("summary.json").exists());

    fs::remove_file(run.join("shift.csv")).unwrap();
    let out = vocabdrift(&["report", "--run-dir", p(&run)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shift.csv"));
}

#[test]
fn input_errors_exit_with_one() {
    let f = Fixture::new();
    let missing = f.path("nope.jsonl");
    assert_eq!(vocabdrift(&["stats", "--vocab", p(&missing), "--in", p(&missing)]).status.code(), Some(1));
    assert_eq!(vocabdrift(&["no-such-command"]).status.code(), Some(1));

    let dup = f.path("dup.jsonl");
    fs::write(&dup, "{\"id\":\"x\",\"text\":\"a\",\"year\":1}\n{\"id\":\"x\",\"text\":\"b\",\"year\":1}\n").unwrap();
    let out = vocabdrift(&["preprocess", "--in", p(&dup), "--out", p(&f.path("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));

    let scores = f.path("scores.tsv");
    ok(&["score", "--signal", "mlm", "--docs", p(&f.path("new.jsonl")), "--out", p(&scores)]);
    let too_many = vocabdrift(&["sample", "--scores", p(&scores), "--k", "100000", "--out", p(&f.path("m.txt"))]);
    assert_eq!(too_many.status.code(), Some(1));
    assert!(vocabdrift(&["--help"]).status.success());
}
