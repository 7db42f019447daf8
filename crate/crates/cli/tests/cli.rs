use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ncc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncc"))
        .args(args)
        .output()
        .expect("run ncc")
}

fn ok(args: &[&str]) -> String {
    let out = ncc(args);
    assert!(
        out.status.success(),
        "ncc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_corpus(dir: &Path) -> String {
    let corpus = dir.join("corpus");
    ok(&[
        "gen",
        "--out",
        p(&corpus),
        "--seed",
        "3",
        "--counts",
        "60,23,11,5",
        "--passed",
        "20",
    ]);
    p(&corpus).to_owned()
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let model = dir.path().join("m.model");
    ok(&[
        "train",
        "--corpus",
        &corpus,
        "--out",
        p(&model),
        "--test-fraction",
        "0.2",
        "--seed",
        "5",
    ]);
    assert!(fs::read_to_string(&model)
        .unwrap()
        .starts_with("ncc-model v1\n"));

    let failed = format!("{corpus}/failed");
    let json = ok(&[
        "predict",
        "--model",
        p(&model),
        "--input",
        &failed,
        "--format",
        "json",
    ]);
    let reports: serde_json::Value = serde_json::from_str(&json).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 99);
    let ids: Vec<&str> = reports
        .iter()
        .map(|r| r["log_id"].as_str().unwrap())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(reports[0]["scores"].as_array().unwrap().len(), 4);
    assert!(reports[0]["cause"].as_str().unwrap().starts_with('C'));

    // thread count must not change the output
    let single = ok(&[
        "--jobs",
        "1",
        "predict",
        "--model",
        p(&model),
        "--input",
        &failed,
        "--format",
        "json",
    ]);
    assert_eq!(single, json);

    let text = ok(&[
        "predict",
        "--model",
        p(&model),
        "--input",
        &format!("{failed}/f00000.log"),
    ]);
    assert!(text.starts_with("f00000\tC"));

    let eval = ok(&[
        "eval",
        "--model",
        p(&model),
        "--corpus",
        &corpus,
        "--format",
        "json",
        "--rg-trials",
        "20",
    ]);
    let v: serde_json::Value = serde_json::from_str(&eval).unwrap();
    let methods: Vec<&str> = v["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert_eq!(
        methods,
        ["ncc", "rg", "mcc", "cam (simplified)", "lff (simplified)"]
    );
    // 20% of 60/23/11/5, rounded up
    assert_eq!(v["test_logs"], 12 + 5 + 3 + 1);
    assert_eq!(v["records"].as_array().unwrap().len(), 5 * 5);
    let f1 = v["methods"][0]["report"]["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let again = ok(&[
        "eval",
        "--model",
        p(&model),
        "--corpus",
        &corpus,
        "--format",
        "json",
        "--rg-trials",
        "20",
    ]);
    assert_eq!(again, eval);
}

#[test]
fn ablate_reports_all_variants() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let text = ok(&[
        "ablate",
        "--corpus",
        &corpus,
        "--seed",
        "1",
        "--test-fraction",
        "0.2",
    ]);
    let table: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("method"))
        .take(5)
        .collect();
    assert_eq!(table.len(), 5, "{text}");
    for v in ["Drop 1", "Drop 2", "Drop 3", "Full"] {
        assert!(
            table.iter().any(|l| l.starts_with(v)),
            "{v} missing:\n{text}"
        );
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 9\ntest_fraction = 0.5\n[abstraction]\ntree_depth = 5\n",
    )
    .unwrap();
    let model = dir.path().join("m.model");
    let out = ok(&[
        "--config",
        p(&cfg),
        "train",
        "--corpus",
        &corpus,
        "--out",
        p(&model),
    ]);
    assert!(out.contains("split: 48 train / 51 held-out"), "{out}");
    let out = ok(&[
        "--config",
        p(&cfg),
        "train",
        "--corpus",
        &corpus,
        "--out",
        p(&model),
        "--test-fraction",
        "0.1",
    ]);
    assert!(out.contains("split: 87 train / 12 held-out"), "{out}");
    let header = fs::read_to_string(&model).unwrap();
    assert!(header.contains("tree_depth\t5\n"));
    assert!(header.contains("holdout\t0.1\t9\n"));
}

#[test]
fn gen_is_deterministic_and_accepts_spec_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&[
            "gen",
            "--out",
            p(d),
            "--seed",
            "4",
            "--counts",
            "5,3",
            "--passed",
            "2",
        ]);
    }
    for f in [
        "labels.csv",
        "manifest.txt",
        "failed/f00004.log",
        "passed/p00001.log",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        r#"seed = 1
cause_names = ["infra", "product"]
failed_counts = [4, 2]
passed_count = 2
markers = [["ERROR alpha broke {int}"], ["ERROR beta broke {int}"]]
benign = ["INFO gamma ok {int}"]
lines_per_log = [2, 4]
"#,
    )
    .unwrap();
    let c = dir.path().join("c");
    ok(&["gen", "--out", p(&c), "--spec", p(&spec), "--seed", "8"]);
    assert_eq!(
        fs::read_to_string(c.join("causes.txt")).unwrap(),
        "infra\nproduct\n"
    );
    assert!(fs::read_to_string(c.join("manifest.txt"))
        .unwrap()
        .contains("seed\t8\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(
        ncc(&["predict", "--model", p(&missing), "--input", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ncc(&["train", "--corpus", p(&missing), "--out", "m"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ncc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ncc(&["--help"]).status.code(), Some(0));

    let corpus = small_corpus(dir.path());
    // randomized split without a seed
    let out = ncc(&[
        "train",
        "--corpus",
        &corpus,
        "--out",
        "m",
        "--test-fraction",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // label for a file that does not exist
    let labels = format!("{corpus}/labels.csv");
    let mut text = fs::read_to_string(&labels).unwrap();
    text.push_str("ghost,1\n");
    fs::write(&labels, text).unwrap();
    let out = ncc(&[
        "train",
        "--corpus",
        &corpus,
        "--out",
        p(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost"));

    let bad = dir.path().join("bad.model");
    fs::write(&bad, "ncc-model v9\n").unwrap();
    let out = ncc(&["predict", "--model", p(&bad), "--input", &corpus]);
    assert_eq!(out.status.code(), Some(1));
}
