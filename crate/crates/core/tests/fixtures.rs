mod common;

use std::fs;

use common::{generate, worked_example, QUOTA, RESET};
use ncc_core::abstraction::{AbstractionConfig, MinerState};
use ncc_core::corpus::{load_corpus_dir, read_manifest, LogFile, SyntheticSpec};
use ncc_core::table::{build, RowKind, ScoreTable, Stage, Variant};
use ncc_core::{Error, Model};

#[test]
fn worked_example_rows() {
    let corpus = worked_example();
    let config = AbstractionConfig::default();
    let (miner, drop3) = build(&corpus, &config, Variant::Drop3).unwrap();
    let (_, full) = build(&corpus, &config, Variant::Full).unwrap();
    let reset = miner.match_line(RESET).unwrap();
    let quota = miner.match_line(QUOTA).unwrap();

    assert_eq!(drop3.len(), 2, "step and config lines must be diffed away");
    let r = drop3.row(reset).unwrap();
    assert_eq!(r.kind, RowKind::Multi);
    assert_eq!(r.scores, vec![0.2, 0.4, 0.1, 0.3]);
    let q = drop3.row(quota).unwrap();
    assert_eq!(q.kind, RowKind::Single);
    assert!((q.scores[1] - 2.584_962_500_721_156).abs() < 1e-9);
    assert_eq!([q.scores[0], q.scores[2], q.scores[3]], [0.0; 3]);

    // N = 11, N_j = (2, 5, 1, 3)
    let icf = [5.5, 2.2, 11.0, 11.0 / 3.0];
    for (a, b) in full.icf().iter().zip(icf) {
        assert!((a - b).abs() < 1e-12);
    }
    for (e, row) in drop3.rows() {
        for (j, s) in row.scores.iter().enumerate() {
            assert!((s * icf[j] - full.row(*e).unwrap().scores[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn took_seconds_pair_merges() {
    for config in [
        AbstractionConfig::default(),
        AbstractionConfig::without_masks(),
    ] {
        let mut m = MinerState::new(config).unwrap();
        let a = m.parse_line("Took 10 seconds to build instances").unwrap();
        let b = m.parse_line("Took 9 seconds to build instances").unwrap();
        assert_eq!(a, b);
        assert_eq!(m.len(), 1);
        assert_eq!(m.template_text(a), "Took <*> seconds to build instances");
        assert_eq!(m.template(a).unwrap().wildcard_positions(), vec![1]);
    }
}

#[test]
fn synthetic_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::imbalanced(vec![30, 12, 6, 2], 10, 5);
    spec.fault_noise = vec![ncc_core::corpus::FaultNoise {
        template: SyntheticSpec::fault_template(0),
        rates: vec![0.5, 0.1, 0.0, 1.0],
        passed_rate: 0.2,
    }];
    let manifest = ncc_core::corpus::generate_synthetic(&spec, dir.path()).unwrap();
    assert_eq!(read_manifest(&manifest).unwrap(), spec);

    let corpus = load_corpus_dir(dir.path(), None).unwrap();
    assert_eq!(corpus.cause_counts(), vec![30, 12, 6, 2]);
    assert_eq!(corpus.passed.len(), 10);
    assert_eq!(corpus.taxonomy.names(), spec.cause_names.as_slice());

    // Markers never leak into passed logs; the alphabetic second token
    // identifies a template.
    let key = |s: &str| s.split_whitespace().take(2).collect::<Vec<_>>().join(" ");
    let markers: Vec<String> = spec.markers.iter().flatten().map(|m| key(m)).collect();
    for p in &corpus.passed {
        for l in &p.lines {
            assert!(
                !markers.contains(&key(l)),
                "marker in passed log {}",
                p.log_id
            );
        }
    }
    for f in &corpus.failed {
        let primary = key(&spec.markers[f.cause.0][0]);
        assert!(f.lines.iter().any(|l| key(l) == primary));
    }

    let again = tempfile::tempdir().unwrap();
    ncc_core::corpus::generate_synthetic(&spec, again.path()).unwrap();
    for sub in ["failed/f00003.log", "passed/p00007.log", "labels.csv"] {
        assert_eq!(
            fs::read(dir.path().join(sub)).unwrap(),
            fs::read(again.path().join(sub)).unwrap()
        );
    }
}

#[test]
fn table_and_model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&common::small_spec(11), &dir.path().join("c"));
    let config = AbstractionConfig::default();
    for v in Variant::ALL {
        let (_, table) = build(&corpus, &config, v).unwrap();
        let path = dir.path().join(format!("{v}.table"));
        table.save(&path).unwrap();
        let back = ScoreTable::load(&path).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.stage(), Stage::Final);
    }

    let model = Model::train(&corpus, &config, Variant::Full).unwrap();
    let path = dir.path().join("m.model");
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back, model);
    let logs: Vec<LogFile> = corpus
        .failed
        .iter()
        .map(|f| LogFile {
            log_id: f.log_id.clone(),
            lines: f.lines.clone(),
        })
        .collect();
    assert_eq!(
        back.predict_batch(&logs).unwrap(),
        model.predict_batch(&logs).unwrap()
    );
}

#[test]
fn corpus_validation_names_problems() {
    let dir = tempfile::tempdir().unwrap();
    generate(&SyntheticSpec::imbalanced(vec![3, 2], 1, 1), dir.path());
    fs::write(dir.path().join("failed/extra.log"), "ERROR x\n").unwrap();
    let mut labels = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    labels.push_str("ghost,0\nf00000,1\n");
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    match load_corpus_dir(dir.path(), None) {
        Err(Error::Validation(problems)) => {
            let all = problems.join("\n");
            assert!(all.contains("extra"), "{all}");
            assert!(all.contains("ghost"), "{all}");
            assert!(all.contains("duplicate label for f00000"), "{all}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
    let missing = load_corpus_dir(&dir.path().join("nope"), None).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn invalid_utf8_is_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.log");
    fs::write(&path, b"ERROR bad \xff byte\n\nINFO fine\n").unwrap();
    let mut m = MinerState::new(AbstractionConfig::default()).unwrap();
    let seq = m.parse_file(&path).unwrap();
    assert_eq!(seq.len(), 2);
    assert_eq!(seq.line_indices, vec![0, 2]);
}
