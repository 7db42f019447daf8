use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncc_core::abstraction::{AbstractionConfig, EventSequence, MinerState};
use ncc_core::corpus::{generate_synthetic, load_corpus_dir, CauseId, LogFile, SyntheticSpec};
use ncc_core::table::{
    collect_pools, diff_with_pass, init_counts, init_counts_sequential, Variant,
};
use ncc_core::Model;

struct Fixture {
    model: Model,
    logs: Vec<LogFile>,
    failed: Vec<(EventSequence, CauseId)>,
    passed: Vec<EventSequence>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::imbalanced(vec![200, 80, 40, 10], 120, 11);
    generate_synthetic(&spec, dir.path()).unwrap();
    let corpus = load_corpus_dir(dir.path(), None).unwrap();
    let config = AbstractionConfig::default();
    let model = Model::train(&corpus, &config, Variant::Full).unwrap();
    let mut miner = MinerState::new(config).unwrap();
    let passed = corpus
        .passed
        .iter()
        .map(|p| miner.parse_log(&p.log_id, &p.lines))
        .collect();
    let failed = corpus
        .failed
        .iter()
        .map(|f| (miner.parse_log(&f.log_id, &f.lines), f.cause))
        .collect();
    let logs = corpus
        .failed
        .iter()
        .map(|f| LogFile {
            log_id: f.log_id.clone(),
            lines: f.lines.clone(),
        })
        .collect();
    Fixture {
        model,
        logs,
        failed,
        passed,
    }
}

fn predict(c: &mut Criterion) {
    let fx = fixture();
    let mut g = c.benchmark_group("predict_batch");
    g.bench_function(BenchmarkId::new("parallel", fx.logs.len()), |b| {
        b.iter(|| fx.model.predict_batch(&fx.logs).unwrap())
    });
    g.bench_function(BenchmarkId::new("sequential", fx.logs.len()), |b| {
        b.iter(|| fx.model.predict_batch_sequential(&fx.logs).unwrap())
    });
    g.finish();
}

fn counts(c: &mut Criterion) {
    let fx = fixture();
    let seqs: Vec<EventSequence> = fx.failed.iter().map(|(s, _)| s.clone()).collect();
    let (p, f) = collect_pools(&fx.passed, &seqs);
    let vocab = diff_with_pass(&f, &p).unwrap();
    let mut g = c.benchmark_group("init_counts");
    g.bench_function("parallel", |b| {
        b.iter(|| init_counts(&vocab, &fx.failed, 4))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| init_counts_sequential(&vocab, &fx.failed, 4))
    });
    g.finish();
}

criterion_group!(benches, predict, counts);
criterion_main!(benches);
