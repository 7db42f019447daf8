#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use ncc_core::abstraction::{AbstractionConfig, MinerState};
use ncc_core::corpus::{generate_synthetic, load_corpus_dir, Corpus, FaultNoise, SyntheticSpec};
use ncc_core::table::Variant;

/// Event ids of every line of every training log, parsed passed-first like
/// the real pipeline.
#[derive(Clone, Debug)]
pub struct RawEvents {
    pub passed: Vec<Vec<u32>>,
    pub failed: Vec<(Vec<u32>, usize)>,
}

pub fn abstract_corpus(corpus: &Corpus, config: &AbstractionConfig) -> RawEvents {
    let mut miner = MinerState::new(config.clone()).unwrap();
    let mut ids = |lines: &[String]| -> Vec<u32> {
        lines
            .iter()
            .filter_map(|l| miner.parse_line(l))
            .map(|e| e.raw())
            .collect()
    };
    let passed = corpus.passed.iter().map(|p| ids(&p.lines)).collect();
    let failed = corpus
        .failed
        .iter()
        .map(|f| (ids(&f.lines), f.cause.0))
        .collect();
    RawEvents { passed, failed }
}

/// Naive table builder: plain loops over logs, events and causes, no pools,
/// no sets. Returns event id → final cells.
pub fn brute_force_table(raw: &RawEvents, k: usize, variant: Variant) -> BTreeMap<u32, Vec<f64>> {
    let mut candidates: Vec<u32> = Vec::new();
    for (log, _) in &raw.failed {
        for &e in log {
            if !candidates.contains(&e) {
                candidates.push(e);
            }
        }
    }
    let mut vocabulary = Vec::new();
    for &e in &candidates {
        let mut in_passed = false;
        for log in &raw.passed {
            for &p in log {
                if p == e {
                    in_passed = true;
                }
            }
        }
        if !(variant.diff_with_pass() && in_passed) {
            vocabulary.push(e);
        }
    }

    let n = raw.failed.len() as f64;
    let mut n_j = vec![0.0; k];
    for (_, c) in &raw.failed {
        n_j[*c] += 1.0;
    }

    let mut out = BTreeMap::new();
    for &e in &vocabulary {
        let mut counts = vec![0u64; k];
        for (log, cause) in &raw.failed {
            for (j, count) in counts.iter_mut().enumerate() {
                if *cause == j && log.contains(&e) {
                    *count += 1;
                }
            }
        }
        let nonzero = counts.iter().filter(|&&c| c > 0).count();
        let total: u64 = counts.iter().sum();
        let mut cells = vec![0.0; k];
        for j in 0..k {
            let c = counts[j];
            cells[j] = if !variant.reweight() {
                c as f64
            } else if nonzero > 1 {
                c as f64 / total as f64
            } else if c == 0 {
                0.0
            } else if c == 1 {
                1.0
            } else {
                (1.0 + c as f64).log2()
            };
            if variant.icf() {
                cells[j] *= if n_j[j] == 0.0 { 0.0 } else { n / n_j[j] };
            }
        }
        out.insert(e, cells);
    }
    out
}

pub fn generate(spec: &SyntheticSpec, dir: &Path) -> Corpus {
    generate_synthetic(spec, dir).unwrap();
    load_corpus_dir(dir, None).unwrap()
}

/// A small corpus with multi-cause failed-only noise and a passed/failed
/// overlap template, sized from `seed`.
pub fn small_spec(seed: u64) -> SyntheticSpec {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=4);
    let counts: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=9)).collect();
    let passed = rng.gen_range(1..=(50 - counts.iter().sum::<usize>()).min(12));
    let mut spec = SyntheticSpec::imbalanced(counts, passed, seed);
    spec.lines_per_log = [4, 12];
    spec.fault_noise = (0..3)
        .map(|i| FaultNoise {
            template: SyntheticSpec::fault_template(i),
            rates: (0..k).map(|_| rng.gen_range(0.0..0.8)).collect(),
            passed_rate: if i == 2 { 0.3 } else { 0.0 },
        })
        .collect();
    spec
}

pub const RESET: &str = "ERROR connection reset by peer port 8080";
pub const QUOTA: &str = "ERROR disk quota exceeded on volume 3";
pub const STEP: &str = "INFO running test step 12";
pub const CONFIG: &str = "INFO reading config /etc/app/main.conf";

fn labeled(id: &str, cause: usize, lines: &[&str]) -> ncc_core::corpus::LabeledFailedLog {
    ncc_core::corpus::LabeledFailedLog {
        log_id: id.into(),
        lines: lines.iter().map(|l| l.to_string()).collect(),
        cause: ncc_core::corpus::CauseId(cause),
    }
}

/// Ten failed logs in which the reset error occurs 2/4/1/3 times across
/// C1..C4 and the quota error five times, always under C2. Step and config
/// lines also occur in the passed log and must vanish from the table.
pub fn worked_example() -> Corpus {
    let passed = vec![ncc_core::corpus::LogFile {
        log_id: "p0".into(),
        lines: vec![
            STEP.into(),
            "INFO reading config /etc/app/other.conf".into(),
        ],
    }];
    let reset = |n: u32| format!("ERROR connection reset by peer port {n}");
    let quota = |n: u32| format!("ERROR disk quota exceeded on volume {n}");
    let mut failed = Vec::new();
    let causes = [0, 0, 1, 1, 1, 1, 2, 3, 3, 3];
    for (i, &c) in causes.iter().enumerate() {
        let r = reset(8000 + i as u32);
        failed.push(labeled(&format!("f{i}"), c, &[STEP, CONFIG, &r]));
    }
    let q = quota(9);
    failed.push(labeled("f10", 1, &["INFO running test step 99", &q]));
    for (i, f) in failed
        .iter_mut()
        .enumerate()
        .filter(|(i, _)| (2..=5).contains(i))
    {
        f.lines.push(quota(i as u32));
    }
    Corpus::new(passed, failed, ncc_core::corpus::CauseTaxonomy::default()).unwrap()
}
