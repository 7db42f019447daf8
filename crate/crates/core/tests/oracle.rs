mod common;

use common::{abstract_corpus, brute_force_table, generate, small_spec, RawEvents};
use ncc_core::abstraction::{AbstractionConfig, EventId, EventSequence};
use ncc_core::corpus::{CauseId, CauseTaxonomy};
use ncc_core::table::{build, build_from_sequences, ScoreTable, Variant};
use proptest::prelude::*;

fn assert_same(table: &ScoreTable, oracle: &std::collections::BTreeMap<u32, Vec<f64>>) {
    let got: Vec<u32> = table.rows().keys().map(|e| e.raw()).collect();
    let want: Vec<u32> = oracle.keys().copied().collect();
    assert_eq!(got, want, "row sets differ");
    for (e, cells) in oracle {
        let row = &table.row(EventId::new(*e)).unwrap().scores;
        for (a, b) in row.iter().zip(cells) {
            assert!((a - b).abs() <= 1e-9, "event {e}: {row:?} vs {cells:?}");
        }
    }
}

fn seq(events: &[u32]) -> EventSequence {
    EventSequence {
        source: String::new(),
        events: events.iter().map(|&e| EventId::new(e)).collect(),
        line_indices: (0..events.len()).collect(),
    }
}

#[test]
fn synthetic_corpora_match_brute_force() {
    let config = AbstractionConfig::default();
    for seed in 0..6 {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate(&small_spec(seed), dir.path());
        let raw = abstract_corpus(&corpus, &config);
        for v in Variant::ALL {
            let (_, table) = build(&corpus, &config, v).unwrap();
            assert_same(&table, &brute_force_table(&raw, corpus.taxonomy.len(), v));
        }
    }
}

fn corpus_strategy() -> impl Strategy<Value = RawEvents> {
    let log = prop::collection::vec(0u32..25, 1..15);
    (
        prop::collection::vec(log.clone(), 0..6),
        prop::collection::vec((log, 0usize..4), 1..30),
    )
        .prop_map(|(mut passed, failed)| {
            // keep some events failed-only
            for p in &mut passed {
                p.retain(|e| *e < 15);
            }
            RawEvents { passed, failed }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn random_event_logs_match_brute_force(raw in corpus_strategy()) {
        let passed: Vec<EventSequence> = raw.passed.iter().map(|l| seq(l)).collect();
        let failed: Vec<(EventSequence, CauseId)> =
            raw.failed.iter().map(|(l, c)| (seq(l), CauseId(*c))).collect();
        for v in Variant::ALL {
            let built = build_from_sequences(&passed, &failed, CauseTaxonomy::default(), v);
            let oracle = brute_force_table(&raw, 4, v);
            match built {
                Ok(t) => assert_same(&t, &oracle),
                Err(_) => prop_assert!(oracle.is_empty()),
            }
        }
    }
}
