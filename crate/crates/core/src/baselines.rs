//! Reference classifiers: random guess, majority class and two retrieval
//! models with K-nearest-neighbour voting.
//!
//! The retrieval models are deliberately simple re-implementations of the
//! published mechanisms: `Cam` weights raw whitespace terms by TF-IDF, `Lff`
//! weights abstracted failure-only events by their inverse document frequency.
//! Neither reproduces the original tools' grouping or thresholding.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstraction::{EventId, EventSequence};
use crate::corpus::{CauseId, Corpus};
use crate::error::{Error, Result};
use crate::evaluation::{confusion, macro_report, MacroReport};
use crate::par;
use crate::table::{collect_pools, diff_with_pass};

pub const DEFAULT_K_NEIGHBORS: usize = 5;
pub const DEFAULT_RG_TRIALS: usize = 100;

/// Most frequent class, lowest id on ties.
pub fn majority(counts: &[u64]) -> CauseId {
    let mut best = 0;
    for (j, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = j;
        }
    }
    CauseId(best)
}

pub fn mcc_predict(train_counts: &[u64], test_size: usize) -> Result<Vec<CauseId>> {
    if train_counts.iter().all(|&c| c == 0) {
        return Err(Error::invalid(
            "majority class needs at least one training label",
        ));
    }
    Ok(vec![majority(train_counts); test_size])
}

/// `trials` independent draws of `test_size` causes, each sampled in
/// proportion to the training distribution.
pub fn rg_trials(
    train_counts: &[u64],
    test_size: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<CauseId>>> {
    if trials == 0 {
        return Err(Error::invalid("random guess needs at least one trial"));
    }
    let dist = WeightedIndex::new(train_counts)
        .map_err(|e| Error::invalid(format!("training distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..trials)
        .map(|_| {
            (0..test_size)
                .map(|_| CauseId(dist.sample(&mut rng)))
                .collect()
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct RgOutcome {
    pub trials: Vec<Vec<CauseId>>,
    /// Index of the trial with the median macro F1.
    pub median_trial: usize,
    pub report: MacroReport,
}

/// Runs the random-guess trials and reports the median trial by macro F1
/// (lower median for even counts, ties by trial index).
pub fn rg_predict(
    train_counts: &[u64],
    truth: &[CauseId],
    trials: usize,
    seed: u64,
) -> Result<RgOutcome> {
    let k = train_counts.len();
    let all = rg_trials(train_counts, truth.len(), trials, seed)?;
    let reports: Vec<MacroReport> = all
        .iter()
        .map(|pred| confusion(truth, pred, k).map(|cm| macro_report(&cm)))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| reports[a].f1.total_cmp(&reports[b].f1).then(a.cmp(&b)));
    let median_trial = order[(order.len() - 1) / 2];
    Ok(RgOutcome {
        report: reports[median_trial].clone(),
        trials: all,
        median_trial,
    })
}

type SparseVec = Vec<(usize, f64)>;

fn normalize(mut v: SparseVec) -> SparseVec {
    v.retain(|(_, w)| *w != 0.0);
    v.sort_by_key(|(i, _)| *i);
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|(_, w)| *w /= norm);
    }
    v
}

fn dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// How a document's term counts become weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Weighting {
    /// (count / document length) × idf
    TfIdf,
    /// presence × idf
    BinaryIdf,
}

/// Length-normalized sparse vectors of the training failed logs plus labels.
#[derive(Clone, Debug)]
pub struct RetrievalIndex<K: Hash + Eq> {
    vocab: HashMap<K, usize>,
    idf: Vec<f64>,
    docs: Vec<SparseVec>,
    labels: Vec<CauseId>,
    log_ids: Vec<String>,
    majority: CauseId,
    weighting: Weighting,
    pub k_neighbors: usize,
}

impl<K: Hash + Eq + Clone + Sync + Send> RetrievalIndex<K> {
    /// `docs` are (log id, terms, label); order is normalized by log id.
    fn fit(
        mut docs: Vec<(String, Vec<K>, CauseId)>,
        causes: usize,
        weighting: Weighting,
        allowed: impl Fn(&K) -> bool,
        k_neighbors: usize,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Build(
                "retrieval index needs training failed logs".into(),
            ));
        }
        if k_neighbors == 0 {
            return Err(Error::invalid("k_neighbors must be >= 1"));
        }
        docs.sort_by(|a, b| a.0.cmp(&b.0));

        let mut vocab: HashMap<K, usize> = HashMap::new();
        let mut df: Vec<u64> = Vec::new();
        let mut counted: Vec<Vec<(usize, u64)>> = Vec::with_capacity(docs.len());
        for (_, terms, _) in &docs {
            let mut tf: HashMap<usize, u64> = HashMap::new();
            for t in terms.iter().filter(|t| allowed(t)) {
                let next = vocab.len();
                let id = *vocab.entry(t.clone()).or_insert(next);
                if id == df.len() {
                    df.push(0);
                }
                *tf.entry(id).or_insert(0) += 1;
            }
            for id in tf.keys() {
                df[*id] += 1;
            }
            counted.push(tf.into_iter().collect());
        }
        let n = docs.len() as f64;
        let idf: Vec<f64> = df.iter().map(|&d| (n / d as f64).ln()).collect();

        let mut label_counts = vec![0u64; causes];
        for (_, _, c) in &docs {
            label_counts[c.0] += 1;
        }
        let index = RetrievalIndex {
            vocab,
            idf,
            docs: Vec::new(),
            labels: docs.iter().map(|d| d.2).collect(),
            log_ids: docs.iter().map(|d| d.0.clone()).collect(),
            majority: majority(&label_counts),
            weighting,
            k_neighbors,
        };
        let vectors = counted.into_iter().map(|tf| index.weigh(tf)).collect();
        Ok(RetrievalIndex {
            docs: vectors,
            ..index
        })
    }

    fn weigh(&self, tf: Vec<(usize, u64)>) -> SparseVec {
        let len: u64 = tf.iter().map(|(_, c)| c).sum();
        normalize(
            tf.into_iter()
                .map(|(id, c)| {
                    let w = match self.weighting {
                        Weighting::TfIdf => c as f64 / len as f64,
                        Weighting::BinaryIdf => 1.0,
                    };
                    (id, w * self.idf[id])
                })
                .collect(),
        )
    }

    fn vectorize(&self, terms: &[K]) -> SparseVec {
        let mut tf: HashMap<usize, u64> = HashMap::new();
        for t in terms {
            if let Some(&id) = self.vocab.get(t) {
                *tf.entry(id).or_insert(0) += 1;
            }
        }
        self.weigh(tf.into_iter().collect())
    }

    /// Training documents with positive cosine similarity, best first; ties
    /// keep log-id order.
    pub fn neighbors(&self, terms: &[K]) -> Vec<(usize, f64)> {
        let q = self.vectorize(terms);
        if q.is_empty() {
            return Vec::new();
        }
        let mut sims: Vec<(usize, f64)> = self
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (i, dot(&q, d)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        sims
    }

    /// Majority vote of the nearest `k_neighbors`; vote ties go to the label of
    /// the nearest neighbour among the tied labels. No similar document at all
    /// falls back to the majority class.
    pub fn classify(&self, terms: &[K]) -> CauseId {
        let near = self.neighbors(terms);
        if near.is_empty() {
            return self.majority;
        }
        let top = &near[..near.len().min(self.k_neighbors)];
        let mut votes: HashMap<CauseId, usize> = HashMap::new();
        for (i, _) in top {
            *votes.entry(self.labels[*i]).or_insert(0) += 1;
        }
        let best = *votes.values().max().expect("non-empty");
        top.iter()
            .map(|(i, _)| self.labels[*i])
            .find(|l| votes[l] == best)
            .expect("some label has the top vote")
    }

    pub fn label_of(&self, doc: usize) -> CauseId {
        self.labels[doc]
    }

    pub fn log_id_of(&self, doc: usize) -> &str {
        &self.log_ids[doc]
    }

    pub fn majority_cause(&self) -> CauseId {
        self.majority
    }

    pub fn classify_batch(&self, docs: &[Vec<K>]) -> Vec<CauseId> {
        par::map(docs, |d| self.classify(d))
    }
}

pub type CamIndex = RetrievalIndex<String>;
pub type LffIndex = RetrievalIndex<EventId>;

pub fn terms(lines: &[String]) -> Vec<String> {
    lines
        .iter()
        .flat_map(|l| l.split_whitespace().map(str::to_owned))
        .collect()
}

/// TF-IDF over whitespace terms of the raw training failed logs.
pub fn cam_train(train: &Corpus, k_neighbors: usize) -> Result<CamIndex> {
    let docs = train
        .failed
        .iter()
        .map(|f| (f.log_id.clone(), terms(&f.lines), f.cause))
        .collect();
    RetrievalIndex::fit(
        docs,
        train.taxonomy.len(),
        Weighting::TfIdf,
        |_| true,
        k_neighbors,
    )
}

pub fn cam_predict(index: &CamIndex, lines: &[String]) -> CauseId {
    index.classify(&terms(lines))
}

/// IDF-weighted presence vectors over failure-only events (events of any
/// passed log are excluded from the vocabulary, as is the unknown event).
pub fn lff_train(
    passed: &[EventSequence],
    failed: &[(EventSequence, CauseId)],
    causes: usize,
    k_neighbors: usize,
) -> Result<LffIndex> {
    let failed_seqs: Vec<EventSequence> = failed.iter().map(|(s, _)| s.clone()).collect();
    let (p, f) = collect_pools(passed, &failed_seqs);
    let vocabulary: BTreeSet<EventId> = diff_with_pass(&f, &p)?.events;
    let docs = failed
        .iter()
        .map(|(s, c)| (s.source.clone(), s.events.clone(), *c))
        .collect();
    RetrievalIndex::fit(
        docs,
        causes,
        Weighting::BinaryIdf,
        |e| !e.is_unknown() && vocabulary.contains(e),
        k_neighbors,
    )
}

pub fn lff_predict(index: &LffIndex, log: &EventSequence) -> CauseId {
    index.classify(&log.events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CauseTaxonomy, LabeledFailedLog};

    #[test]
    fn mcc_majority_and_ties() {
        assert_eq!(mcc_predict(&[5, 9, 2], 3).unwrap(), vec![CauseId(1); 3]);
        assert_eq!(mcc_predict(&[4, 4, 1], 1).unwrap(), vec![CauseId(0)]);
        assert!(mcc_predict(&[0, 0], 1).is_err());
    }

    #[test]
    fn rg_single_cause_and_determinism() {
        let t = rg_trials(&[0, 7, 0], 50, 3, 1).unwrap();
        assert!(t.iter().flatten().all(|c| *c == CauseId(1)));
        assert_eq!(
            rg_trials(&[3, 2, 1], 40, 5, 9).unwrap(),
            rg_trials(&[3, 2, 1], 40, 5, 9).unwrap()
        );
        assert!(rg_trials(&[1, 1], 4, 0, 1).is_err());
    }

    #[test]
    fn rg_follows_distribution() {
        let t = rg_trials(&[1, 1, 1, 1], 10_000, 1, 42).unwrap();
        let mut freq = [0usize; 4];
        for c in &t[0] {
            freq[c.0] += 1;
        }
        for f in freq {
            assert!((f as f64 / 10_000.0 - 0.25).abs() < 0.02, "{freq:?}");
        }
    }

    #[test]
    fn rg_reports_median_trial() {
        let truth: Vec<CauseId> = (0..40).map(|i| CauseId(i % 2)).collect();
        let out = rg_predict(&[1, 1], &truth, 7, 3).unwrap();
        let mut f1s: Vec<f64> = out
            .trials
            .iter()
            .map(|p| macro_report(&confusion(&truth, p, 2).unwrap()).f1)
            .collect();
        f1s.sort_by(f64::total_cmp);
        assert_eq!(out.report.f1, f1s[3]);
    }

    fn doc(id: &str, text: &str, cause: usize) -> LabeledFailedLog {
        LabeledFailedLog {
            log_id: id.into(),
            lines: text.lines().map(str::to_owned).collect(),
            cause: CauseId(cause),
        }
    }

    // Three documents over terms {a, b, c, d}:
    //   d1 = "a a b" (C1), d2 = "b c" (C2), d3 = "c d d" (C3)
    // df: a=1 b=2 c=2 d=1, idf = ln(3/df): a=d=ln3, b=c=ln1.5.
    // d1 = (2/3 ln3, 1/3 ln1.5, 0, 0); d2 = (0, 1/2 ln1.5, 1/2 ln1.5, 0);
    // d3 = (0, 0, 1/3 ln1.5, 2/3 ln3).
    // Query "a b": q = (1/2 ln3, 1/2 ln1.5, 0, 0).
    // Un-normalized dots: q·d1 = 1/3 ln3² + 1/6 ln1.5², q·d2 = 1/4 ln1.5², q·d3 = 0.
    fn toy_cam() -> CamIndex {
        let c = Corpus::new(
            vec![],
            vec![
                doc("d1", "a a b", 0),
                doc("d2", "b c", 1),
                doc("d3", "c d d", 2),
            ],
            CauseTaxonomy::new(vec!["x".into(), "y".into(), "z".into()]).unwrap(),
        )
        .unwrap();
        cam_train(&c, 1).unwrap()
    }

    #[test]
    fn cam_toy_cosine_ordering() {
        let idx = toy_cam();
        let (l3, l15) = (3f64.ln(), 1.5f64.ln());
        let norm = |v: [f64; 4]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q = [0.5 * l3, 0.5 * l15, 0.0, 0.0];
        let d1 = [2.0 / 3.0 * l3, 1.0 / 3.0 * l15, 0.0, 0.0];
        let d2 = [0.0, 0.5 * l15, 0.5 * l15, 0.0];
        let cos = |a: [f64; 4], b: [f64; 4]| {
            a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b))
        };
        let want1 = cos(q, d1);
        let want2 = cos(q, d2);
        let got = idx.neighbors(&terms(&["a b".to_string()]));
        assert_eq!(got.len(), 2);
        assert_eq!(idx.log_id_of(got[0].0), "d1");
        assert_eq!(idx.log_id_of(got[1].0), "d2");
        assert!((got[0].1 - want1).abs() < 1e-12);
        assert!((got[1].1 - want2).abs() < 1e-12);
        assert_eq!(cam_predict(&idx, &["a b".to_string()]), CauseId(0));
    }

    #[test]
    fn cam_self_similarity_and_empty_fallback() {
        let idx = toy_cam();
        let near = idx.neighbors(&terms(&["c d d".to_string()]));
        assert_eq!(idx.log_id_of(near[0].0), "d3");
        assert!((near[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(cam_predict(&idx, &[]), idx.majority_cause());
        assert_eq!(
            cam_predict(&idx, &["zzz".to_string()]),
            idx.majority_cause()
        );
    }

    #[test]
    fn cam_vote_tie_goes_to_nearest() {
        let c = Corpus::new(
            vec![],
            vec![
                doc("a", "x y", 0),
                doc("b", "x y z", 1),
                doc("c", "q", 1),
                doc("d", "r", 0),
            ],
            CauseTaxonomy::new(vec!["x".into(), "y".into()]).unwrap(),
        )
        .unwrap();
        let mut idx = cam_train(&c, 2).unwrap();
        // Neighbours of "x y": a (exact), then b. One vote each: a's label wins.
        assert_eq!(cam_predict(&idx, &["x y".to_string()]), CauseId(0));
        idx.k_neighbors = 1;
        assert_eq!(cam_predict(&idx, &["x y z".to_string()]), CauseId(1));
    }

    #[test]
    fn cam_training_order_irrelevant() {
        let mut logs = vec![
            doc("d1", "a a b", 0),
            doc("d2", "b c", 1),
            doc("d3", "c d d", 2),
        ];
        let tax = CauseTaxonomy::new(vec!["x".into(), "y".into(), "z".into()]).unwrap();
        let a = cam_train(&Corpus::new(vec![], logs.clone(), tax.clone()).unwrap(), 2).unwrap();
        logs.reverse();
        let b = cam_train(&Corpus::new(vec![], logs, tax).unwrap(), 2).unwrap();
        for q in ["a", "b", "c d", "b c a"] {
            let q = vec![q.to_string()];
            assert_eq!(cam_predict(&a, &q), cam_predict(&b, &q));
        }
    }

    fn seq(id: &str, events: &[u32]) -> EventSequence {
        EventSequence {
            source: id.into(),
            events: events.iter().map(|&e| EventId::new(e)).collect(),
            line_indices: (0..events.len()).collect(),
        }
    }

    // Four failed logs, event 0 also passed, event 9 in every failed log:
    //   f1 {0,1,9} C1   f2 {2,9} C2   f3 {2,3,9} C2   f4 {4,9} C3
    // vocabulary {1,2,3,4,9}; idf: 1,3,4 = ln4; 2 = ln2; 9 = 0.
    // Query {2,3}: q = (ln2, ln4)/|.|; f3 = (ln2, ln4)/|.| → cosine 1;
    // f2 = (ln2) → cosine ln2/sqrt(ln2²+ln4²) = 1/sqrt(5).
    #[test]
    fn lff_toy_ranking() {
        let passed = vec![seq("p", &[0])];
        let failed = vec![
            (seq("f1", &[0, 1, 9]), CauseId(0)),
            (seq("f2", &[2, 9]), CauseId(1)),
            (seq("f3", &[2, 3, 9]), CauseId(1)),
            (seq("f4", &[4, 9]), CauseId(2)),
        ];
        let idx = lff_train(&passed, &failed, 3, 5).unwrap();
        let near = idx.neighbors(&seq("q", &[2, 3]).events);
        assert_eq!(near.len(), 2);
        assert_eq!(idx.log_id_of(near[0].0), "f3");
        assert!((near[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(idx.log_id_of(near[1].0), "f2");
        assert!((near[1].1 - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(lff_predict(&idx, &seq("q", &[2, 3])), CauseId(1));

        // Event 9 is in every failed log: zero weight, no neighbours.
        assert!(idx.neighbors(&seq("q", &[9]).events).is_empty());
        assert_eq!(lff_predict(&idx, &seq("q", &[9])), idx.majority_cause());
        // Shares all events with f4 only.
        assert_eq!(lff_predict(&idx, &seq("q", &[4])), CauseId(2));
    }
}
