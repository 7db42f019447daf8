//! Confusion matrices, per-class and macro-averaged metrics, and variant
//! ablations over a fixed train/test split.

use std::fmt::Write as _;

use serde::Serialize;

use crate::abstraction::{AbstractionConfig, EventSequence, MinerState};
use crate::corpus::{CauseId, CauseTaxonomy, Corpus};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::predictor::{predict, Prediction};
use crate::table::{
    build_from_sequences, collect_pools, diff_with_pass, init_counts, CountTable, ScoreTable,
};

pub use crate::table::Variant;

/// Counts indexed `[truth][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(causes: usize) -> Self {
        ConfusionMatrix {
            cells: vec![vec![0; causes]; causes],
        }
    }

    pub fn causes(&self) -> usize {
        self.cells.len()
    }

    pub fn add(&mut self, truth: CauseId, predicted: CauseId) {
        self.cells[truth.0][predicted.0] += 1;
    }

    pub fn get(&self, truth: CauseId, predicted: CauseId) -> u64 {
        self.cells[truth.0][predicted.0]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn tp(&self, j: CauseId) -> u64 {
        self.cells[j.0][j.0]
    }

    pub fn fp(&self, j: CauseId) -> u64 {
        (0..self.causes())
            .filter(|&i| i != j.0)
            .map(|i| self.cells[i][j.0])
            .sum()
    }

    pub fn fn_(&self, j: CauseId) -> u64 {
        (0..self.causes())
            .filter(|&p| p != j.0)
            .map(|p| self.cells[j.0][p])
            .sum()
    }

    pub fn support(&self, j: CauseId) -> u64 {
        self.cells[j.0].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        let hits: u64 = (0..self.causes()).map(|j| self.cells[j][j]).sum();
        ratio(hits, total)
    }

    pub fn render(&self, taxonomy: &CauseTaxonomy) -> String {
        let k = self.causes();
        let mut s = String::from("truth\\pred");
        for j in 0..k {
            let _ = write!(s, "\t{}", CauseId(j));
        }
        s.push('\n');
        for (i, row) in self.cells.iter().enumerate() {
            let _ = write!(s, "{} {}", CauseId(i), taxonomy.name(CauseId(i)));
            for c in row {
                let _ = write!(s, "\t{c}");
            }
            s.push('\n');
        }
        s
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(
    truth: &[CauseId],
    predicted: &[CauseId],
    causes: usize,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} ground-truth labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(causes);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t.0 >= causes || p.0 >= causes {
            return Err(Error::invalid(format!(
                "cause out of range: {t} / {p} with {causes} causes"
            )));
        }
        cm.add(t, p);
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub cause: usize,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 per cause; any zero denominator yields 0.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.causes())
        .map(|j| {
            let c = CauseId(j);
            let (tp, fp, fn_) = (cm.tp(c), cm.fp(c), cm.fn_(c));
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                cause: j,
                tp,
                fp,
                fn_,
                support: cm.support(c),
                precision,
                recall,
                f1,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacroReport {
    pub per_class: Vec<ClassMetrics>,
    pub precision: f64,
    pub recall: f64,
    /// Mean of the per-class F1 values.
    pub f1: f64,
    pub accuracy: f64,
}

pub fn macro_report(cm: &ConfusionMatrix) -> MacroReport {
    let per_class = per_class_metrics(cm);
    let k = per_class.len().max(1) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    MacroReport {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        accuracy: cm.accuracy(),
        per_class,
    }
}

/// One flat row per (method, cause), plus a `macro` row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRecord {
    pub method: String,
    pub cause: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: Option<u64>,
}

impl MacroReport {
    pub fn records(&self, method: &str) -> Vec<MetricRecord> {
        let mut out: Vec<MetricRecord> = self
            .per_class
            .iter()
            .map(|m| MetricRecord {
                method: method.to_owned(),
                cause: CauseId(m.cause).to_string(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: Some(m.support),
            })
            .collect();
        out.push(MetricRecord {
            method: method.to_owned(),
            cause: "macro".into(),
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
            support: None,
        });
        out
    }

    pub fn render(&self, taxonomy: &CauseTaxonomy) -> String {
        let width = taxonomy
            .names()
            .iter()
            .map(|n| n.len() + 4)
            .max()
            .unwrap_or(0)
            .max(8);
        let mut s = format!(
            "{:<width$} {:>9} {:>9} {:>9} {:>8}\n",
            "cause", "precision", "recall", "f1", "support"
        );
        for m in &self.per_class {
            let c = CauseId(m.cause);
            let label = format!("{c} {}", taxonomy.name(c));
            let _ = writeln!(
                s,
                "{label:<width$} {:>9.3} {:>9.3} {:>9.3} {:>8}",
                m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(
            s,
            "{:<width$} {:>9.3} {:>9.3} {:>9.3}",
            "macro", self.precision, self.recall, self.f1
        );
        s
    }
}

/// Side-by-side macro and per-class F1 of several methods.
pub fn render_comparison(rows: &[(String, MacroReport)], taxonomy: &CauseTaxonomy) -> String {
    let width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(0).max(6);
    let mut s = format!(
        "{:<width$} {:>9} {:>9} {:>9}",
        "method", "precision", "recall", "f1"
    );
    for j in taxonomy.ids() {
        let _ = write!(s, " {:>7}", format!("F1 {j}"));
    }
    s.push('\n');
    for (method, r) in rows {
        let _ = write!(
            s,
            "{method:<width$} {:>9.3} {:>9.3} {:>9.3}",
            r.precision, r.recall, r.f1
        );
        for m in &r.per_class {
            let _ = write!(s, " {:>7.3}", m.f1);
        }
        s.push('\n');
    }
    s
}

/// Predictions of a trained model on labeled failed logs.
pub fn evaluate_model(model: &Model, test: &Corpus) -> Result<(Vec<Prediction>, ConfusionMatrix)> {
    let logs: Vec<_> = test
        .failed
        .iter()
        .map(|f| crate::corpus::LogFile {
            log_id: f.log_id.clone(),
            lines: f.lines.clone(),
        })
        .collect();
    let preds = model.predict_batch(&logs)?;
    let predicted: Vec<CauseId> = preds.iter().map(|p| p.cause).collect();
    let cm = confusion(&test.labels(), &predicted, model.table.causes())?;
    Ok((preds, cm))
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub variant: Variant,
    pub table: ScoreTable,
    pub predictions: Vec<CauseId>,
    pub confusion: ConfusionMatrix,
    pub report: MacroReport,
}

/// Training logs abstracted once, shared by every variant.
struct Abstracted {
    passed: Vec<EventSequence>,
    failed: Vec<(EventSequence, CauseId)>,
    test: Vec<EventSequence>,
}

fn abstract_split(train: &Corpus, test: &Corpus, config: &AbstractionConfig) -> Result<Abstracted> {
    if train.taxonomy != test.taxonomy {
        return Err(Error::invalid(
            "train and test corpora use different cause taxonomies",
        ));
    }
    let mut miner = MinerState::new(config.clone())?;
    let passed = train
        .passed
        .iter()
        .map(|p| miner.parse_log(&p.log_id, &p.lines))
        .collect();
    let failed = train
        .failed
        .iter()
        .map(|f| (miner.parse_log(&f.log_id, &f.lines), f.cause))
        .collect();
    miner.freeze();
    let test = crate::par::map(&test.failed, |f| miner.match_log(&f.log_id, &f.lines));
    Ok(Abstracted {
        passed,
        failed,
        test,
    })
}

fn ablate_one(
    data: &Abstracted,
    truth: &[CauseId],
    taxonomy: &CauseTaxonomy,
    variant: Variant,
) -> Result<AblationResult> {
    let table = build_from_sequences(&data.passed, &data.failed, taxonomy.clone(), variant)?;
    let predictions = crate::par::map(&data.test, |s| predict(&table, s).map(|p| p.cause))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let confusion = confusion(truth, &predictions, taxonomy.len())?;
    let report = macro_report(&confusion);
    Ok(AblationResult {
        variant,
        table,
        predictions,
        confusion,
        report,
    })
}

pub fn run_ablation(
    train: &Corpus,
    test: &Corpus,
    variant: Variant,
    config: &AbstractionConfig,
) -> Result<AblationResult> {
    let data = abstract_split(train, test, config)?;
    ablate_one(&data, &test.labels(), &train.taxonomy, variant)
}

/// Every variant on the same split, in `Variant::ALL` order.
pub fn run_ablations(
    train: &Corpus,
    test: &Corpus,
    config: &AbstractionConfig,
) -> Result<Vec<AblationResult>> {
    let data = abstract_split(train, test, config)?;
    let truth = test.labels();
    let results = Variant::ALL
        .iter()
        .map(|&v| ablate_one(&data, &truth, &train.taxonomy, v))
        .collect::<Result<Vec<_>>>()?;
    let failed: Vec<EventSequence> = data.failed.iter().map(|(s, _)| s.clone()).collect();
    let (p, f) = collect_pools(&data.passed, &failed);
    let counts = init_counts(&diff_with_pass(&f, &p)?, &data.failed, train.taxonomy.len());
    let problems = variant_identities(&results, &counts);
    if !problems.is_empty() {
        return Err(Error::Invariant(problems.join("; ")));
    }
    Ok(results)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Structural relations between the variant tables: Drop1 keeps every Full
/// row, Drop2 cells are raw counts times ICF, Drop3 cells times ICF equal Full
/// cells. `counts` are the presence counts over the diffed vocabulary.
pub fn variant_identities(results: &[AblationResult], counts: &CountTable) -> Vec<String> {
    let get = |v: Variant| results.iter().find(|r| r.variant == v).map(|r| &r.table);
    let mut problems = Vec::new();
    let Some(full) = get(Variant::Full) else {
        return vec!["missing Full table".into()];
    };
    if let Some(d1) = get(Variant::Drop1) {
        for e in full.rows().keys() {
            if d1.row(*e).is_none() {
                problems.push(format!("Drop1 lacks Full row {e}"));
            }
        }
    }
    if let Some(d2) = get(Variant::Drop2) {
        for (e, row) in d2.rows() {
            let Some(c) = counts.rows.get(e) else {
                problems.push(format!("Drop2 row {e} has no counts"));
                continue;
            };
            for (j, (&s, &n)) in row.scores.iter().zip(c).enumerate() {
                if !close(s, n as f64 * d2.icf()[j]) {
                    problems.push(format!("Drop2 {e} C{}: {s} != {n} * icf", j + 1));
                }
            }
        }
    }
    if let Some(d3) = get(Variant::Drop3) {
        if d3.len() != full.len() {
            problems.push("Drop3 and Full differ in rows".into());
        }
        for (e, row) in d3.rows() {
            let Some(f) = full.row(*e) else { continue };
            for (j, (&s, &t)) in row.scores.iter().zip(&f.scores).enumerate() {
                if !close(s * full.icf()[j], t) {
                    problems.push(format!("Drop3 {e} C{} times icf != Full", j + 1));
                }
            }
        }
    }
    problems
}
