//! Event × cause lookup table.
//!
//! Construction runs four steps over the abstracted training logs:
//!
//! 1. **diff with pass** – drop every event that occurs in any passed log;
//! 2. **count** – for each remaining event and cause, count the failed logs of
//!    that cause in which the event is present (presence, not multiplicity);
//! 3. **reweight** – events seen under several causes are normalized to sum
//!    to one; events tied to a single cause get `1` for one occurrence and
//!    `log2(1 + c)` for `c > 1`;
//! 4. **inverse class frequency** – column `j` is multiplied by `N / N_j`.
//!
//! Steps 1, 3 and 4 can each be switched off for ablation through [`Variant`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::abstraction::{EventId, EventSequence, MinerState};
use crate::corpus::{CauseId, CauseTaxonomy, Corpus};
use crate::error::{Error, Result};
use crate::par;
use crate::AbstractionConfig;

pub const TABLE_HEADER: &str = "ncc-table v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolOrigin {
    Passed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventPool {
    pub origin: PoolOrigin,
    pub events: BTreeSet<EventId>,
}

impl EventPool {
    pub fn contains(&self, e: EventId) -> bool {
        self.events.contains(&e)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Union of events over passed logs and over failed logs. UNKNOWN is never pooled.
pub fn collect_pools(passed: &[EventSequence], failed: &[EventSequence]) -> (EventPool, EventPool) {
    let union = |seqs: &[EventSequence], origin| EventPool {
        origin,
        events: seqs
            .iter()
            .flat_map(|s| s.events.iter().copied())
            .filter(|e| !e.is_unknown())
            .collect(),
    };
    (
        union(passed, PoolOrigin::Passed),
        union(failed, PoolOrigin::Failed),
    )
}

/// Failed events that never occur in a passed log.
pub fn diff_with_pass(failed: &EventPool, passed: &EventPool) -> Result<EventPool> {
    let events: BTreeSet<EventId> = failed.events.difference(&passed.events).copied().collect();
    if events.is_empty() {
        return Err(Error::Build(format!(
            "all {} failed-log events also occur in passed logs; nothing discriminates a failure",
            failed.len()
        )));
    }
    Ok(EventPool {
        origin: PoolOrigin::Failed,
        events,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    /// Event → number of failed logs per cause containing it.
    pub rows: BTreeMap<EventId, Vec<u64>>,
    pub n_total: u64,
    pub n_per_cause: Vec<u64>,
}

impl CountTable {
    fn empty(k: usize) -> Self {
        CountTable {
            rows: BTreeMap::new(),
            n_total: 0,
            n_per_cause: vec![0; k],
        }
    }

    fn add_log(mut self, vocabulary: &EventPool, seq: &EventSequence, cause: CauseId) -> Self {
        let k = self.n_per_cause.len();
        self.n_total += 1;
        self.n_per_cause[cause.0] += 1;
        let present: HashSet<EventId> = seq.events.iter().copied().collect();
        for e in present {
            if vocabulary.contains(e) {
                self.rows.entry(e).or_insert_with(|| vec![0; k])[cause.0] += 1;
            }
        }
        self
    }

    fn merge(mut self, other: CountTable) -> Self {
        self.n_total += other.n_total;
        for (a, b) in self.n_per_cause.iter_mut().zip(&other.n_per_cause) {
            *a += b;
        }
        for (e, row) in other.rows {
            match self.rows.get_mut(&e) {
                Some(mine) => mine.iter_mut().zip(&row).for_each(|(a, b)| *a += b),
                None => {
                    self.rows.insert(e, row);
                }
            }
        }
        self
    }
}

/// Presence counts of `vocabulary` events per cause. Per-log partial tables are
/// merged by addition, so the result does not depend on worker scheduling.
pub fn init_counts(
    vocabulary: &EventPool,
    failed: &[(EventSequence, CauseId)],
    causes: usize,
) -> CountTable {
    par::fold_merge(
        failed,
        || CountTable::empty(causes),
        |acc, (seq, cause)| acc.add_log(vocabulary, seq, *cause),
        CountTable::merge,
    )
}

pub fn init_counts_sequential(
    vocabulary: &EventPool,
    failed: &[(EventSequence, CauseId)],
    causes: usize,
) -> CountTable {
    par::fold_sequential(
        failed,
        || CountTable::empty(causes),
        |acc, (seq, cause)| acc.add_log(vocabulary, seq, *cause),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Non-zero under exactly one cause.
    Single,
    Multi,
}

impl RowKind {
    fn of<T: PartialEq + Default>(cells: &[T]) -> Self {
        let zero = T::default();
        if cells.iter().filter(|c| **c != zero).count() == 1 {
            RowKind::Single
        } else {
            RowKind::Multi
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            RowKind::Single => "single",
            RowKind::Multi => "multi",
        }
    }
}

/// Single-cause rows: 0 → 0, 1 → 1, c → log2(1 + c). Multi-cause rows: c / Σc.
pub fn reweight(row: &[u64]) -> Result<Vec<f64>> {
    let total: u64 = row.iter().sum();
    if total == 0 {
        return Err(Error::Invariant("reweighting an all-zero count row".into()));
    }
    Ok(match RowKind::of(row) {
        RowKind::Multi => row.iter().map(|&c| c as f64 / total as f64).collect(),
        RowKind::Single => row
            .iter()
            .map(|&c| match c {
                0 => 0.0,
                1 => 1.0,
                c => (1.0 + c as f64).log2(),
            })
            .collect(),
    })
}

/// `N / N_j`, with 0 for causes absent from training.
pub fn compute_icf(n_total: u64, n_per_cause: &[u64]) -> Vec<f64> {
    n_per_cause
        .iter()
        .map(|&nj| {
            if nj == 0 {
                0.0
            } else {
                n_total as f64 / nj as f64
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Counted,
    Reweighted,
    Final,
}

/// Which construction steps run. `Full` runs all four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    /// Without diff-with-pass.
    Drop1,
    /// Without single/multi-cause reweighting.
    Drop2,
    /// Without inverse class frequency.
    Drop3,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Drop1,
        Variant::Drop2,
        Variant::Drop3,
        Variant::Full,
    ];

    pub fn diff_with_pass(self) -> bool {
        self != Variant::Drop1
    }

    pub fn reweight(self) -> bool {
        self != Variant::Drop2
    }

    pub fn icf(self) -> bool {
        self != Variant::Drop3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Drop1 => "drop1",
            Variant::Drop2 => "drop2",
            Variant::Drop3 => "drop3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "Full",
            Variant::Drop1 => "Drop 1",
            Variant::Drop2 => "Drop 2",
            Variant::Drop3 => "Drop 3",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(' ', "").as_str() {
            "full" => Ok(Variant::Full),
            "drop1" => Ok(Variant::Drop1),
            "drop2" => Ok(Variant::Drop2),
            "drop3" => Ok(Variant::Drop3),
            _ => Err(Error::invalid(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub scores: Vec<f64>,
    pub kind: RowKind,
}

impl ScoreRow {
    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    stage: Stage,
    variant: Variant,
    rows: BTreeMap<EventId, ScoreRow>,
    icf: Vec<f64>,
    taxonomy: CauseTaxonomy,
    n_total: u64,
    n_per_cause: Vec<u64>,
}

impl ScoreTable {
    /// Raw counts as scores; stage `Counted`.
    pub fn from_counts(counts: &CountTable, taxonomy: CauseTaxonomy, variant: Variant) -> Self {
        let rows = counts
            .rows
            .iter()
            .map(|(&e, row)| {
                (
                    e,
                    ScoreRow {
                        scores: row.iter().map(|&c| c as f64).collect(),
                        kind: RowKind::of(row),
                    },
                )
            })
            .collect();
        ScoreTable {
            stage: Stage::Counted,
            variant,
            rows,
            icf: compute_icf(counts.n_total, &counts.n_per_cause),
            taxonomy,
            n_total: counts.n_total,
            n_per_cause: counts.n_per_cause.clone(),
        }
    }

    fn expect_stage(&self, stage: Stage, op: &str) -> Result<()> {
        if self.stage != stage {
            return Err(Error::Invariant(format!(
                "{op} needs a {stage:?} table, this one is {:?}",
                self.stage
            )));
        }
        Ok(())
    }

    /// Counted → Reweighted.
    pub fn reweighted(mut self) -> Result<Self> {
        self.expect_stage(Stage::Counted, "reweight")?;
        for row in self.rows.values_mut() {
            let counts: Vec<u64> = row.scores.iter().map(|&c| c as u64).collect();
            row.scores = reweight(&counts)?;
        }
        self.stage = Stage::Reweighted;
        Ok(self)
    }

    /// Counted → Reweighted keeping raw counts.
    pub fn skip_reweight(mut self) -> Result<Self> {
        self.expect_stage(Stage::Counted, "skip_reweight")?;
        self.stage = Stage::Reweighted;
        Ok(self)
    }

    /// Reweighted → Final, multiplying column `j` by `icf[j]`.
    pub fn apply_icf(mut self) -> Result<Self> {
        self.expect_stage(Stage::Reweighted, "apply_icf")?;
        for row in self.rows.values_mut() {
            for (s, w) in row.scores.iter_mut().zip(&self.icf) {
                *s *= w;
            }
        }
        self.stage = Stage::Final;
        Ok(self)
    }

    /// Reweighted → Final unchanged.
    pub fn skip_icf(mut self) -> Result<Self> {
        self.expect_stage(Stage::Reweighted, "skip_icf")?;
        self.stage = Stage::Final;
        Ok(self)
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn rows(&self) -> &BTreeMap<EventId, ScoreRow> {
        &self.rows
    }

    pub fn row(&self, e: EventId) -> Option<&ScoreRow> {
        self.rows.get(&e)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn causes(&self) -> usize {
        self.taxonomy.len()
    }

    pub fn icf(&self) -> &[f64] {
        &self.icf
    }

    pub fn taxonomy(&self) -> &CauseTaxonomy {
        &self.taxonomy
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn n_per_cause(&self) -> &[u64] {
        &self.n_per_cause
    }

    /// Largest training class, lowest id on ties.
    pub fn majority_cause(&self) -> CauseId {
        let mut best = 0;
        for (j, &n) in self.n_per_cause.iter().enumerate() {
            if n > self.n_per_cause[best] {
                best = j;
            }
        }
        CauseId(best)
    }

    /// Every cell multiplied by `factor`. Used to check scale invariance.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        for row in t.rows.values_mut() {
            row.scores.iter_mut().for_each(|s| *s *= factor);
        }
        t
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        self.expect_stage(Stage::Final, "save")?;
        let io = |e: std::io::Error| Error::format("table", e.to_string());
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join("\t");
        writeln!(out, "{TABLE_HEADER}").map_err(io)?;
        writeln!(out, "variant\t{}", self.variant.as_str()).map_err(io)?;
        writeln!(out, "causes\t{}", self.taxonomy.len()).map_err(io)?;
        for (j, name) in self.taxonomy.names().iter().enumerate() {
            writeln!(out, "cause\t{j}\t{name}").map_err(io)?;
        }
        writeln!(out, "n_total\t{}", self.n_total).map_err(io)?;
        writeln!(
            out,
            "n_per_cause\t{}",
            join(&mut self.n_per_cause.iter().map(u64::to_string))
        )
        .map_err(io)?;
        writeln!(
            out,
            "icf\t{}",
            join(&mut self.icf.iter().map(f64::to_string))
        )
        .map_err(io)?;
        writeln!(out, "rows\t{}", self.rows.len()).map_err(io)?;
        for (e, row) in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}",
                e.raw(),
                join(&mut row.scores.iter().map(f64::to_string)),
                row.kind.as_str()
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut next = |field: &str| -> Result<String> {
            let mut line = String::new();
            match input.read_line(&mut line) {
                Ok(0) => Err(Error::format(field, "unexpected end of file")),
                Ok(_) => Ok(line.trim_end_matches(['\n', '\r']).to_owned()),
                Err(e) => Err(Error::format(field, e.to_string())),
            }
        };

        let header = next("table header")?;
        if header != TABLE_HEADER {
            return Err(Error::format(
                "table header",
                format!("unsupported version {header:?}, expected {TABLE_HEADER:?}"),
            ));
        }
        let variant: Variant = keyed(&next("variant")?, "variant")?
            .parse()
            .map_err(|_| Error::format("variant", "unknown variant"))?;
        let k: usize = parse_field(keyed(&next("causes")?, "causes")?, "causes")?;
        let mut names = Vec::with_capacity(k);
        for j in 0..k {
            let line = next("cause")?;
            let rest = keyed(&line, "cause")?;
            let (idx, name) = rest
                .split_once('\t')
                .ok_or_else(|| Error::format("cause", line.clone()))?;
            if parse_field::<usize>(idx, "cause")? != j {
                return Err(Error::format(
                    "cause",
                    format!("expected index {j}, found {idx}"),
                ));
            }
            names.push(name.to_owned());
        }
        let taxonomy =
            CauseTaxonomy::new(names).map_err(|e| Error::format("cause", e.to_string()))?;
        let n_total: u64 = parse_field(keyed(&next("n_total")?, "n_total")?, "n_total")?;
        let n_per_cause: Vec<u64> = parse_list(
            keyed(&next("n_per_cause")?, "n_per_cause")?,
            "n_per_cause",
            k,
        )?;
        let icf: Vec<f64> = parse_list(keyed(&next("icf")?, "icf")?, "icf", k)?;
        if n_per_cause.iter().sum::<u64>() != n_total {
            return Err(Error::format("n_per_cause", "does not sum to n_total"));
        }
        let count: usize = parse_field(keyed(&next("rows")?, "rows")?, "rows")?;
        let mut rows = BTreeMap::new();
        for _ in 0..count {
            let line = next("row")?;
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != k + 2 {
                return Err(Error::format(
                    "row",
                    format!("expected {} fields, found {}: {line:?}", k + 2, parts.len()),
                ));
            }
            let e = EventId::new(parse_field(parts[0], "row event_id")?);
            let scores = parts[1..=k]
                .iter()
                .map(|s| parse_field::<f64>(s, "row score"))
                .collect::<Result<Vec<_>>>()?;
            let kind = match parts[k + 1] {
                "single" => RowKind::Single,
                "multi" => RowKind::Multi,
                other => return Err(Error::format("row kind", other.to_owned())),
            };
            if rows.insert(e, ScoreRow { scores, kind }).is_some() {
                return Err(Error::format("row event_id", format!("duplicate {e}")));
            }
        }
        Ok(ScoreTable {
            stage: Stage::Final,
            variant,
            rows,
            icf,
            taxonomy,
            n_total,
            n_per_cause,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut std::io::BufReader::new(file))
    }
}

fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix('\t'))
        .ok_or_else(|| Error::format(key, format!("expected `{key}<TAB>...`, found {line:?}")))
}

fn parse_field<T: FromStr>(s: &str, field: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::format(field, format!("cannot parse {s:?}")))
}

fn parse_list<T: FromStr>(s: &str, field: &str, k: usize) -> Result<Vec<T>> {
    let xs = s
        .split('\t')
        .map(|x| parse_field(x, field))
        .collect::<Result<Vec<T>>>()?;
    if xs.len() != k {
        return Err(Error::format(
            field,
            format!("expected {k} values, found {}", xs.len()),
        ));
    }
    Ok(xs)
}

/// Table from already abstracted training logs.
pub fn build_from_sequences(
    passed: &[EventSequence],
    failed: &[(EventSequence, CauseId)],
    taxonomy: CauseTaxonomy,
    variant: Variant,
) -> Result<ScoreTable> {
    if failed.is_empty() {
        return Err(Error::Build("training corpus has no failed logs".into()));
    }
    let failed_seqs: Vec<EventSequence> = failed.iter().map(|(s, _)| s.clone()).collect();
    let (passed_pool, failed_pool) = collect_pools(passed, &failed_seqs);
    let vocabulary = if variant.diff_with_pass() {
        diff_with_pass(&failed_pool, &passed_pool)?
    } else if failed_pool.is_empty() {
        return Err(Error::Build("failed logs contain no events".into()));
    } else {
        failed_pool
    };
    let counts = init_counts(&vocabulary, failed, taxonomy.len());
    let table = ScoreTable::from_counts(&counts, taxonomy, variant);
    let table = if variant.reweight() {
        table.reweighted()?
    } else {
        table.skip_reweight()?
    };
    if variant.icf() {
        table.apply_icf()
    } else {
        table.skip_icf()
    }
}

/// Abstracts the training corpus (passed logs first, then failed, each in
/// corpus order) and builds the table. The returned miner is frozen.
pub fn build(
    train: &Corpus,
    config: &AbstractionConfig,
    variant: Variant,
) -> Result<(MinerState, ScoreTable)> {
    if train.failed.is_empty() {
        return Err(Error::Build("training corpus has no failed logs".into()));
    }
    let mut miner = MinerState::new(config.clone())?;
    let passed: Vec<EventSequence> = train
        .passed
        .iter()
        .map(|p| miner.parse_log(&p.log_id, &p.lines))
        .collect();
    let failed: Vec<(EventSequence, CauseId)> = train
        .failed
        .iter()
        .map(|f| (miner.parse_log(&f.log_id, &f.lines), f.cause))
        .collect();
    miner.freeze();
    let table = build_from_sequences(&passed, &failed, train.taxonomy.clone(), variant)?;
    Ok((miner, table))
}
