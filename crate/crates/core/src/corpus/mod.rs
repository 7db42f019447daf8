//! Labeled log corpora: historical passed logs, failed logs with a verified
//! cause each, and the cause taxonomy.
//!
//! On disk a corpus is a directory with `passed/*.log`, `failed/*.log`, a
//! `labels.csv` mapping failed log ids to cause ids and, optionally, a
//! `causes.txt` listing cause names one per line.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstraction::{read_log_lines, source_name};
use crate::error::{Error, Result};
use crate::par;

pub use synthetic::{
    generate_synthetic, read_manifest, FaultNoise, SyntheticSpec, MANIFEST_HEADER,
};

pub const LABELS_FILE: &str = "labels.csv";
pub const CAUSES_FILE: &str = "causes.txt";
const LABELS_HEADER: &str = "log_id,cause_id";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CauseId(pub usize);

impl CauseId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for CauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0 + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CauseTaxonomy {
    names: Vec<String>,
}

impl Default for CauseTaxonomy {
    /// Bug-related, environmental, test-script and third-party-library issues.
    fn default() -> Self {
        CauseTaxonomy {
            names: [
                "bug-related",
                "environmental",
                "test-script",
                "third-party-library",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

impl CauseTaxonomy {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut problems = Vec::new();
        if names.len() < 2 {
            problems.push(format!(
                "taxonomy needs at least 2 causes, got {}",
                names.len()
            ));
        }
        for n in &names {
            if n.is_empty() || n.contains(['\t', '\n', '\r']) {
                problems.push(format!("invalid cause name {n:?}"));
            }
        }
        if problems.is_empty() {
            Ok(CauseTaxonomy { names })
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, cause: CauseId) -> &str {
        &self.names[cause.0]
    }

    /// `C2 environmental`
    pub fn label(&self, cause: CauseId) -> String {
        format!("{cause} {}", self.name(cause))
    }

    pub fn ids(&self) -> impl Iterator<Item = CauseId> {
        (0..self.names.len()).map(CauseId)
    }

    pub fn contains(&self, cause: CauseId) -> bool {
        cause.0 < self.names.len()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned)
                .collect(),
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut body = self.names.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogFile {
    pub log_id: String,
    pub lines: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledFailedLog {
    pub log_id: String,
    pub lines: Vec<String>,
    pub cause: CauseId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub passed: Vec<LogFile>,
    pub failed: Vec<LabeledFailedLog>,
    pub taxonomy: CauseTaxonomy,
}

impl Corpus {
    /// Builds a corpus in memory, checking label bounds and id uniqueness.
    pub fn new(
        passed: Vec<LogFile>,
        failed: Vec<LabeledFailedLog>,
        taxonomy: CauseTaxonomy,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        let mut ids = BTreeSet::new();
        for f in &failed {
            if !taxonomy.contains(f.cause) {
                problems.push(format!(
                    "log {} has unknown cause id {} (taxonomy has {})",
                    f.log_id,
                    f.cause.0,
                    taxonomy.len()
                ));
            }
            if !ids.insert(f.log_id.as_str()) {
                problems.push(format!("duplicate failed log id {}", f.log_id));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Corpus {
            passed,
            failed,
            taxonomy,
        })
    }

    /// Failed logs per cause, indexed by cause id.
    pub fn cause_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.taxonomy.len()];
        for f in &self.failed {
            counts[f.cause.0] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<CauseId> {
        self.failed.iter().map(|f| f.cause).collect()
    }
}

/// Reads `log_id,cause_id` rows (header required).
pub fn read_labels(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == LABELS_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "{}: expected header {LABELS_HEADER:?}, found {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (n, line) in lines.enumerate() {
        let mut parts = line.split(',');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(cause), None) if !id.trim().is_empty() => {
                match cause.trim().parse::<usize>() {
                    Ok(c) => rows.push((id.trim().to_owned(), c)),
                    Err(_) => problems.push(format!("row {}: bad cause id {cause:?}", n + 2)),
                }
            }
            _ => problems.push(format!(
                "row {}: expected `log_id,cause_id`, got {line:?}",
                n + 2
            )),
        }
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(Error::Validation(problems))
    }
}

pub fn write_labels<'a, I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, CauseId)>,
{
    let mut out = Vec::new();
    writeln!(out, "{LABELS_HEADER}").expect("write to vec");
    for (id, cause) in rows {
        writeln!(out, "{id},{}", cause.0).expect("write to vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn list_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "log") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<LogFile>> {
    par::map(paths, |p| {
        read_log_lines(p).map(|lines| LogFile {
            log_id: source_name(p),
            lines,
        })
    })
    .into_iter()
    .collect()
}

/// Reads a single log file, or every `*.log` file of a directory, sorted by
/// log id.
pub fn read_logs(path: &Path) -> Result<Vec<LogFile>> {
    if path.is_dir() {
        read_all(&list_logs(path)?)
    } else {
        Ok(vec![LogFile {
            log_id: source_name(path),
            lines: read_log_lines(path)?,
        }])
    }
}

/// Loads `root/passed/*.log` and `root/failed/*.log` and attaches labels.
///
/// Every failed log must have exactly one label row, every label row must
/// name an existing failed log, and every cause id must be in the taxonomy.
/// All violations are reported together.
pub fn load_corpus(root: &Path, labels: &Path, taxonomy: CauseTaxonomy) -> Result<Corpus> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        ));
    }
    let passed = read_all(&list_logs(&root.join("passed"))?)?;
    let failed_files = read_all(&list_logs(&root.join("failed"))?)?;
    let rows = read_labels(labels)?;

    let mut problems = Vec::new();
    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, cause) in &rows {
        if by_id.insert(id.as_str(), *cause).is_some() {
            problems.push(format!("duplicate label for {id}"));
        }
        if *cause >= taxonomy.len() {
            problems.push(format!(
                "label {id},{cause}: unknown cause id (taxonomy has {} causes)",
                taxonomy.len()
            ));
        }
    }
    let present: BTreeSet<&str> = failed_files.iter().map(|f| f.log_id.as_str()).collect();
    let unlabeled: Vec<&str> = present
        .iter()
        .filter(|id| !by_id.contains_key(*id))
        .copied()
        .collect();
    if !unlabeled.is_empty() {
        problems.push(format!(
            "failed logs without label: {}",
            unlabeled.join(", ")
        ));
    }
    let orphans: Vec<&str> = by_id
        .keys()
        .filter(|id| !present.contains(*id))
        .copied()
        .collect();
    if !orphans.is_empty() {
        problems.push(format!(
            "labels for missing failed logs: {}",
            orphans.join(", ")
        ));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let failed = failed_files
        .into_iter()
        .map(|f| LabeledFailedLog {
            cause: CauseId(by_id[f.log_id.as_str()]),
            log_id: f.log_id,
            lines: f.lines,
        })
        .collect();
    Corpus::new(passed, failed, taxonomy)
}

/// Loads a corpus directory using its own `labels.csv` and, if present,
/// `causes.txt`; otherwise falls back to `taxonomy`.
pub fn load_corpus_dir(root: &Path, taxonomy: Option<CauseTaxonomy>) -> Result<Corpus> {
    let causes = root.join(CAUSES_FILE);
    let taxonomy = match taxonomy {
        Some(t) => t,
        None if causes.exists() => CauseTaxonomy::read(&causes)?,
        None => CauseTaxonomy::default(),
    };
    load_corpus(root, &root.join(LABELS_FILE), taxonomy)
}

/// Number of test logs drawn from a cause with `n` failed logs.
///
/// `ceil(fraction * n)`, at least one when `n >= 2` and never the whole cause,
/// so every cause keeps a training log. Singletons stay in training.
pub fn test_quota(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    // guard against 0.1 * 30 = 3.0000000000000004
    let raw = (fraction * n as f64 - 1e-9).ceil().max(1.0) as usize;
    raw.min(n - 1)
}

/// Stratified split of the failed logs; all passed logs stay in training.
///
/// Within each cause the logs are ordered by id and shuffled with a seeded
/// ChaCha8 generator, so the split depends only on `(corpus, fraction, seed)`.
pub fn split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for cause in corpus.taxonomy.ids() {
        let mut group: Vec<&LabeledFailedLog> =
            corpus.failed.iter().filter(|f| f.cause == cause).collect();
        group.sort_by(|a, b| a.log_id.cmp(&b.log_id));
        group.shuffle(&mut rng);
        let quota = test_quota(group.len(), test_fraction);
        test.extend(group[..quota].iter().map(|f| (*f).clone()));
        train.extend(group[quota..].iter().map(|f| (*f).clone()));
    }
    train.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    test.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    Ok((
        Corpus {
            passed: corpus.passed.clone(),
            failed: train,
            taxonomy: corpus.taxonomy.clone(),
        },
        Corpus {
            passed: Vec::new(),
            failed: test,
            taxonomy: corpus.taxonomy.clone(),
        },
    ))
}
