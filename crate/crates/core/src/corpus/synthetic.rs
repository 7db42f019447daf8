//! Seeded generator for labeled log corpora with planted fault signatures.
//!
//! Templates are plain strings with `{int}`, `{hex}`, `{ip}` and `{path}` slots
//! that are filled with fresh random values on every line, so the template
//! miner has real work to do. Each failed log of cause `j` always carries the
//! first marker of `j`; the remaining markers of `j` are added independently.
//! Benign and noise templates are all forced into at least one passed log,
//! which makes them disappear in diff-with-pass.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_labels, CauseId, CauseTaxonomy, CAUSES_FILE, LABELS_FILE};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "ncc-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// A failed-only (or mostly failed) event whose frequency depends on the cause.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultNoise {
    pub template: String,
    /// Per-cause probability of appearing in a failed log of that cause.
    pub rates: Vec<f64>,
    /// Probability of appearing in a passed log. Zero keeps it failed-only.
    #[serde(default)]
    pub passed_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub cause_names: Vec<String>,
    pub failed_counts: Vec<usize>,
    pub passed_count: usize,
    /// Per-cause marker templates; never emitted into passed logs.
    pub markers: Vec<Vec<String>>,
    pub benign: Vec<String>,
    #[serde(default)]
    pub noise: Vec<String>,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub fault_noise: Vec<FaultNoise>,
    /// Chance of each non-primary marker of the log's cause being added.
    #[serde(default)]
    pub extra_marker_rate: f64,
    pub lines_per_log: [usize; 2],
}

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "zo", "pe", "da", "fu", "gi", "ho", "ju", "be",
    "co", "wy", "xa", "qu",
];

/// Alphabetic pseudo-word for index `i`; distinct for distinct `i`.
pub(crate) fn word(i: usize) -> String {
    let mut n = i;
    let mut w = String::new();
    for _ in 0..3 {
        w.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    while n > 0 {
        w.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    w
}

const BENIGN_SHAPES: [&str; 4] = [
    "INFO {w} step completed in {int} ms",
    "INFO {w} loaded configuration from {path}",
    "DEBUG {w} session opened with {ip}",
    "DEBUG {w} checksum {hex} verified for block {int}",
];

const NOISE_SHAPES: [&str; 2] = [
    "WARN {w} retrying request attempt {int}",
    "TRACE {w} heartbeat {hex} ok",
];

const MARKER_SHAPES: [&str; 3] = [
    "ERROR {w} failed with exit code {int}",
    "FATAL {w} raised exception at {path}",
    "ERROR {w} timed out contacting {ip} after {int} ms",
];

impl SyntheticSpec {
    /// A corpus shaped like an industrial CI history: the default four-cause
    /// taxonomy, `markers_per_cause` planted markers per cause, 16 benign and
    /// 6 noise templates, 20–40 lines per log.
    pub fn imbalanced(failed_counts: Vec<usize>, passed_count: usize, seed: u64) -> Self {
        let taxonomy = CauseTaxonomy::default();
        let mut k = taxonomy.names().to_vec();
        while k.len() < failed_counts.len() {
            k.push(format!("cause-{}", k.len() + 1));
        }
        k.truncate(failed_counts.len());
        Self::with_vocabulary(k, failed_counts, passed_count, 3, seed)
    }

    pub fn with_vocabulary(
        cause_names: Vec<String>,
        failed_counts: Vec<usize>,
        passed_count: usize,
        markers_per_cause: usize,
        seed: u64,
    ) -> Self {
        let mut next = 0usize;
        let mut fresh = |shape: &str| {
            next += 1;
            shape.replace("{w}", &word(next))
        };
        let benign = (0..16)
            .map(|i| fresh(BENIGN_SHAPES[i % BENIGN_SHAPES.len()]))
            .collect();
        let noise = (0..6)
            .map(|i| fresh(NOISE_SHAPES[i % NOISE_SHAPES.len()]))
            .collect();
        let markers = (0..failed_counts.len())
            .map(|_| {
                (0..markers_per_cause)
                    .map(|i| fresh(MARKER_SHAPES[i % MARKER_SHAPES.len()]))
                    .collect()
            })
            .collect();
        SyntheticSpec {
            seed,
            cause_names,
            failed_counts,
            passed_count,
            markers,
            benign,
            noise,
            noise_rate: 0.15,
            fault_noise: Vec::new(),
            extra_marker_rate: 0.3,
            lines_per_log: [20, 40],
        }
    }

    /// Fresh failed-only template text usable in [`FaultNoise`].
    pub fn fault_template(index: usize) -> String {
        format!(
            "WARN {} degraded mode entered code {{int}}",
            word(10_000 + index)
        )
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let k = self.cause_names.len();
        if let Err(Error::Validation(p)) = CauseTaxonomy::new(self.cause_names.clone()) {
            problems.extend(p);
        }
        if self.failed_counts.len() != k {
            problems.push(format!(
                "failed_counts has {} entries for {k} causes",
                self.failed_counts.len()
            ));
        }
        if self.markers.len() != k {
            problems.push(format!(
                "markers has {} entries for {k} causes",
                self.markers.len()
            ));
        }
        for (j, m) in self.markers.iter().enumerate() {
            if m.is_empty() && self.failed_counts.get(j).copied().unwrap_or(0) > 0 {
                problems.push(format!("cause {j} has logs but no markers"));
            }
        }
        if self.benign.is_empty() {
            problems.push("at least one benign template is required".into());
        }
        let [lo, hi] = self.lines_per_log;
        if lo == 0 || lo > hi {
            problems.push(format!(
                "lines_per_log [{lo}, {hi}] must satisfy 1 <= min <= max"
            ));
        }
        for (name, r) in [
            ("noise_rate", self.noise_rate),
            ("extra_marker_rate", self.extra_marker_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                problems.push(format!("{name} must be in [0, 1], got {r}"));
            }
        }
        for f in &self.fault_noise {
            if f.rates.len() != k {
                problems.push(format!(
                    "fault noise {:?} has {} rates for {k} causes",
                    f.template,
                    f.rates.len()
                ));
            }
            if f.rates
                .iter()
                .chain(std::iter::once(&f.passed_rate))
                .any(|r| !(0.0..=1.0).contains(r))
            {
                problems.push(format!(
                    "fault noise {:?} has a rate outside [0, 1]",
                    f.template
                ));
            }
        }

        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        let mut claim = |t: &str, who: String, problems: &mut Vec<String>| {
            if t.trim().is_empty() || t.contains(['\t', '\n']) {
                problems.push(format!(
                    "{who}: template {t:?} is empty or has tabs/newlines"
                ));
            }
            if let Some(prev) = owner.insert(t.to_owned(), who.clone()) {
                problems.push(format!("template {t:?} is used by both {prev} and {who}"));
            }
        };
        for (j, ms) in self.markers.iter().enumerate() {
            for m in ms {
                claim(m, format!("markers of cause {j}"), &mut problems);
            }
        }
        for b in &self.benign {
            claim(b, "benign".into(), &mut problems);
        }
        for n in &self.noise {
            claim(n, "noise".into(), &mut problems);
        }
        for f in &self.fault_noise {
            claim(&f.template, "fault noise".into(), &mut problems);
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn taxonomy(&self) -> Result<CauseTaxonomy> {
        CauseTaxonomy::new(self.cause_names.clone())
    }

    /// Marker template → cause.
    pub fn marker_causes(&self) -> BTreeMap<String, CauseId> {
        self.markers
            .iter()
            .enumerate()
            .flat_map(|(j, ms)| ms.iter().map(move |m| (m.clone(), CauseId(j))))
            .collect()
    }
}

fn render(template: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = template.to_owned();
    while let Some(pos) = out.find("{int}") {
        let v = rng.gen_range(0..100_000u32).to_string();
        out.replace_range(pos..pos + 5, &v);
    }
    while let Some(pos) = out.find("{hex}") {
        let v = format!("0x{:08x}", rng.gen::<u32>());
        out.replace_range(pos..pos + 5, &v);
    }
    while let Some(pos) = out.find("{ip}") {
        let v = format!(
            "10.{}.{}.{}",
            rng.gen_range(0..256),
            rng.gen_range(0..256),
            rng.gen_range(1..255)
        );
        out.replace_range(pos..pos + 4, &v);
    }
    while let Some(pos) = out.find("{path}") {
        let v = format!(
            "/opt/{}/{}/part{}.rb:{}",
            word(rng.gen_range(0..40)),
            word(rng.gen_range(0..40)),
            rng.gen_range(0..50),
            rng.gen_range(1..900)
        );
        out.replace_range(pos..pos + 6, &v);
    }
    out
}

struct LogBuilder<'a> {
    spec: &'a SyntheticSpec,
}

impl LogBuilder<'_> {
    fn background(&self, rng: &mut ChaCha8Rng) -> Vec<String> {
        let [lo, hi] = self.spec.lines_per_log;
        let n = rng.gen_range(lo..=hi);
        (0..n)
            .map(|_| {
                let t = if !self.spec.noise.is_empty() && rng.gen_bool(self.spec.noise_rate) {
                    self.spec.noise.choose(rng).expect("noise non-empty")
                } else {
                    self.spec.benign.choose(rng).expect("benign non-empty")
                };
                render(t, rng)
            })
            .collect()
    }

    fn insert(lines: &mut Vec<String>, template: &str, rng: &mut ChaCha8Rng) {
        let at = rng.gen_range(0..=lines.len());
        let text = render(template, rng);
        lines.insert(at, text);
    }
}

/// Writes `passed/`, `failed/`, `labels.csv`, `causes.txt` and `manifest.txt`
/// under `out`. Equal specs produce byte-identical output.
pub fn generate_synthetic(spec: &SyntheticSpec, out: &Path) -> Result<std::path::PathBuf> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let builder = LogBuilder { spec };

    let passed_dir = out.join("passed");
    let failed_dir = out.join("failed");
    for d in [&passed_dir, &failed_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    // Everything allowed in passed logs appears there at least once.
    let mut coverage: Vec<&str> = spec.benign.iter().map(String::as_str).collect();
    coverage.extend(spec.noise.iter().map(String::as_str));
    coverage.extend(
        spec.fault_noise
            .iter()
            .filter(|f| f.passed_rate > 0.0)
            .map(|f| f.template.as_str()),
    );

    for i in 0..spec.passed_count {
        let mut lines = builder.background(&mut rng);
        for t in coverage.iter().skip(i).step_by(spec.passed_count) {
            LogBuilder::insert(&mut lines, t, &mut rng);
        }
        for f in &spec.fault_noise {
            if f.passed_rate > 0.0 && rng.gen_bool(f.passed_rate) {
                LogBuilder::insert(&mut lines, &f.template, &mut rng);
            }
        }
        write_log(&passed_dir.join(format!("p{i:05}.log")), &lines)?;
    }

    let mut causes: Vec<CauseId> = spec
        .failed_counts
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat_n(CauseId(j), n))
        .collect();
    causes.shuffle(&mut rng);

    let mut labels = Vec::with_capacity(causes.len());
    for (i, &cause) in causes.iter().enumerate() {
        let mut lines = builder.background(&mut rng);
        let markers = &spec.markers[cause.0];
        LogBuilder::insert(&mut lines, &markers[0], &mut rng);
        for m in &markers[1..] {
            if rng.gen_bool(spec.extra_marker_rate) {
                LogBuilder::insert(&mut lines, m, &mut rng);
            }
        }
        for f in &spec.fault_noise {
            if rng.gen_bool(f.rates[cause.0]) {
                LogBuilder::insert(&mut lines, &f.template, &mut rng);
            }
        }
        let id = format!("f{i:05}");
        write_log(&failed_dir.join(format!("{id}.log")), &lines)?;
        labels.push((id, cause));
    }

    write_labels(
        &out.join(LABELS_FILE),
        labels.iter().map(|(id, c)| (id.as_str(), *c)),
    )?;
    spec.taxonomy()?.write(&out.join(CAUSES_FILE))?;
    let manifest = out.join(MANIFEST_FILE);
    write_manifest(spec, &manifest)?;
    Ok(manifest)
}

fn write_log(path: &Path, lines: &[String]) -> Result<()> {
    let mut body = lines.join("\n");
    body.push('\n');
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn write_manifest(spec: &SyntheticSpec, path: &Path) -> Result<()> {
    let mut o = Vec::new();
    let w = &mut o;
    let _ = writeln!(w, "{MANIFEST_HEADER}");
    let _ = writeln!(w, "seed\t{}", spec.seed);
    let _ = writeln!(w, "causes\t{}", spec.cause_names.len());
    for (j, n) in spec.cause_names.iter().enumerate() {
        let _ = writeln!(w, "cause\t{j}\t{n}");
    }
    for (j, n) in spec.failed_counts.iter().enumerate() {
        let _ = writeln!(w, "failed_count\t{j}\t{n}");
    }
    let _ = writeln!(w, "passed_count\t{}", spec.passed_count);
    let _ = writeln!(
        w,
        "lines_per_log\t{}\t{}",
        spec.lines_per_log[0], spec.lines_per_log[1]
    );
    let _ = writeln!(w, "noise_rate\t{}", spec.noise_rate);
    let _ = writeln!(w, "extra_marker_rate\t{}", spec.extra_marker_rate);
    for (j, ms) in spec.markers.iter().enumerate() {
        for m in ms {
            let _ = writeln!(w, "marker\t{j}\t{m}");
        }
    }
    for b in &spec.benign {
        let _ = writeln!(w, "benign\t{b}");
    }
    for n in &spec.noise {
        let _ = writeln!(w, "noise\t{n}");
    }
    for f in &spec.fault_noise {
        let _ = writeln!(
            w,
            "fault_noise\t{}\t{}\t{}",
            join_f64(&f.rates),
            f.passed_rate,
            f.template
        );
    }
    fs::write(path, o).map_err(|e| Error::io(path, e))
}

/// Parses a manifest back into the spec that produced it.
pub fn read_manifest(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(Error::format(
            "manifest header",
            format!("expected {MANIFEST_HEADER:?}"),
        ));
    }
    let bad = |field: &str, line: &str| Error::format(field, line.to_owned());
    let num = |field: &str, s: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::format(field, s.to_owned()))
    };
    let real = |field: &str, s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::format(field, s.to_owned()))
    };

    let mut spec = SyntheticSpec {
        seed: 0,
        cause_names: Vec::new(),
        failed_counts: Vec::new(),
        passed_count: 0,
        markers: Vec::new(),
        benign: Vec::new(),
        noise: Vec::new(),
        noise_rate: 0.0,
        fault_noise: Vec::new(),
        extra_marker_rate: 0.0,
        lines_per_log: [1, 1],
    };
    let mut seen = BTreeSet::new();
    for line in lines {
        let (key, rest) = line
            .split_once('\t')
            .ok_or_else(|| bad("manifest line", line))?;
        seen.insert(key.to_owned());
        match key {
            "seed" => spec.seed = rest.parse().map_err(|_| bad("seed", rest))?,
            "causes" => {
                let k = num("causes", rest)?;
                spec.cause_names = vec![String::new(); k];
                spec.failed_counts = vec![0; k];
                spec.markers = vec![Vec::new(); k];
            }
            "cause" | "failed_count" | "marker" => {
                let (j, v) = rest.split_once('\t').ok_or_else(|| bad(key, line))?;
                let j = num(key, j)?;
                if j >= spec.cause_names.len() {
                    return Err(bad(key, line));
                }
                match key {
                    "cause" => spec.cause_names[j] = v.to_owned(),
                    "failed_count" => spec.failed_counts[j] = num(key, v)?,
                    _ => spec.markers[j].push(v.to_owned()),
                }
            }
            "passed_count" => spec.passed_count = num(key, rest)?,
            "lines_per_log" => {
                let (a, b) = rest.split_once('\t').ok_or_else(|| bad(key, line))?;
                spec.lines_per_log = [num(key, a)?, num(key, b)?];
            }
            "noise_rate" => spec.noise_rate = real(key, rest)?,
            "extra_marker_rate" => spec.extra_marker_rate = real(key, rest)?,
            "benign" => spec.benign.push(rest.to_owned()),
            "noise" => spec.noise.push(rest.to_owned()),
            "fault_noise" => {
                let mut parts = rest.splitn(3, '\t');
                let (Some(rates), Some(pr), Some(t)) = (parts.next(), parts.next(), parts.next())
                else {
                    return Err(bad(key, line));
                };
                let rates = rates
                    .split(',')
                    .map(|r| real(key, r))
                    .collect::<Result<Vec<_>>>()?;
                spec.fault_noise.push(FaultNoise {
                    template: t.to_owned(),
                    rates,
                    passed_rate: real(key, pr)?,
                });
            }
            _ => return Err(bad("manifest key", key)),
        }
    }
    for required in ["seed", "causes", "passed_count", "lines_per_log"] {
        if !seen.contains(required) {
            return Err(Error::format(required, "missing from manifest"));
        }
    }
    Ok(spec)
}
