//! `ncc`: generate synthetic corpora, train a cause model, predict causes of
//! failed test logs, evaluate against baselines and run variant ablations.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ncc_core::baselines::{self, cam_train, lff_train, mcc_predict, rg_predict};
use ncc_core::corpus::{
    self, generate_synthetic, read_logs, split, CauseId, CauseTaxonomy, Corpus, SyntheticSpec,
};
use ncc_core::evaluation::{
    confusion, evaluate_model, macro_report, render_comparison, run_ablations, ConfusionMatrix,
    MacroReport, MetricRecord, Variant,
};
use ncc_core::model::Holdout;
use ncc_core::predictor::PredictionReport;
use ncc_core::{Error, EventSequence, Model, Result};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "ncc",
    version,
    about = "Classify root causes of failed test runs from their logs"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct CorpusArgs {
    /// Corpus directory with passed/ and failed/ subdirectories.
    #[arg(long)]
    corpus: PathBuf,
    /// Labels CSV (default: <corpus>/labels.csv).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Cause names, one per line (default: <corpus>/causes.txt, else the built-in four).
    #[arg(long)]
    causes: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Full generator spec as TOML.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Failed logs per cause, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [600usize, 230, 110, 15])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        passed: usize,
    },
    /// Build a model file from a labeled corpus.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        /// Hold out this fraction of each cause and train on the rest.
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// full, drop1, drop2 or drop3.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Predict causes of one log file or a directory of *.log files.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Flagged lines shown per log in text output.
        #[arg(long, default_value_t = 10)]
        max_lines: usize,
    },
    /// Score a model and the baselines on held-out labeled logs.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Separate training corpus for the baselines; the whole --corpus is then the test set.
        #[arg(long)]
        train_corpus: Option<PathBuf>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma separated subset of rg, mcc, cam, lff.
        #[arg(long, value_delimiter = ',')]
        baselines: Option<Vec<String>>,
        #[arg(long)]
        k_neighbors: Option<usize>,
        #[arg(long)]
        rg_trials: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Train and score all four table variants on one split.
    Ablate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    set_jobs(cli.jobs.or(cfg.jobs))?;
    match cli.command {
        Command::Gen {
            out,
            spec,
            seed,
            counts,
            passed,
        } => gen(&cfg, out, spec, seed, counts, passed),
        Command::Train {
            corpus,
            out,
            test_fraction,
            seed,
            variant,
        } => train(&cfg, &corpus, &out, test_fraction, seed, variant),
        Command::Predict {
            model,
            input,
            format,
            max_lines,
        } => predict(&model, &input, format, max_lines),
        Command::Eval {
            model,
            corpus,
            train_corpus,
            test_fraction,
            seed,
            baselines,
            k_neighbors,
            rg_trials,
            format,
        } => {
            let opts = EvalOptions {
                test_fraction: test_fraction.or(cfg.test_fraction),
                seed: seed.or(cfg.seed),
                baselines: baselines.or_else(|| cfg.baselines.clone()),
                k_neighbors: k_neighbors
                    .or(cfg.k_neighbors)
                    .unwrap_or(baselines::DEFAULT_K_NEIGHBORS),
                rg_trials: rg_trials
                    .or(cfg.rg_trials)
                    .unwrap_or(baselines::DEFAULT_RG_TRIALS),
            };
            eval(&model, &corpus, train_corpus.as_deref(), opts, format)
        }
        Command::Ablate {
            corpus,
            test_fraction,
            seed,
            format,
        } => ablate(&cfg, &corpus, test_fraction, seed, format),
    }
}

#[cfg(feature = "parallel")]
fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::invalid("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if jobs.is_some_and(|n| n > 1) {
        eprintln!("warning: built without the parallel feature, --jobs ignored");
    }
    Ok(())
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| {
        Error::invalid(format!(
            "{what} is randomized: pass --seed or set seed in the config"
        ))
    })
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus> {
    let taxonomy = match &args.causes {
        Some(p) => Some(CauseTaxonomy::read(p)?),
        None => None,
    };
    match &args.labels {
        None => corpus::load_corpus_dir(&args.corpus, taxonomy),
        Some(labels) => {
            let taxonomy = match taxonomy {
                Some(t) => t,
                None => {
                    let default = args.corpus.join(corpus::CAUSES_FILE);
                    if default.exists() {
                        CauseTaxonomy::read(&default)?
                    } else {
                        CauseTaxonomy::default()
                    }
                }
            };
            corpus::load_corpus(&args.corpus, labels, taxonomy)
        }
    }
}

fn gen(
    cfg: &RunConfig,
    out: PathBuf,
    spec_path: Option<PathBuf>,
    seed: Option<u64>,
    counts: Vec<usize>,
    passed: usize,
) -> Result<()> {
    let seed = seed.or(cfg.seed);
    let spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let mut spec: SyntheticSpec = toml::from_str(&text)
                .map_err(|e| Error::format("generator spec", e.to_string()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            spec
        }
        None => SyntheticSpec::imbalanced(counts, passed, require_seed(seed, "generation")?),
    };
    let manifest = generate_synthetic(&spec, &out)?;
    let failed: usize = spec.failed_counts.iter().sum();
    println!(
        "wrote {} passed and {failed} failed logs ({:?} per cause) to {}",
        spec.passed_count,
        spec.failed_counts,
        out.display()
    );
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn train(
    cfg: &RunConfig,
    args: &CorpusArgs,
    out: &Path,
    test_fraction: Option<f64>,
    seed: Option<u64>,
    variant: Option<String>,
) -> Result<()> {
    let variant: Variant = variant
        .or_else(|| cfg.variant.clone())
        .as_deref()
        .unwrap_or("full")
        .parse()?;
    let abstraction = cfg.abstraction()?;
    let corpus = load_corpus(args)?;
    let test_fraction = test_fraction.or(cfg.test_fraction);
    let (train, holdout) = match test_fraction {
        Some(f) => {
            let seed = require_seed(seed.or(cfg.seed), "the train/test split")?;
            let (train, test) = split(&corpus, f, seed)?;
            println!(
                "split: {} train / {} held-out failed logs",
                train.failed.len(),
                test.failed.len()
            );
            (
                train,
                Some(Holdout {
                    test_fraction: f,
                    seed,
                }),
            )
        }
        None => (corpus, None),
    };
    let model = Model::train(&train, &abstraction, variant)?.with_holdout(holdout);
    model.save(out)?;
    let bytes = std::fs::metadata(out).map_err(|e| Error::io(out, e))?.len();
    println!(
        "trained {variant} on {} passed / {} failed logs: {} templates, {} table rows, {bytes} bytes -> {}",
        train.passed.len(),
        train.failed.len(),
        model.miner.len(),
        model.table.len(),
        out.display()
    );
    Ok(())
}

fn predict(model_path: &Path, input: &Path, format: Format, max_lines: usize) -> Result<()> {
    let model = Model::load(model_path)?;
    if !input.exists() {
        return Err(Error::io(
            input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    let mut logs = read_logs(input)?;
    logs.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    let predictions = model.predict_batch(&logs)?;
    let reports: Vec<PredictionReport> = predictions
        .iter()
        .map(|p| PredictionReport::new(&model, p))
        .collect();
    match format {
        Format::Json => println!("{}", to_json(&reports)?),
        Format::Text => {
            for r in &reports {
                print!("{}", r.render_text(max_lines));
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::format("json", e.to_string()))
}

struct EvalOptions {
    test_fraction: Option<f64>,
    seed: Option<u64>,
    baselines: Option<Vec<String>>,
    k_neighbors: usize,
    rg_trials: usize,
}

#[derive(Serialize)]
struct MethodResult {
    method: String,
    report: MacroReport,
    confusion: ConfusionMatrix,
}

fn method_result(
    method: &str,
    truth: &[CauseId],
    predicted: &[CauseId],
    k: usize,
) -> Result<MethodResult> {
    let cm = confusion(truth, predicted, k)?;
    Ok(MethodResult {
        method: method.to_owned(),
        report: macro_report(&cm),
        confusion: cm,
    })
}

fn eval(
    model_path: &Path,
    args: &CorpusArgs,
    train_corpus: Option<&Path>,
    opts: EvalOptions,
    format: Format,
) -> Result<()> {
    let model = Model::load(model_path)?;
    let corpus = load_corpus(args)?;
    if corpus.taxonomy != *model.table.taxonomy() {
        return Err(Error::invalid(
            "corpus causes differ from the model's causes",
        ));
    }
    let holdout = match (opts.test_fraction, model.holdout) {
        (Some(f), _) => Some(Holdout {
            test_fraction: f,
            seed: require_seed(
                opts.seed.or(model.holdout.map(|h| h.seed)),
                "the train/test split",
            )?,
        }),
        (None, Some(h)) => Some(Holdout {
            seed: opts.seed.unwrap_or(h.seed),
            ..h
        }),
        (None, None) => None,
    };
    let (train, test) = match (train_corpus, holdout) {
        (Some(dir), _) => {
            let train = corpus::load_corpus_dir(dir, Some(corpus.taxonomy.clone()))?;
            (Some(train), corpus)
        }
        (None, Some(h)) => {
            let (train, test) = split(&corpus, h.test_fraction, h.seed)?;
            (Some(train), test)
        }
        (None, None) => (None, corpus),
    };
    if test.failed.is_empty() {
        return Err(Error::invalid("no failed logs to evaluate"));
    }

    let requested: Vec<String> = match opts.baselines {
        Some(b) => b
            .iter()
            .map(|s| s.trim().to_ascii_lowercase())
            .filter(|s| !s.is_empty())
            .collect(),
        None if train.is_some() => ["rg", "mcc", "cam", "lff"].map(String::from).to_vec(),
        None => Vec::new(),
    };
    for b in &requested {
        if !["rg", "mcc", "cam", "lff"].contains(&b.as_str()) {
            return Err(Error::invalid(format!(
                "unknown baseline {b:?} (expected rg, mcc, cam, lff)"
            )));
        }
    }
    if !requested.is_empty() && train.is_none() {
        return Err(Error::invalid(
            "baselines need training logs: use a model trained with --test-fraction, or pass --test-fraction/--train-corpus",
        ));
    }

    let k = test.taxonomy.len();
    let truth = test.labels();
    let (_, cm) = evaluate_model(&model, &test)?;
    let mut results = vec![MethodResult {
        method: "ncc".into(),
        report: macro_report(&cm),
        confusion: cm,
    }];

    if let Some(train) = &train {
        let counts: Vec<u64> = train.cause_counts().iter().map(|&c| c as u64).collect();
        for b in &requested {
            let result = match b.as_str() {
                "rg" => {
                    let seed =
                        require_seed(opts.seed.or(holdout.map(|h| h.seed)), "random guessing")?;
                    let rg = rg_predict(&counts, &truth, opts.rg_trials, seed)?;
                    method_result("rg", &truth, &rg.trials[rg.median_trial], k)?
                }
                "mcc" => method_result("mcc", &truth, &mcc_predict(&counts, truth.len())?, k)?,
                "cam" => {
                    let index = cam_train(train, opts.k_neighbors)?;
                    let docs: Vec<Vec<String>> = test
                        .failed
                        .iter()
                        .map(|f| baselines::terms(&f.lines))
                        .collect();
                    method_result("cam (simplified)", &truth, &index.classify_batch(&docs), k)?
                }
                "lff" => {
                    let seqs = |logs: Vec<(&str, &[String])>| -> Vec<EventSequence> {
                        logs.into_iter()
                            .map(|(id, l)| model.miner.match_log(id, l))
                            .collect()
                    };
                    let passed = seqs(
                        train
                            .passed
                            .iter()
                            .map(|p| (p.log_id.as_str(), p.lines.as_slice()))
                            .collect(),
                    );
                    let failed: Vec<(EventSequence, CauseId)> = seqs(
                        train
                            .failed
                            .iter()
                            .map(|f| (f.log_id.as_str(), f.lines.as_slice()))
                            .collect(),
                    )
                    .into_iter()
                    .zip(train.labels())
                    .collect();
                    let index = lff_train(&passed, &failed, k, opts.k_neighbors)?;
                    let docs: Vec<Vec<_>> = seqs(
                        test.failed
                            .iter()
                            .map(|f| (f.log_id.as_str(), f.lines.as_slice()))
                            .collect(),
                    )
                    .into_iter()
                    .map(|s| s.events)
                    .collect();
                    method_result("lff (simplified)", &truth, &index.classify_batch(&docs), k)?
                }
                _ => unreachable!("validated above"),
            };
            results.push(result);
        }
    }
    emit(&results, 0, &test.taxonomy, test.failed.len(), format)
}

/// `focus` picks the method whose confusion matrix is printed in text mode.
fn emit(
    results: &[MethodResult],
    focus: usize,
    taxonomy: &CauseTaxonomy,
    test_logs: usize,
    format: Format,
) -> Result<()> {
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                test_logs: usize,
                causes: &'a [String],
                methods: &'a [MethodResult],
                records: Vec<MetricRecord>,
            }
            let records = results
                .iter()
                .flat_map(|r| r.report.records(&r.method))
                .collect();
            let out = Out {
                test_logs,
                causes: taxonomy.names(),
                methods: results,
                records,
            };
            println!("{}", to_json(&out)?);
        }
        Format::Text => {
            println!("{test_logs} test logs\n");
            for r in results {
                println!("== {}", r.method);
                print!("{}", r.report.render(taxonomy));
                println!();
            }
            let rows: Vec<(String, MacroReport)> = results
                .iter()
                .map(|r| (r.method.clone(), r.report.clone()))
                .collect();
            print!("{}", render_comparison(&rows, taxonomy));
            if let Some(r) = results.get(focus) {
                println!("\nconfusion ({})", r.method);
                print!("{}", r.confusion.render(taxonomy));
            }
        }
    }
    Ok(())
}

fn ablate(
    cfg: &RunConfig,
    args: &CorpusArgs,
    test_fraction: Option<f64>,
    seed: Option<u64>,
    format: Format,
) -> Result<()> {
    let corpus = load_corpus(args)?;
    let fraction = test_fraction.or(cfg.test_fraction).unwrap_or(0.1);
    let seed = require_seed(seed.or(cfg.seed), "the train/test split")?;
    let (train, test) = split(&corpus, fraction, seed)?;
    if test.failed.is_empty() {
        return Err(Error::invalid("split produced no test logs"));
    }
    let ablations = run_ablations(&train, &test, &cfg.abstraction()?)?;
    let results: Vec<MethodResult> = ablations
        .into_iter()
        .map(|a| MethodResult {
            method: a.variant.to_string(),
            report: a.report,
            confusion: a.confusion,
        })
        .collect();
    let full = Variant::ALL
        .iter()
        .position(|v| *v == Variant::Full)
        .unwrap_or(0);
    emit(&results, full, &test.taxonomy, test.failed.len(), format)
}
