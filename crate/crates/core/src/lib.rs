//! Predicts the root cause of a failed test run from its raw log.
//!
//! The pipeline has three stages:
//!
//! 1. [`abstraction`] mines log templates with a fixed-depth parse tree, turning
//!    every log file into a sequence of event ids.
//! 2. [`table`] builds an event × cause score table from historical passed and
//!    failed logs: events seen in passing runs are discarded, the remaining
//!    per-cause presence counts are reweighted (single- vs multi-cause events) and
//!    scaled by inverse class frequency.
//! 3. [`predictor`] sums the rows of a new log's events and reports the
//!    highest-scoring cause together with the lines that drove the decision.
//!
//! [`baselines`] and [`evaluation`] provide reference classifiers, macro
//! precision/recall/F1 and the ablation variants; [`corpus`] loads, splits and
//! synthesizes labeled corpora.

pub mod abstraction;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod par;
pub mod predictor;
pub mod table;

pub use abstraction::{AbstractionConfig, EventId, EventSequence, LogTemplate, MinerState};
pub use corpus::{CauseId, CauseTaxonomy, Corpus, LabeledFailedLog, LogFile};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, MacroReport, Variant};
pub use model::Model;
pub use predictor::Prediction;
pub use table::ScoreTable;
