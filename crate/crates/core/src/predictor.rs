//! Cause prediction by summing lookup-table rows.

use std::fmt::Write as _;

use serde::Serialize;

use crate::abstraction::{EventId, EventSequence, MinerState};
use crate::corpus::{CauseId, LogFile};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::par;
use crate::table::{ScoreTable, Stage};

#[derive(Clone, Debug, PartialEq)]
pub struct Contributor {
    pub event: EventId,
    /// Largest cell of the event's row.
    pub score: f64,
    pub lines: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub log_id: String,
    pub cause: CauseId,
    pub scores: Vec<f64>,
    /// In-table events of the log, strongest first, ties by event id.
    pub contributors: Vec<Contributor>,
    /// No event of the log was in the table; `cause` is the majority class.
    pub fallback_used: bool,
}

fn require_final(table: &ScoreTable) -> Result<()> {
    if table.stage() != Stage::Final {
        return Err(Error::Invariant(format!(
            "prediction needs a Final table, got {:?}",
            table.stage()
        )));
    }
    Ok(())
}

/// Sum of the rows of the distinct in-table events of `events`.
pub fn score_log(table: &ScoreTable, events: &EventSequence) -> Result<Vec<f64>> {
    require_final(table)?;
    let mut scores = vec![0.0; table.causes()];
    for e in events.distinct_events() {
        if let Some(row) = table.row(e) {
            for (s, c) in scores.iter_mut().zip(&row.scores) {
                *s += c;
            }
        }
    }
    Ok(scores)
}

/// Highest score; exact ties go to the rarer cause (larger ICF), then the lower id.
pub fn pick_cause(scores: &[f64], icf: &[f64]) -> CauseId {
    let mut best = 0;
    for j in 1..scores.len() {
        let better =
            scores[j] > scores[best] || (scores[j] == scores[best] && icf.get(j) > icf.get(best));
        if better {
            best = j;
        }
    }
    CauseId(best)
}

pub fn predict(table: &ScoreTable, events: &EventSequence) -> Result<Prediction> {
    let scores = score_log(table, events)?;
    let mut contributors: Vec<Contributor> = events
        .distinct_events()
        .into_iter()
        .filter_map(|e| {
            table.row(e).map(|row| Contributor {
                event: e,
                score: row.max_score(),
                lines: events.lines_of(e),
            })
        })
        .collect();
    contributors.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.event.cmp(&b.event)));

    let fallback_used = scores.iter().all(|&s| s == 0.0);
    let cause = if fallback_used {
        table.majority_cause()
    } else {
        pick_cause(&scores, table.icf())
    };
    if fallback_used {
        contributors.clear();
    }
    Ok(Prediction {
        log_id: events.source.clone(),
        cause,
        scores,
        contributors,
        fallback_used,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlaggedLine {
    pub line: usize,
    pub event: u32,
    pub template: String,
    /// Cell of the event's row in the predicted cause's column.
    pub column_score: f64,
}

/// Lines of the contributing events, ordered by the event's score for the
/// predicted cause (descending), then event id, then line index.
pub fn flag_lines(
    prediction: &Prediction,
    table: &ScoreTable,
    miner: &MinerState,
) -> Vec<FlaggedLine> {
    if prediction.fallback_used {
        return Vec::new();
    }
    let col = prediction.cause.index();
    let mut events: Vec<(f64, &Contributor)> = prediction
        .contributors
        .iter()
        .map(|c| {
            let s = table.row(c.event).map_or(0.0, |r| r.scores[col]);
            (s, c)
        })
        .collect();
    events.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.event.cmp(&b.1.event)));
    events
        .into_iter()
        .flat_map(|(score, c)| {
            let template = miner.template_text(c.event);
            c.lines.iter().map(move |&line| FlaggedLine {
                line,
                event: c.event.raw(),
                template: template.clone(),
                column_score: score,
            })
        })
        .collect()
}

/// Per-log output record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionReport {
    pub log_id: String,
    pub cause: String,
    pub cause_name: String,
    pub scores: Vec<f64>,
    pub fallback: bool,
    pub flagged: Vec<FlaggedLine>,
}

impl PredictionReport {
    pub fn new(model: &Model, prediction: &Prediction) -> Self {
        let tax = model.table.taxonomy();
        PredictionReport {
            log_id: prediction.log_id.clone(),
            cause: prediction.cause.to_string(),
            cause_name: tax.name(prediction.cause).to_owned(),
            scores: prediction.scores.clone(),
            fallback: prediction.fallback_used,
            flagged: flag_lines(prediction, &model.table, &model.miner),
        }
    }

    /// Human-readable block; `max_lines` caps the flagged lines shown.
    pub fn render_text(&self, max_lines: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}\t{} {}{}",
            self.log_id,
            self.cause,
            self.cause_name,
            if self.fallback {
                "\t(fallback: no known failure events)"
            } else {
                ""
            }
        );
        let scores: Vec<String> = self.scores.iter().map(|x| format!("{x:.4}")).collect();
        let _ = writeln!(s, "  scores\t{}", scores.join("\t"));
        for f in self.flagged.iter().take(max_lines) {
            let _ = writeln!(
                s,
                "  line {:>6}\t{:>10.4}\te{}\t{}",
                f.line, f.column_score, f.event, f.template
            );
        }
        if self.flagged.len() > max_lines {
            let _ = writeln!(
                s,
                "  ... {} more flagged lines",
                self.flagged.len() - max_lines
            );
        }
        s
    }
}

impl Model {
    pub fn predict_lines<S: AsRef<str>>(&self, log_id: &str, lines: &[S]) -> Result<Prediction> {
        let seq = self.miner.match_log(log_id, lines);
        predict(&self.table, &seq)
    }

    /// Predicts every log, in input order, on the rayon pool when enabled.
    pub fn predict_batch(&self, logs: &[LogFile]) -> Result<Vec<Prediction>> {
        par::map(logs, |l| self.predict_lines(&l.log_id, &l.lines))
            .into_iter()
            .collect()
    }

    pub fn predict_batch_sequential(&self, logs: &[LogFile]) -> Result<Vec<Prediction>> {
        par::map_sequential(logs, |l| self.predict_lines(&l.log_id, &l.lines))
            .into_iter()
            .collect()
    }
}
