//! Privacy risk: how predictable the next movement step is, and how reliably
//! a trajectory gives away which subject produced it.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::write_atomic;
use crate::lstm::{sequence_forward, Head, LstmError, Model, Outputs};
use crate::par::Exec;

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("test labels contain {0} distinct class(es); re-identification needs at least two")]
    SingleClass(usize),
    #[error("no test steps to evaluate")]
    EmptyTestSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] LstmError),
    #[error("report: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A sequence of feature rows.
pub type Rows = Vec<Vec<f64>>;

/// Splits standardized rows into `(inputs, targets)` where each target is
/// the following row. With `window = Some(L)` the sequence is cut into
/// non-overlapping chunks of `L + 1` rows (a short tail chunk is kept if it
/// has at least two rows).
pub fn next_step_chunks(rows: &[Vec<f64>], window: Option<usize>) -> Vec<(Rows, Rows)> {
    if rows.len() < 2 {
        return Vec::new();
    }
    let span = window.map_or(rows.len(), |w| w.max(1) + 1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + 1 < rows.len() {
        let end = (start + span).min(rows.len());
        let chunk = &rows[start..end];
        out.push((chunk[..chunk.len() - 1].to_vec(), chunk[1..].to_vec()));
        start = end - 1;
    }
    out
}

/// Non-overlapping windows of `window` rows. A ragged tail is dropped unless
/// the whole sequence is shorter than one window.
pub fn classification_windows(rows: &[Vec<f64>], window: usize) -> Vec<Vec<Vec<f64>>> {
    let window = window.max(1);
    if rows.len() < window {
        return if rows.is_empty() {
            Vec::new()
        } else {
            vec![rows.to_vec()]
        };
    }
    rows.chunks_exact(window).map(|c| c.to_vec()).collect()
}

/// Next-step mean squared error of `model` and of the persistence predictor
/// (next row = current row), both in standardized units and pooled over
/// every predicted step and component.
pub fn eval_prediction(
    model: &Model,
    test: &[Vec<Vec<f64>>],
    window: Option<usize>,
    exec: Exec,
) -> Result<(f64, f64), PrivacyError> {
    let d = model.params.input_dim;
    if model.standardizer.dim() != d || model.head.outputs() != d {
        return Err(PrivacyError::DimensionMismatch(format!(
            "model expects {d} inputs and must predict {d} outputs, has {} outputs",
            model.head.outputs()
        )));
    }
    if !matches!(model.head, Head::Regression { .. }) {
        return Err(PrivacyError::DimensionMismatch(
            "prediction needs a regression head".into(),
        ));
    }
    if let Some(r) = test.iter().flatten().find(|r| r.len() != d) {
        return Err(PrivacyError::DimensionMismatch(format!(
            "row width {} != {d}",
            r.len()
        )));
    }
    let per_seq = exec.try_map(test, |raw| {
        let rows = model.standardizer.apply_all(raw);
        let mut model_sse = 0.0;
        let mut base_sse = 0.0;
        let mut n = 0usize;
        for (inputs, targets) in next_step_chunks(&rows, window) {
            let (out, _) = sequence_forward(&model.params, &model.head, &inputs)?;
            let Outputs::PerStep(ys) = out else {
                unreachable!("regression head")
            };
            for ((y, t), x) in ys.iter().zip(&targets).zip(&inputs) {
                model_sse += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                base_sse += x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                n += t.len();
            }
        }
        Ok::<_, PrivacyError>((model_sse, base_sse, n))
    })?;
    let (m, b, n) = per_seq.iter().fold((0.0, 0.0, 0usize), |acc, x| {
        (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)
    });
    if n == 0 {
        return Err(PrivacyError::EmptyTestSet);
    }
    Ok((m / n as f64, b / n as f64))
}

/// Anything that scores a raw feature sequence against `K` classes.
pub trait SequenceClassifier: Sync {
    fn num_classes(&self) -> usize;
    fn class_scores(&self, raw_rows: &[Vec<f64>]) -> Result<Vec<f64>, PrivacyError>;
}

/// A classification-head model scoring the final `window` rows of a
/// sequence (all rows when `window` is `None`).
pub struct WindowClassifier<'a> {
    pub model: &'a Model,
    pub window: Option<usize>,
}

impl SequenceClassifier for WindowClassifier<'_> {
    fn num_classes(&self) -> usize {
        self.model.head.outputs()
    }

    fn class_scores(&self, raw_rows: &[Vec<f64>]) -> Result<Vec<f64>, PrivacyError> {
        if !matches!(self.model.head, Head::Classification { .. }) {
            return Err(PrivacyError::DimensionMismatch(
                "re-identification needs a classification head".into(),
            ));
        }
        let start = self.window.map_or(0, |w| raw_rows.len().saturating_sub(w));
        let rows = self.model.standardizer.apply_all(&raw_rows[start..]);
        let (out, _) = sequence_forward(&self.model.params, &self.model.head, &rows)?;
        match out {
            Outputs::Final(logits) => Ok(logits),
            Outputs::PerStep(_) => unreachable!("classification head"),
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Accuracy and `K x K` confusion counts (rows = true class, columns = predicted).
pub fn eval_reidentification<C: SequenceClassifier + ?Sized>(
    classifier: &C,
    test: &[(Vec<Vec<f64>>, usize)],
    exec: Exec,
) -> Result<(f64, Vec<Vec<u64>>), PrivacyError> {
    let k = classifier.num_classes();
    let distinct: BTreeSet<usize> = test.iter().map(|(_, l)| *l).collect();
    if distinct.len() < 2 {
        return Err(PrivacyError::SingleClass(distinct.len()));
    }
    if let Some(l) = distinct.iter().find(|&&l| l >= k) {
        return Err(PrivacyError::DimensionMismatch(format!(
            "label {l} outside {k} classes"
        )));
    }
    let predictions = exec.try_map(test, |(rows, _)| {
        let scores = classifier.class_scores(rows)?;
        if scores.len() != k {
            return Err(PrivacyError::DimensionMismatch(format!(
                "{} scores for {k} classes",
                scores.len()
            )));
        }
        Ok(argmax(&scores))
    })?;
    let mut confusion = vec![vec![0u64; k]; k];
    let mut correct = 0usize;
    for ((_, truth), pred) in test.iter().zip(predictions) {
        confusion[*truth][pred] += 1;
        correct += usize::from(*truth == pred);
    }
    Ok((correct as f64 / test.len() as f64, confusion))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskReport {
    pub next_step_mse: f64,
    pub baseline_mse: f64,
    pub reid_accuracy: f64,
    pub chance_level: f64,
    pub confusion: Vec<Vec<u64>>,
    pub risk_score: f64,
}

/// Re-identification accuracy rescaled so chance maps to 0 and perfect to 1.
pub fn risk_score(reid_accuracy: f64, chance_level: f64) -> f64 {
    if chance_level >= 1.0 {
        return 0.0;
    }
    ((reid_accuracy - chance_level) / (1.0 - chance_level)).clamp(0.0, 1.0)
}

pub fn build_report(
    prediction: (f64, f64),
    reid: (f64, Vec<Vec<u64>>),
    num_classes: usize,
) -> RiskReport {
    let chance_level = 1.0 / num_classes.max(1) as f64;
    RiskReport {
        next_step_mse: prediction.0,
        baseline_mse: prediction.1,
        reid_accuracy: reid.0,
        chance_level,
        risk_score: risk_score(reid.0, chance_level),
        confusion: reid.1,
    }
}

impl RiskReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PrivacyError> {
        serde_json::from_str(text).map_err(|e| PrivacyError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), PrivacyError> {
        write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }
}
