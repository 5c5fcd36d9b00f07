//! Cohort-level learning tasks: next-step prediction and profile
//! re-identification, trained on some runs and scored on held-out runs.

use serde::{Deserialize, Serialize};

use crate::features::{to_model_sequence, FeatureError, Standardizer, MODEL_INPUT_DIM};
use crate::lstm::{
    initial_weights, split_groups, train_with, HeadKind, LabeledSequence, LstmError, Model,
    Targets, TrainConfig, TrainLog,
};
use crate::par::Exec;
use crate::privacy::{
    classification_windows, eval_prediction, eval_reidentification, next_step_chunks, PrivacyError,
    WindowClassifier,
};
use crate::telemetry::Trajectory;

/// One trajectory reduced to model input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub subject: usize,
    pub run: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Sample {
    pub fn from_trajectory(
        t: &Trajectory,
        subject: usize,
        run: usize,
    ) -> Result<Self, FeatureError> {
        let rows = to_model_sequence(t)?
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        Ok(Self { subject, run, rows })
    }
}

/// Training settings for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Steps per training window.
    pub window: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub grad_clip_norm: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
}

impl TaskConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.hidden_dim,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            grad_clip_norm: self.grad_clip_norm,
            batch_size: self.batch_size,
            val_fraction: self.val_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        if self.window == 0 {
            return Err(LstmError::InvalidConfig("window must be at least 1".into()));
        }
        self.train_config(0).validate()
    }
}

/// Fits the standardizer on the samples that will be used for gradient
/// steps, i.e. excluding the validation split `train_with` will carve out.
fn fit_on_training_side(samples: &[&Sample], cfg: &TrainConfig) -> Result<Standardizer, LstmError> {
    let groups: Vec<u64> = (0..samples.len() as u64).collect();
    let val = split_groups(&groups, cfg.val_fraction, cfg.seed)?;
    let rows = samples
        .iter()
        .enumerate()
        .filter(|(g, _)| !val.contains(&(*g as u64)))
        .flat_map(|(_, s)| s.rows.iter());
    Standardizer::fit(rows).ok_or(LstmError::EmptyDataset)
}

pub fn prediction_dataset(
    samples: &[&Sample],
    standardizer: &Standardizer,
    window: usize,
) -> Vec<LabeledSequence> {
    samples
        .iter()
        .enumerate()
        .flat_map(|(g, s)| {
            next_step_chunks(&standardizer.apply_all(&s.rows), Some(window))
                .into_iter()
                .map(move |(inputs, targets)| LabeledSequence {
                    group: g as u64,
                    inputs,
                    targets: Targets::PerStep(targets),
                })
        })
        .collect()
}

pub fn reid_dataset(
    samples: &[&Sample],
    standardizer: &Standardizer,
    window: usize,
) -> Vec<LabeledSequence> {
    samples
        .iter()
        .enumerate()
        .flat_map(|(g, s)| {
            classification_windows(&standardizer.apply_all(&s.rows), window)
                .into_iter()
                .map(move |inputs| LabeledSequence {
                    group: g as u64,
                    inputs,
                    targets: Targets::Class(s.subject),
                })
        })
        .collect()
}

/// Trains a next-step regressor. Returns the trained model, the model it
/// started from and the log.
pub fn train_predictor(
    samples: &[&Sample],
    task: &TaskConfig,
    seed: u64,
    exec: Exec,
) -> Result<(Model, Model, TrainLog), LstmError> {
    task.validate()?;
    let cfg = task.train_config(seed);
    let standardizer = fit_on_training_side(samples, &cfg)?;
    let data = prediction_dataset(samples, &standardizer, task.window);
    let d = MODEL_INPUT_DIM;
    let (params, head, log) = train_with(&data, d, HeadKind::Regression, d, &cfg, exec)?;
    let (p0, h0) = initial_weights(d, HeadKind::Regression, d, &cfg);
    let initial = Model {
        params: p0,
        head: h0,
        standardizer: standardizer.clone(),
    };
    Ok((
        Model {
            params,
            head,
            standardizer,
        },
        initial,
        log,
    ))
}

/// Trains a `num_classes`-way profile classifier on fixed windows.
pub fn train_reidentifier(
    samples: &[&Sample],
    num_classes: usize,
    task: &TaskConfig,
    seed: u64,
    exec: Exec,
) -> Result<(Model, TrainLog), PrivacyError> {
    task.validate()?;
    let distinct: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.subject).collect();
    if distinct.len() < 2 {
        return Err(PrivacyError::SingleClass(distinct.len()));
    }
    let cfg = task.train_config(seed);
    let standardizer = fit_on_training_side(samples, &cfg)?;
    let data = reid_dataset(samples, &standardizer, task.window);
    let (params, head, log) = train_with(
        &data,
        MODEL_INPUT_DIM,
        HeadKind::Classification,
        num_classes,
        &cfg,
        exec,
    )?;
    Ok((
        Model {
            params,
            head,
            standardizer,
        },
        log,
    ))
}

pub fn evaluate_predictor(
    model: &Model,
    test: &[&Sample],
    window: usize,
    exec: Exec,
) -> Result<(f64, f64), PrivacyError> {
    let rows: Vec<Vec<Vec<f64>>> = test.iter().map(|s| s.rows.clone()).collect();
    eval_prediction(model, &rows, Some(window), exec)
}

pub fn evaluate_reidentifier(
    model: &Model,
    test: &[&Sample],
    window: usize,
    exec: Exec,
) -> Result<(f64, Vec<Vec<u64>>), PrivacyError> {
    let labeled: Vec<(Vec<Vec<f64>>, usize)> =
        test.iter().map(|s| (s.rows.clone(), s.subject)).collect();
    eval_reidentification(
        &WindowClassifier {
            model,
            window: Some(window),
        },
        &labeled,
        exec,
    )
}
