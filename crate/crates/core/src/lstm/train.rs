//! Minibatch gradient descent with global-norm clipping.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    backward, loss, sequence_forward, Gradients, Head, HeadKind, LstmError, LstmParams, Targets,
};
use crate::io::fmt_real;
use crate::par::Exec;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub grad_clip_norm: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            learning_rate: 0.1,
            epochs: 50,
            grad_clip_norm: 5.0,
            batch_size: 16,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let bad = |m: String| Err(LstmError::InvalidConfig(m));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.grad_clip_norm.is_finite() && self.grad_clip_norm > 0.0) {
            return bad(format!(
                "grad_clip_norm {} must be > 0",
                self.grad_clip_norm
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!(
                "val_fraction {} must lie in (0, 1)",
                self.val_fraction
            ));
        }
        Ok(())
    }
}

/// Input sequence with its targets. Sequences sharing a `group` (e.g. windows
/// cut from one trajectory) always land on the same side of the split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub group: u64,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Targets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Validation loss of the freshly initialized model.
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{}",
                e.epoch,
                fmt_real(e.train_loss),
                fmt_real(e.val_loss)
            );
        }
        s
    }

    pub fn final_val_loss(&self) -> f64 {
        self.epochs
            .last()
            .map_or(self.initial_val_loss, |e| e.val_loss)
    }
}

/// Validation groups for a seeded split: `round(fraction * G)` groups,
/// at least one and leaving at least one for training.
pub fn split_groups(
    groups: &[u64],
    val_fraction: f64,
    seed: u64,
) -> Result<BTreeSet<u64>, LstmError> {
    let mut distinct: Vec<u64> = groups
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if distinct.len() < 2 {
        return Err(LstmError::TooFewGroups(distinct.len()));
    }
    let n_val =
        ((val_fraction * distinct.len() as f64).round() as usize).clamp(1, distinct.len() - 1);
    distinct.shuffle(&mut seed::rng(seed::derive(seed, &[seed::tag("split")])));
    Ok(distinct.into_iter().take(n_val).collect())
}

fn validate_data(
    data: &[LabeledSequence],
    input_dim: usize,
    kind: HeadKind,
    outputs: usize,
) -> Result<(), LstmError> {
    if data.len() < 2 {
        return Err(LstmError::EmptyDataset);
    }
    for (index, s) in data.iter().enumerate() {
        let err = |message: String| Err(LstmError::DimensionMismatch { index, message });
        if s.inputs.is_empty() {
            return err("empty input sequence".into());
        }
        if let Some(x) = s.inputs.iter().find(|x| x.len() != input_dim) {
            return err(format!("input width {} != {input_dim}", x.len()));
        }
        match (&s.targets, kind) {
            (Targets::PerStep(ts), HeadKind::Regression) => {
                if ts.len() != s.inputs.len() {
                    return err(format!("{} targets for {} steps", ts.len(), s.inputs.len()));
                }
                if let Some(t) = ts.iter().find(|t| t.len() != outputs) {
                    return err(format!("target width {} != {outputs}", t.len()));
                }
            }
            (Targets::Class(k), HeadKind::Classification) => {
                if *k >= outputs {
                    return err(format!("class {k} out of range for {outputs} classes"));
                }
            }
            _ => return err("target kind does not match head".into()),
        }
    }
    Ok(())
}

fn mean_loss(
    p: &LstmParams,
    head: &Head,
    data: &[&LabeledSequence],
    exec: Exec,
) -> Result<f64, LstmError> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let losses = exec.try_map(data, |s| {
        let (out, _) = sequence_forward(p, head, &s.inputs)?;
        loss(&out, &s.targets)
    })?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// The weights training starts from for this configuration.
pub fn initial_weights(
    input_dim: usize,
    kind: HeadKind,
    outputs: usize,
    cfg: &TrainConfig,
) -> (LstmParams, Head) {
    let mut rng = seed::rng(seed::derive(cfg.seed, &[seed::tag("init")]));
    let params = LstmParams::init(input_dim, cfg.hidden_dim, &mut rng);
    let head = Head::init(kind, outputs, cfg.hidden_dim, &mut rng);
    (params, head)
}

pub fn train(
    data: &[LabeledSequence],
    input_dim: usize,
    kind: HeadKind,
    outputs: usize,
    cfg: &TrainConfig,
) -> Result<(LstmParams, Head, TrainLog), LstmError> {
    train_with(data, input_dim, kind, outputs, cfg, Exec::default())
}

/// Trains from a seeded initialization. Per-sequence gradients may be
/// computed in parallel; they are always summed in batch order.
pub fn train_with(
    data: &[LabeledSequence],
    input_dim: usize,
    kind: HeadKind,
    outputs: usize,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(LstmParams, Head, TrainLog), LstmError> {
    cfg.validate()?;
    if input_dim == 0 || outputs == 0 {
        return Err(LstmError::InvalidConfig(
            "input and output widths must be positive".into(),
        ));
    }
    validate_data(data, input_dim, kind, outputs)?;
    let groups: Vec<u64> = data.iter().map(|s| s.group).collect();
    let val_groups = split_groups(&groups, cfg.val_fraction, cfg.seed)?;
    let (val, train): (Vec<&LabeledSequence>, Vec<&LabeledSequence>) =
        data.iter().partition(|s| val_groups.contains(&s.group));

    let (mut params, mut head) = initial_weights(input_dim, kind, outputs, cfg);

    let initial_val_loss = mean_loss(&params, &head, &val, exec)?;
    let mut log = TrainLog {
        initial_val_loss,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = seed::rng(seed::derive(
            cfg.seed,
            &[seed::tag("shuffle"), epoch as u64],
        ));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = exec.try_map(batch, |&i| {
                let s = train[i];
                let (out, caches) = sequence_forward(&params, &head, &s.inputs)?;
                let l = loss(&out, &s.targets)?;
                Ok::<_, LstmError>((l, backward(&params, &head, &caches, &s.targets)?))
            })?;
            let mut grad = Gradients::zeros_like(&params, &head);
            for (l, g) in &results {
                loss_sum += l;
                grad.add_assign(g);
            }
            grad.scale(1.0 / batch.len() as f64);
            let norm = grad.norm();
            let step = if norm > cfg.grad_clip_norm {
                cfg.learning_rate * cfg.grad_clip_norm / norm
            } else {
                cfg.learning_rate
            };
            apply_update(&mut params, &mut head, &grad, step);
        }
        let val_loss = mean_loss(&params, &head, &val, exec)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
        });
    }
    Ok((params, head, log))
}

fn apply_update(params: &mut LstmParams, head: &mut Head, grad: &Gradients, step: f64) {
    let (hw, hb) = head.weights_mut();
    let mut targets: Vec<&mut [f64]> = params.tensors_mut().into_iter().collect();
    targets.push(hw.as_mut_slice());
    targets.push(hb.as_mut_slice());
    for (p, g) in targets.into_iter().zip(grad.slices()) {
        for (w, d) in p.iter_mut().zip(g) {
            *w -= step * d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_target_set() -> Vec<LabeledSequence> {
        (0..8)
            .map(|g| {
                let inputs: Vec<Vec<f64>> = (0..10)
                    .map(|k| vec![((g * 10 + k) as f64 * 0.37).sin(), 0.2])
                    .collect();
                let targets = Targets::PerStep(vec![vec![0.8, -0.4]; 10]);
                LabeledSequence {
                    group: g,
                    inputs,
                    targets,
                }
            })
            .collect()
    }

    #[test]
    fn constant_target_is_learned() {
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 2,
            learning_rate: 0.2,
            hidden_dim: 4,
            ..Default::default()
        };
        let (_, _, log) = train(&constant_target_set(), 2, HeadKind::Regression, 2, &cfg).unwrap();
        let first = log.epochs[0].train_loss;
        let last = log.epochs.last().unwrap().train_loss;
        assert!(last < 0.01 * first, "{first} -> {last}");
        assert_eq!(log.epochs.len(), 200);
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = constant_target_set();
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            hidden_dim: 3,
            ..Default::default()
        };
        let (p0, h0, _) = train(
            &data,
            2,
            HeadKind::Regression,
            2,
            &TrainConfig {
                epochs: 1,
                ..cfg.clone()
            },
        )
        .unwrap();
        let (p1, h1, log) = train(&data, 2, HeadKind::Regression, 2, &cfg).unwrap();
        assert_eq!(p0, p1);
        assert_eq!(h0, h1);
        assert!(log
            .epochs
            .iter()
            .all(|e| e.val_loss == log.initial_val_loss));
    }

    #[test]
    fn training_is_deterministic_across_exec_modes() {
        let data = constant_target_set();
        let cfg = TrainConfig {
            epochs: 5,
            hidden_dim: 3,
            seed: 4,
            ..Default::default()
        };
        let a = train_with(&data, 2, HeadKind::Regression, 2, &cfg, Exec::Sequential).unwrap();
        let b = train_with(&data, 2, HeadKind::Regression, 2, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.2.to_csv(), b.2.to_csv());
    }

    #[test]
    fn rejects_bad_datasets() {
        let data = constant_target_set();
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&data[..1], 2, HeadKind::Regression, 2, &cfg),
            Err(LstmError::EmptyDataset)
        ));
        assert!(matches!(
            train(&data, 3, HeadKind::Regression, 2, &cfg),
            Err(LstmError::DimensionMismatch { index: 0, .. })
        ));
        assert!(train(&data, 2, HeadKind::Classification, 2, &cfg).is_err());
        let mut same_group = data.clone();
        same_group.iter_mut().for_each(|s| s.group = 0);
        assert!(matches!(
            train(&same_group, 2, HeadKind::Regression, 2, &cfg),
            Err(LstmError::TooFewGroups(1))
        ));
        let bad = TrainConfig {
            val_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            train(&data, 2, HeadKind::Regression, 2, &bad),
            Err(LstmError::InvalidConfig(_))
        ));
    }

    #[test]
    fn split_keeps_both_sides_nonempty() {
        let groups: Vec<u64> = (0..10).collect();
        assert_eq!(split_groups(&groups, 0.2, 1).unwrap().len(), 2);
        assert_eq!(split_groups(&groups, 0.01, 1).unwrap().len(), 1);
        assert_eq!(split_groups(&groups, 0.99, 1).unwrap().len(), 9);
        assert_eq!(
            split_groups(&groups, 0.3, 1).unwrap(),
            split_groups(&groups, 0.3, 1).unwrap()
        );
    }

    #[test]
    fn log_csv_has_one_row_per_epoch() {
        let cfg = TrainConfig {
            epochs: 4,
            hidden_dim: 2,
            ..Default::default()
        };
        let (_, _, log) = train(&constant_target_set(), 2, HeadKind::Regression, 2, &cfg).unwrap();
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,val_loss");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("4,"));
    }
}
