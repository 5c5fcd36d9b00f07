//! Trajectory features: distance traveled, coverage, decision points reached,
//! positional curvature and head rotation amount.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{quat_angle_between, signed_plane_angle};
use crate::maze::{decision_points, Cell, DecisionPointSet, MazeGrid};
use crate::telemetry::Trajectory;

/// Width of one model input row: `[dp_x, dp_z, curvature, rotation]`.
pub const MODEL_INPUT_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("trajectory has {found} frames, need at least {needed}")]
    TooShort { needed: usize, found: usize },
    #[error("invalid cell size {0}")]
    InvalidCellSize(f64),
}

/// Per-frame series. `curvature` has `N-2` entries, `rotation_amount` `N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub curvature: Vec<f64>,
    pub rotation_amount: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub distance_traveled: f64,
    pub coverage: usize,
    pub decision_points_reached: usize,
    pub mean_abs_curvature: f64,
    pub total_rotation: f64,
}

pub fn distance_traveled(t: &Trajectory) -> f64 {
    t.frames()
        .windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .sum()
}

fn visited_cells(t: &Trajectory, cell_size: f64) -> HashSet<(i64, i64)> {
    t.positions()
        .map(|p| {
            (
                (p.x / cell_size).floor() as i64,
                (p.z / cell_size).floor() as i64,
            )
        })
        .collect()
}

/// Distinct ground cells (x–z quantization at `cell_size`) touched by any frame.
pub fn coverage(t: &Trajectory, cell_size: f64) -> Result<usize, FeatureError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(FeatureError::InvalidCellSize(cell_size));
    }
    Ok(visited_cells(t, cell_size).len())
}

/// Distinct decision-point cells occupied by at least one frame.
pub fn decision_points_reached(t: &Trajectory, m: &MazeGrid) -> usize {
    decision_points_reached_in(t, m, &decision_points(m))
}

pub fn decision_points_reached_in(t: &Trajectory, m: &MazeGrid, dps: &DecisionPointSet) -> usize {
    let hit: HashSet<Cell> = t.positions().filter_map(|p| m.cell_at(p)).collect();
    dps.cells.iter().filter(|c| hit.contains(c)).count()
}

/// Signed turn between consecutive displacement vectors.
///
/// Entry `k` compares `p[k+1]-p[k]` with `p[k+2]-p[k+1]`; entries whose
/// displacements are too short to have a direction are 0.
pub fn curvature_series(t: &Trajectory) -> Result<Vec<f64>, FeatureError> {
    let f = t.frames();
    if f.len() < 3 {
        return Err(FeatureError::TooShort {
            needed: 3,
            found: f.len(),
        });
    }
    Ok(f.windows(3)
        .map(|w| {
            let u = w[1].position - w[0].position;
            let v = w[2].position - w[1].position;
            signed_plane_angle(u, v).unwrap_or(0.0)
        })
        .collect())
}

/// Unsigned head rotation between consecutive orientations.
pub fn rotation_series(t: &Trajectory) -> Result<Vec<f64>, FeatureError> {
    let f = t.frames();
    if f.len() < 2 {
        return Err(FeatureError::TooShort {
            needed: 2,
            found: f.len(),
        });
    }
    Ok(f.windows(2)
        .map(|w| quat_angle_between(&w[0].head_rotation, &w[1].head_rotation))
        .collect())
}

pub fn series(t: &Trajectory) -> Result<FeatureSeries, FeatureError> {
    Ok(FeatureSeries {
        curvature: curvature_series(t)?,
        rotation_amount: rotation_series(t)?,
    })
}

pub fn summarize(t: &Trajectory, m: &MazeGrid) -> Result<FeatureSummary, FeatureError> {
    summarize_with(t, m, &decision_points(m))
}

/// [`summarize`] with a precomputed decision-point set.
pub fn summarize_with(
    t: &Trajectory,
    m: &MazeGrid,
    dps: &DecisionPointSet,
) -> Result<FeatureSummary, FeatureError> {
    let curvature = if t.len() >= 3 {
        curvature_series(t)?
    } else {
        Vec::new()
    };
    let rotation = if t.len() >= 2 {
        rotation_series(t)?
    } else {
        Vec::new()
    };
    let mean_abs_curvature = if curvature.is_empty() {
        0.0
    } else {
        curvature.iter().map(|c| c.abs()).sum::<f64>() / curvature.len() as f64
    };
    Ok(FeatureSummary {
        distance_traveled: distance_traveled(t),
        coverage: coverage(t, m.cell_size())?,
        decision_points_reached: decision_points_reached_in(t, m, dps),
        mean_abs_curvature,
        total_rotation: rotation.iter().sum(),
    })
}

/// Raw (unstandardized) model rows: row `k` is
/// `[dp_x, dp_z, curvature_k, rotation_k]` with `dp = p[k+1] - p[k]`,
/// for `k = 0..N-2`.
pub fn to_model_sequence(t: &Trajectory) -> Result<Vec<[f64; MODEL_INPUT_DIM]>, FeatureError> {
    let curvature = curvature_series(t)?;
    let rotation = rotation_series(t)?;
    let f = t.frames();
    Ok(curvature
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let d = f[k + 1].position - f[k].position;
            [d.x, d.z, c, rotation[k]]
        })
        .collect())
}

/// Per-column mean and standard deviation, fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population moments over every row of every sequence. Columns with no
    /// spread get `std = 1`.
    pub fn fit<'a, I, R>(rows: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a R>,
        R: AsRef<[f64]> + 'a + ?Sized,
    {
        let mut n = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        // Welford, one pass
        for row in rows {
            let row = row.as_ref();
            if mean.is_empty() {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            }
            n += 1;
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                mean[j] += d / n as f64;
                m2[j] += d * (v - mean[j]);
            }
        }
        if n == 0 {
            return None;
        }
        let std = m2
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Some(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all<R: AsRef<[f64]>>(&self, rows: &[R]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r.as_ref())).collect()
    }
}
