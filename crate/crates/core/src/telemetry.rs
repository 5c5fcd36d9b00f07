//! Telemetry records and the trajectory CSV format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, UnitQuaternion, Vec3};
use crate::io;

pub const TRAJECTORY_HEADER: &str = "frame,t,px,py,pz,qw,qx,qy,qz";

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("trajectory has no frames")]
    Empty,
    #[error("frame index {found} at position {position}; indices must be contiguous from 0")]
    NonContiguous { position: usize, found: usize },
    #[error("timestamp at frame {0} does not strictly increase")]
    NonIncreasingTime(usize),
    #[error("invalid timestamp at frame {0}")]
    InvalidTime(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("trajectory csv line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub frame_index: usize,
    pub t: f64,
    pub position: Vec3,
    pub head_rotation: UnitQuaternion,
}

/// One navigation session of one subject in one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    subject_id: String,
    condition_id: String,
    frames: Vec<TrajectoryFrame>,
}

impl Trajectory {
    pub fn new(
        subject_id: impl Into<String>,
        condition_id: impl Into<String>,
        frames: Vec<TrajectoryFrame>,
    ) -> Result<Self, TelemetryError> {
        if frames.is_empty() {
            return Err(TelemetryError::Empty);
        }
        for (k, f) in frames.iter().enumerate() {
            if f.frame_index != k {
                return Err(TelemetryError::NonContiguous {
                    position: k,
                    found: f.frame_index,
                });
            }
            if !(f.t.is_finite() && f.t >= 0.0) {
                return Err(TelemetryError::InvalidTime(k));
            }
            if !f.position.is_finite() {
                return Err(GeometryError::NonFinite("position").into());
            }
            if k > 0 && f.t <= frames[k - 1].t {
                return Err(TelemetryError::NonIncreasingTime(k));
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            condition_id: condition_id.into(),
            frames,
        })
    }

    /// Builds frames from parallel position/orientation lists sampled at a fixed rate.
    pub fn from_samples(
        subject_id: impl Into<String>,
        condition_id: impl Into<String>,
        dt: f64,
        samples: impl IntoIterator<Item = (Vec3, UnitQuaternion)>,
    ) -> Result<Self, TelemetryError> {
        let frames = samples
            .into_iter()
            .enumerate()
            .map(|(k, (position, head_rotation))| TrajectoryFrame {
                frame_index: k,
                t: k as f64 * dt,
                position,
                head_rotation,
            })
            .collect();
        Self::new(subject_id, condition_id, frames)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn condition_id(&self) -> &str {
        &self.condition_id
    }

    pub fn frames(&self) -> &[TrajectoryFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.frames.iter().map(|f| f.position)
    }

    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t) - self.frames[0].t
    }

    pub fn relabel(self, subject_id: impl Into<String>, condition_id: impl Into<String>) -> Self {
        Trajectory {
            subject_id: subject_id.into(),
            condition_id: condition_id.into(),
            ..self
        }
    }

    /// Applies `f` to every position, keeping timing and orientation.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Trajectory {
        let frames = self
            .frames
            .iter()
            .map(|fr| TrajectoryFrame {
                position: f(fr.position),
                ..*fr
            })
            .collect();
        Trajectory {
            frames,
            ..self.clone()
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.frames.len() * 200);
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for f in &self.frames {
            let [qw, qx, qy, qz] = f.head_rotation.components();
            let _ = write!(out, "{}", f.frame_index);
            for v in [
                f.t,
                f.position.x,
                f.position.y,
                f.position.z,
                qw,
                qx,
                qy,
                qz,
            ] {
                out.push(',');
                out.push_str(&io::fmt_real(v));
            }
            out.push('\n');
        }
        out
    }

    /// Parses a trajectory CSV. Labels are not stored in the file and are supplied by the caller.
    pub fn from_csv_str(
        text: &str,
        subject_id: impl Into<String>,
        condition_id: impl Into<String>,
    ) -> Result<Self, TelemetryError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
            _ => {
                return Err(TelemetryError::Parse {
                    line: 1,
                    message: format!("expected header `{TRAJECTORY_HEADER}`"),
                })
            }
        }
        let mut frames = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| TelemetryError::Parse {
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(err(format!("expected 9 columns, found {}", cols.len())));
            }
            let frame_index: usize = cols[0]
                .trim()
                .parse()
                .map_err(|e| err(format!("frame: {e}")))?;
            let mut vals = [0.0f64; 8];
            for (slot, c) in vals.iter_mut().zip(&cols[1..]) {
                *slot = c.trim().parse().map_err(|e| err(format!("`{c}`: {e}")))?;
            }
            let [t, px, py, pz, qw, qx, qy, qz] = vals;
            frames.push(TrajectoryFrame {
                frame_index,
                t,
                position: Vec3::try_new(px, py, pz)?,
                head_rotation: UnitQuaternion::new(qw, qx, qy, qz)?,
            });
        }
        Self::new(subject_id, condition_id, frames)
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), TelemetryError> {
        io::write_atomic(path, self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn load_csv(
        path: &Path,
        subject_id: impl Into<String>,
        condition_id: impl Into<String>,
    ) -> Result<Self, TelemetryError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, subject_id, condition_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(k: usize, t: f64) -> TrajectoryFrame {
        TrajectoryFrame {
            frame_index: k,
            t,
            position: Vec3::new(k as f64, 0.0, 0.0),
            head_rotation: UnitQuaternion::IDENTITY,
        }
    }

    #[test]
    fn rejects_invalid_frame_sequences() {
        assert!(matches!(
            Trajectory::new("s", "c", vec![]),
            Err(TelemetryError::Empty)
        ));
        assert!(matches!(
            Trajectory::new("s", "c", vec![frame(0, 0.0), frame(2, 1.0)]),
            Err(TelemetryError::NonContiguous {
                position: 1,
                found: 2
            })
        ));
        assert!(matches!(
            Trajectory::new("s", "c", vec![frame(0, 0.5), frame(1, 0.5)]),
            Err(TelemetryError::NonIncreasingTime(1))
        ));
        assert!(matches!(
            Trajectory::new("s", "c", vec![frame(0, -1.0)]),
            Err(TelemetryError::InvalidTime(0))
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let samples = (0..20).map(|k| {
            let a = k as f64 * 0.137;
            (
                Vec3::new(a.sin() * 3.1, 0.0, a.cos() / 7.0),
                UnitQuaternion::from_yaw(a * 1.3),
            )
        });
        let t = Trajectory::from_samples("p", "c", 1.0 / 30.0, samples).unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("frame,t,px,py,pz,qw,qx,qy,qz\n"));
        let back = Trajectory::from_csv_str(&text, "p", "c").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_reports_line_numbers() {
        let text = format!("{TRAJECTORY_HEADER}\n0,0,0,0,0,1,0,0,0\n1,0.1,0,0,zz,1,0,0,0\n");
        match Trajectory::from_csv_str(&text, "s", "c") {
            Err(TelemetryError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Trajectory::from_csv_str("frame,t\n", "s", "c").is_err());
    }
}
