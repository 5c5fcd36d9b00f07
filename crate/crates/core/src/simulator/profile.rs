use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigationPolicy {
    /// Keeps the right hand on the wall.
    WallFollower,
    /// Depth-first exploration that recalls explored branches at each
    /// junction with probability `memory_fidelity`.
    MemoryBacktracker,
    /// Uniform choice among onward passages at every cell.
    RandomTurner,
}

impl FromStr for NavigationPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wall_follower" => Ok(Self::WallFollower),
            "memory_backtracker" => Ok(Self::MemoryBacktracker),
            "random_turner" => Ok(Self::RandomTurner),
            other => Err(format!("unknown navigation policy `{other}`")),
        }
    }
}

impl fmt::Display for NavigationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WallFollower => "wall_follower",
            Self::MemoryBacktracker => "memory_backtracker",
            Self::RandomTurner => "random_turner",
        })
    }
}

/// Behavioral parameters of one synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentProfile {
    pub profile_id: String,
    pub policy: NavigationPolicy,
    /// m/s
    pub speed_mean: f64,
    /// Half-width of the uniform per-frame speed perturbation, m/s.
    pub speed_jitter: f64,
    /// Body heading slew limit, rad/s.
    pub turn_rate: f64,
    /// Head yaw sweep amplitude, rad.
    pub scan_amplitude: f64,
    /// Hz
    pub scan_frequency: f64,
    pub memory_fidelity: f64,
    /// Hz
    pub frame_rate: f64,
}

impl AgentProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field: &'static str, value: f64| Err(SimError::InvalidProfile { field, value });
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if self.profile_id.is_empty() || self.profile_id.contains([',', '/', '\n']) {
            return Err(SimError::InvalidProfileId(self.profile_id.clone()));
        }
        if !finite_pos(self.speed_mean) {
            return bad("speed_mean", self.speed_mean);
        }
        if !finite_nonneg(self.speed_jitter) {
            return bad("speed_jitter", self.speed_jitter);
        }
        if !finite_pos(self.turn_rate) {
            return bad("turn_rate", self.turn_rate);
        }
        if !finite_nonneg(self.scan_amplitude) {
            return bad("scan_amplitude", self.scan_amplitude);
        }
        if !finite_nonneg(self.scan_frequency) {
            return bad("scan_frequency", self.scan_frequency);
        }
        if !(0.0..=1.0).contains(&self.memory_fidelity) {
            return bad("memory_fidelity", self.memory_fidelity);
        }
        if !finite_pos(self.frame_rate) {
            return bad("frame_rate", self.frame_rate);
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// The four shipped profiles.
    pub fn defaults() -> Vec<AgentProfile> {
        vec![
            AgentProfile {
                profile_id: "cautious_scanner".into(),
                policy: NavigationPolicy::MemoryBacktracker,
                speed_mean: 0.8,
                speed_jitter: 0.1,
                turn_rate: 8.0,
                scan_amplitude: 0.6,
                scan_frequency: 0.5,
                memory_fidelity: 0.9,
                frame_rate: 30.0,
            },
            AgentProfile {
                profile_id: "confident_runner".into(),
                policy: NavigationPolicy::MemoryBacktracker,
                speed_mean: 1.6,
                speed_jitter: 0.15,
                turn_rate: 12.0,
                scan_amplitude: 0.1,
                scan_frequency: 0.2,
                memory_fidelity: 1.0,
                frame_rate: 30.0,
            },
            AgentProfile {
                profile_id: "wanderer".into(),
                policy: NavigationPolicy::MemoryBacktracker,
                speed_mean: 1.1,
                speed_jitter: 0.3,
                turn_rate: 10.0,
                scan_amplitude: 0.3,
                scan_frequency: 0.3,
                memory_fidelity: 0.2,
                frame_rate: 30.0,
            },
            AgentProfile {
                profile_id: "methodical_wall_follower".into(),
                policy: NavigationPolicy::WallFollower,
                speed_mean: 1.0,
                speed_jitter: 0.05,
                turn_rate: 8.0,
                scan_amplitude: 0.2,
                scan_frequency: 1.0,
                memory_fidelity: 1.0,
                frame_rate: 30.0,
            },
        ]
    }
}
