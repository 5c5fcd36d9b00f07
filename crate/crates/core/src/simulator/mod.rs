//! Synthetic subjects: agents that walk mazes and emit head-tracked telemetry.

mod path;
mod profile;
mod walk;

pub use path::{heading_yaw, CorridorPath, CORNER_RADIUS, UTURN_RADIUS};
pub use profile::{AgentProfile, NavigationPolicy};
pub use walk::walk;

use std::f64::consts::TAU;

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::UnitQuaternion;
use crate::maze::{ConditionMatrix, MazeError, MazeGrid};
use crate::par::Exec;
use crate::seed;
use crate::telemetry::{TelemetryError, Trajectory, TrajectoryFrame};

/// Head-noise standard deviation as a fraction of `scan_amplitude`; a
/// non-scanning agent holds its head perfectly still relative to its body.
pub const HEAD_NOISE_RATIO: f64 = 0.1;

/// Lower bound on the jittered speed, as a fraction of `speed_mean`.
const MIN_SPEED_RATIO: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid profile: {field} = {value}")]
    InvalidProfile { field: &'static str, value: f64 },
    #[error("invalid profile id `{0}`")]
    InvalidProfileId(String),
    #[error("max_frames must be at least 2, got {0}")]
    TooFewFrames(usize),
    #[error("cohort needs at least one profile and one run per cell")]
    EmptyCohort,
    #[error("duplicate profile id `{0}`")]
    DuplicateProfile(String),
    #[error(transparent)]
    Maze(#[from] MazeError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}

/// Drives one agent from the maze start until it reaches the goal center or
/// `max_frames` frames have been recorded.
pub fn simulate(
    m: &MazeGrid,
    profile: &AgentProfile,
    policy: NavigationPolicy,
    seed: u64,
    max_frames: usize,
) -> Result<Trajectory, SimError> {
    profile.validate()?;
    if max_frames < 2 {
        return Err(SimError::TooFewFrames(max_frames));
    }
    let dt = profile.dt();
    let mut walk_rng = seed::rng(seed::derive(seed, &[seed::tag("walk")]));
    let mut turn_rng = seed::rng(seed::derive(seed, &[seed::tag("uturn")]));
    let mut motion_rng = seed::rng(seed::derive(seed, &[seed::tag("motion")]));
    let mut head_rng = seed::rng(seed::derive(seed, &[seed::tag("head")]));

    // every move covers at least ~0.85 cells of path, so this never starves the clock
    let max_reach = max_frames as f64 * dt * (profile.speed_mean + profile.speed_jitter);
    let max_moves = (max_reach / (0.8 * m.cell_size())).ceil() as usize + 4;
    let route = walk(m, policy, profile.memory_fidelity, max_moves, &mut walk_rng);
    let path = CorridorPath::from_route(m, &route, || turn_rng.gen::<bool>());
    let total = path.length();

    let phase = head_rng.gen::<f64>() * TAU;
    let noise_sd = HEAD_NOISE_RATIO * profile.scan_amplitude;
    let mut frames = Vec::with_capacity(max_frames.min(1 << 16));
    let mut s = 0.0f64;
    for k in 0..max_frames {
        if k > 0 {
            if s >= total {
                break;
            }
            let jitter = if profile.speed_jitter > 0.0 {
                profile.speed_jitter * motion_rng.gen_range(-1.0..=1.0)
            } else {
                0.0
            };
            let v = (profile.speed_mean + jitter).max(MIN_SPEED_RATIO * profile.speed_mean);
            s = advance(&path, s, v, profile.turn_rate, dt);
        }
        let t = k as f64 / profile.frame_rate;
        let (position, heading) = path.pose(s);
        let scan = profile.scan_amplitude * (TAU * profile.scan_frequency * t + phase).sin();
        let noise = if noise_sd > 0.0 {
            noise_sd * head_rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        frames.push(TrajectoryFrame {
            frame_index: k,
            t,
            position,
            head_rotation: UnitQuaternion::from_yaw(heading_yaw(heading) + scan + noise),
        });
    }
    Ok(Trajectory::new(profile.profile_id.clone(), "", frames)?)
}

/// Moves `dt` seconds along the path at speed `v`, slowing on arcs so the
/// heading never turns faster than `turn_rate`.
fn advance(path: &CorridorPath, mut s: f64, v: f64, turn_rate: f64, dt: f64) -> f64 {
    let total = path.length();
    let mut budget = dt;
    let mut guard = 0;
    while budget > 0.0 && s < total && guard < 64 {
        guard += 1;
        let (radius, remaining) = path.radius_at(s);
        let speed = v.min(turn_rate * radius);
        let reach = speed * budget;
        if reach < remaining {
            s += reach;
            break;
        }
        s += remaining;
        budget -= remaining / speed;
        if remaining == 0.0 {
            // landed exactly on a boundary that locate() resolved backwards
            s = f64::from_bits(s.to_bits() + 1).min(total);
        }
    }
    s.min(total)
}

/// Number of frames that sit outside the maze or crossed a wall since the
/// previous frame.
pub fn wall_violations(m: &MazeGrid, t: &Trajectory) -> usize {
    let mut bad = 0;
    let mut prev = None;
    for p in t.positions() {
        match m.cell_at(p) {
            None => {
                bad += 1;
                prev = None;
            }
            Some(c) => {
                if let Some(pc) = prev {
                    if pc != c && !m.is_open(pc, c) {
                        bad += 1;
                    }
                }
                prev = Some(c);
            }
        }
    }
    bad
}

/// One simulated session inside a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortRun {
    pub run: usize,
    pub seed: u64,
    pub trajectory: Trajectory,
}

pub fn run_seed(seed: u64, profile_id: &str, condition_id: &str, run: usize) -> u64 {
    seed::derive(
        seed,
        &[
            seed::tag("run"),
            seed::tag(profile_id),
            seed::tag(condition_id),
            run as u64,
        ],
    )
}

/// Every profile in every condition, `runs_per_cell` times, in
/// `(profile, condition, run)` order.
pub fn generate_cohort(
    matrix: &ConditionMatrix,
    profiles: &[AgentProfile],
    runs_per_cell: usize,
    max_frames: usize,
    seed: u64,
) -> Result<Vec<CohortRun>, SimError> {
    generate_cohort_with(
        matrix,
        profiles,
        runs_per_cell,
        max_frames,
        seed,
        Exec::default(),
    )
}

pub fn generate_cohort_with(
    matrix: &ConditionMatrix,
    profiles: &[AgentProfile],
    runs_per_cell: usize,
    max_frames: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<CohortRun>, SimError> {
    if profiles.is_empty() || runs_per_cell == 0 {
        return Err(SimError::EmptyCohort);
    }
    for (i, p) in profiles.iter().enumerate() {
        p.validate()?;
        if profiles[..i].iter().any(|q| q.profile_id == p.profile_id) {
            return Err(SimError::DuplicateProfile(p.profile_id.clone()));
        }
    }
    let conditions = matrix.conditions();
    let mazes = conditions
        .iter()
        .map(|&c| matrix.maze(seed, c))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..profiles.len())
        .flat_map(|p| {
            (0..conditions.len()).flat_map(move |c| (0..runs_per_cell).map(move |r| (p, c, r)))
        })
        .collect();
    exec.try_map(&jobs, |&(p, c, run)| {
        let profile = &profiles[p];
        let cond_id = conditions[c].id();
        let run_seed = run_seed(seed, &profile.profile_id, &cond_id, run);
        let t = simulate(&mazes[c], profile, profile.policy, run_seed, max_frames)?;
        Ok(CohortRun {
            run,
            seed: run_seed,
            trajectory: t.relabel(profile.profile_id.clone(), cond_id),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{curvature_series, distance_traveled, rotation_series};
    use crate::maze::{generate_maze, Branching, Cell, Edge};

    /// `len` cells in a row along `x`, goal at the far end.
    pub(crate) fn straight_corridor(len: usize) -> MazeGrid {
        let edges = (0..len - 1).map(|x| Edge::new(Cell::new(x, 0), Cell::new(x + 1, 0)));
        MazeGrid::new(len, 1, 1.0, Cell::new(0, 0), Cell::new(len - 1, 0), edges).unwrap()
    }

    fn steady(scan_amplitude: f64) -> AgentProfile {
        AgentProfile {
            profile_id: "steady".into(),
            policy: NavigationPolicy::MemoryBacktracker,
            speed_mean: 1.0,
            speed_jitter: 0.0,
            turn_rate: 5.0,
            scan_amplitude,
            scan_frequency: 0.5,
            memory_fidelity: 1.0,
            frame_rate: 10.0,
        }
    }

    #[test]
    fn straight_run_without_scan_is_flat() {
        let m = straight_corridor(20);
        let t = simulate(&m, &steady(0.0), NavigationPolicy::WallFollower, 3, 100).unwrap();
        assert_eq!(t.len(), 100);
        assert!(rotation_series(&t).unwrap().iter().all(|&r| r == 0.0));
        assert!(curvature_series(&t).unwrap().iter().all(|&c| c == 0.0));
        assert!((distance_traveled(&t) - 9.9).abs() < 1e-9);
    }

    #[test]
    fn stops_at_goal_center() {
        let m = straight_corridor(4);
        let t = simulate(&m, &steady(0.3), NavigationPolicy::RandomTurner, 3, 1000).unwrap();
        let last = t.frames().last().unwrap().position;
        assert!((last.x - 3.5).abs() < 1e-12);
        // 3 m at 1 m/s, 10 Hz
        assert_eq!(t.len(), 31);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = straight_corridor(4);
        let mut p = steady(0.0);
        assert!(matches!(
            simulate(&m, &p, NavigationPolicy::WallFollower, 1, 1),
            Err(SimError::TooFewFrames(1))
        ));
        p.memory_fidelity = 1.5;
        assert!(matches!(
            simulate(&m, &p, NavigationPolicy::WallFollower, 1, 10),
            Err(SimError::InvalidProfile {
                field: "memory_fidelity",
                ..
            })
        ));
        p.memory_fidelity = 0.5;
        p.speed_mean = 0.0;
        assert!(simulate(&m, &p, NavigationPolicy::WallFollower, 1, 10).is_err());
    }

    #[test]
    fn heading_slew_is_bounded() {
        let m = generate_maze(5, 8, 8, Branching::High).unwrap();
        let mut p = steady(0.0);
        p.speed_mean = 2.0;
        p.turn_rate = 3.0;
        p.frame_rate = 30.0;
        let t = simulate(&m, &p, NavigationPolicy::RandomTurner, 9, 2000).unwrap();
        let limit = p.turn_rate / p.frame_rate;
        // zero scan: head yaw is the movement heading
        for r in rotation_series(&t).unwrap() {
            assert!(r <= limit + 1e-9, "{r} > {limit}");
        }
        assert_eq!(wall_violations(&m, &t), 0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = generate_maze(5, 8, 8, Branching::Low).unwrap();
        let p = &AgentProfile::defaults()[2];
        let a = simulate(&m, p, p.policy, 77, 500).unwrap();
        let b = simulate(&m, p, p.policy, 77, 500).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = simulate(&m, p, p.policy, 78, 500).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cohort_shape_and_order() {
        let matrix = ConditionMatrix {
            small_size: 4,
            large_size: 5,
            cell_size: 1.0,
        };
        let profiles = AgentProfile::defaults();
        let runs = generate_cohort(&matrix, &profiles, 2, 300, 11).unwrap();
        assert_eq!(runs.len(), 4 * 4 * 2);
        assert_eq!(runs[0].trajectory.subject_id(), "cautious_scanner");
        assert_eq!(runs[0].trajectory.condition_id(), "small-low");
        assert_eq!(runs[1].run, 1);
        assert_eq!(runs[2].trajectory.condition_id(), "small-high");
        assert_eq!(runs[31].trajectory.subject_id(), "methodical_wall_follower");
        let seq = generate_cohort_with(&matrix, &profiles, 2, 300, 11, Exec::Sequential).unwrap();
        assert_eq!(seq, runs);
        assert!(matches!(
            generate_cohort(&matrix, &[], 2, 300, 11),
            Err(SimError::EmptyCohort)
        ));
        let dup = vec![profiles[0].clone(), profiles[0].clone()];
        assert!(matches!(
            generate_cohort(&matrix, &dup, 1, 300, 11),
            Err(SimError::DuplicateProfile(_))
        ));
    }
}
