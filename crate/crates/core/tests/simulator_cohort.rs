mod common;

use vrtrace::maze::ConditionMatrix;
use vrtrace::par::Exec;
use vrtrace::simulator::{generate_cohort_with, wall_violations, AgentProfile};

#[test]
fn default_cohort_is_valid_and_mode_independent() {
    let matrix = ConditionMatrix::default();
    let profiles = AgentProfile::defaults();
    let seq = generate_cohort_with(&matrix, &profiles, 2, 1500, 3, Exec::Sequential).unwrap();
    let par = generate_cohort_with(&matrix, &profiles, 2, 1500, 3, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.len(), 4 * 4 * 2);
    for r in &seq {
        let t = &r.trajectory;
        let cond = matrix.condition(t.condition_id()).unwrap();
        let m = matrix.maze(3, cond).unwrap();
        assert_eq!(
            common::oracle_wall_penetrations(&m, t),
            0,
            "{} {}",
            t.subject_id(),
            t.condition_id()
        );
        assert_eq!(wall_violations(&m, t), 0);
        common::timestamps_check(t, 30.0).unwrap();
        assert!(t.len() <= 1500);
    }
}

#[test]
fn mean_speed_tracks_profile() {
    let matrix = ConditionMatrix::default();
    let profiles = AgentProfile::defaults();
    let cohort = generate_cohort_with(&matrix, &profiles, 1, 3000, 21, Exec::default()).unwrap();
    for p in &profiles {
        let runs: Vec<_> = cohort
            .iter()
            .filter(|r| {
                r.trajectory.subject_id() == p.profile_id
                    && r.trajectory.condition_id().starts_with("large")
            })
            .collect();
        let dist: f64 = runs
            .iter()
            .map(|r| common::oracle_distance(&r.trajectory))
            .sum();
        let time: f64 = runs.iter().map(|r| r.trajectory.duration()).sum();
        let speed = dist / time;
        // arcs and reversals slow the agent down, never up
        assert!(
            speed <= p.speed_mean * 1.05 && speed >= p.speed_mean * 0.75,
            "{}: {speed}",
            p.profile_id
        );
    }
}
