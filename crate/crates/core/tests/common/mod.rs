//! Independent oracles and checks shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use vrtrace::features;
use vrtrace::geometry::{quat_angle_between, signed_plane_angle, UnitQuaternion, Vec3};
use vrtrace::lstm::{
    loss, loss_and_gradient, sequence_forward, Head, HeadKind, LstmParams, Targets,
};
use vrtrace::maze::{generate_maze, Branching, Cell, Edge, MazeGrid};
use vrtrace::seed;
use vrtrace::telemetry::Trajectory;

pub type Check = Result<(), String>;

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> UnitQuaternion {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if c.iter().map(|v| v * v).sum::<f64>() > 1e-6 {
            return UnitQuaternion::new(c[0], c[1], c[2], c[3]).unwrap();
        }
    }
}

pub fn random_ground_vector<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-3.0..3.0),
        );
        if v.x.hypot(v.z) > 1e-3 {
            return v;
        }
    }
}

// ---------------------------------------------------------------- LSTM

/// Largest relative gap between analytic and central-difference gradients
/// over every parameter of a random `D=3, H=4, T=7` network, for both heads.
pub fn gradient_check(s: u64) -> Result<f64, String> {
    let (d, h, t, step) = (3, 4, 7, 1e-5);
    let mut rng = seed::rng(s);
    let mut worst: f64 = 0.0;
    for kind in [HeadKind::Regression, HeadKind::Classification] {
        let params = LstmParams::init(d, h, &mut rng);
        let outputs = 3;
        let head = Head::init(kind, outputs, h, &mut rng);
        let xs: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let targets = match kind {
            HeadKind::Regression => Targets::PerStep(
                (0..t)
                    .map(|_| {
                        (0..outputs)
                            .map(|_| StandardNormal.sample(&mut rng))
                            .collect()
                    })
                    .collect(),
            ),
            HeadKind::Classification => Targets::Class(rng.gen_range(0..outputs)),
        };
        let (_, grads) =
            loss_and_gradient(&params, &head, &xs, &targets).map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = grads
            .slices()
            .iter()
            .flat_map(|s| s.iter().copied())
            .collect();

        let eval = |p: &LstmParams, hd: &Head| {
            let (out, _) = sequence_forward(p, hd, &xs).unwrap();
            loss(&out, &targets).unwrap()
        };
        let mut flat_index = 0;
        let n_lstm = LstmParams::TENSOR_NAMES.len();
        for tensor in 0..n_lstm + 2 {
            let len = if tensor < n_lstm {
                params.tensors()[tensor].len()
            } else if tensor == n_lstm {
                head.weights().0.as_slice().len()
            } else {
                head.weights().1.len()
            };
            for j in 0..len {
                let perturbed = |delta: f64| {
                    let mut p = params.clone();
                    let mut hd = head.clone();
                    if tensor < n_lstm {
                        p.tensors_mut()[tensor][j] += delta;
                    } else if tensor == n_lstm {
                        hd.weights_mut().0.as_mut_slice()[j] += delta;
                    } else {
                        hd.weights_mut().1[j] += delta;
                    }
                    eval(&p, &hd)
                };
                let numeric = (perturbed(step) - perturbed(-step)) / (2.0 * step);
                let a = analytic[flat_index];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
                flat_index += 1;
            }
        }
        if flat_index != analytic.len() {
            return Err(format!(
                "checked {flat_index} of {} gradient entries",
                analytic.len()
            ));
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------- features

/// Random walk inside the maze footprint with repeated positions and
/// arbitrary head orientations.
pub fn random_trajectory<R: Rng>(rng: &mut R, m: &MazeGrid, n: usize) -> Trajectory {
    let cs = m.cell_size();
    let (xmax, zmax) = (m.width() as f64 * cs, m.depth() as f64 * cs);
    let mut p = Vec3::new(rng.gen_range(0.0..xmax), 1.6, rng.gen_range(0.0..zmax));
    let mut q = random_unit_quaternion(rng);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push((p, q));
        match rng.gen_range(0..10) {
            0 => {}
            1 => p = Vec3::new(p.x, p.y + 0.01, p.z),
            _ => {
                let step = Vec3::new(rng.gen_range(-0.4..0.4), 0.0, rng.gen_range(-0.4..0.4));
                p = Vec3::new(
                    (p.x + step.x).clamp(0.0, xmax - 1e-9),
                    p.y,
                    (p.z + step.z).clamp(0.0, zmax - 1e-9),
                );
            }
        }
        if rng.gen_bool(0.7) {
            q = random_unit_quaternion(rng);
        }
    }
    Trajectory::from_samples("oracle", "random", 1.0 / 30.0, samples).unwrap()
}

pub fn oracle_distance(t: &Trajectory) -> f64 {
    let ps: Vec<Vec3> = t.positions().collect();
    let mut total = 0.0;
    for k in 1..ps.len() {
        total += (ps[k].x - ps[k - 1].x)
            .hypot(ps[k].y - ps[k - 1].y)
            .hypot(ps[k].z - ps[k - 1].z);
    }
    total
}

pub fn oracle_coverage(t: &Trajectory, cell_size: f64) -> usize {
    let mut cells: Vec<(i64, i64)> = t
        .positions()
        .map(|p| {
            (
                (p.x / cell_size).floor() as i64,
                (p.z / cell_size).floor() as i64,
            )
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells.len()
}

/// Degree counted straight from the open-edge list.
pub fn oracle_decision_cells(m: &MazeGrid) -> HashSet<(usize, usize)> {
    let mut degree: HashMap<(usize, usize), usize> = HashMap::new();
    for e in m.open_edges() {
        let (a, b) = e.cells();
        *degree.entry((a.x, a.z)).or_default() += 1;
        *degree.entry((b.x, b.z)).or_default() += 1;
    }
    degree
        .into_iter()
        .filter(|&(_, d)| d >= 3)
        .map(|(c, _)| c)
        .collect()
}

pub fn oracle_decision_points(t: &Trajectory, m: &MazeGrid) -> usize {
    let dps = oracle_decision_cells(m);
    let cs = m.cell_size();
    let mut hit = HashSet::new();
    for p in t.positions() {
        let (cx, cz) = ((p.x / cs).floor(), (p.z / cs).floor());
        if cx >= 0.0 && cz >= 0.0 && (cx as usize) < m.width() && (cz as usize) < m.depth() {
            let c = (cx as usize, cz as usize);
            if dps.contains(&c) {
                hit.insert(c);
            }
        }
    }
    hit.len()
}

/// Heading difference about +y, wrapped into `(-π, π]`.
pub fn oracle_turn(u: Vec3, v: Vec3) -> Option<f64> {
    if u.x.hypot(u.z) < 1e-9 || v.x.hypot(v.z) < 1e-9 {
        return None;
    }
    let yaw = |w: Vec3| (-w.z).atan2(w.x);
    let mut d = yaw(v) - yaw(u);
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    Some(d)
}

pub fn oracle_curvature(t: &Trajectory) -> Vec<f64> {
    let ps: Vec<Vec3> = t.positions().collect();
    (0..ps.len().saturating_sub(2))
        .map(|k| oracle_turn(ps[k + 1] - ps[k], ps[k + 2] - ps[k + 1]).unwrap_or(0.0))
        .collect()
}

fn rotation_matrix(q: &UnitQuaternion) -> [[f64; 3]; 3] {
    let [w, x, y, z] = q.components();
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Angle of `Raᵀ Rb` from its trace and skew part.
pub fn oracle_rotation_angle(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let (ra, rb) = (rotation_matrix(a), rotation_matrix(b));
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| ra[k][i] * rb[k][j]).sum();
        }
    }
    let cos = (r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0;
    let sin = (r[2][1] - r[1][2])
        .hypot(r[0][2] - r[2][0])
        .hypot(r[1][0] - r[0][1])
        / 2.0;
    sin.atan2(cos)
}

pub fn oracle_rotation(t: &Trajectory) -> Vec<f64> {
    t.frames()
        .windows(2)
        .map(|w| oracle_rotation_angle(&w[0].head_rotation, &w[1].head_rotation))
        .collect()
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
}

/// Compares every feature of one random trajectory with the oracles.
pub fn feature_oracle_check(case: u64) -> Check {
    let mut rng = seed::rng(seed::derive(case, &[seed::tag("feature-oracle")]));
    let side = rng.gen_range(3..10);
    let branching = if rng.gen_bool(0.5) {
        Branching::High
    } else {
        Branching::Low
    };
    let m = generate_maze(case, side, side + rng.gen_range(0..3), branching)
        .unwrap()
        .with_cell_size(rng.gen_range(0.5..2.0))
        .unwrap();
    let n = rng.gen_range(3..400);
    let t = random_trajectory(&mut rng, &m, n);
    let s = features::summarize(&t, &m).map_err(|e| e.to_string())?;
    let curv = features::curvature_series(&t).map_err(|e| e.to_string())?;
    let rot = features::rotation_series(&t).map_err(|e| e.to_string())?;

    let d = oracle_distance(&t);
    ensure(close(s.distance_traveled, d, 1e-12, 0.0), || {
        format!("case {case}: distance {} vs {d}", s.distance_traveled)
    })?;
    let cov = oracle_coverage(&t, m.cell_size());
    ensure(s.coverage == cov, || {
        format!("case {case}: coverage {} vs {cov}", s.coverage)
    })?;
    let dp = oracle_decision_points(&t, &m);
    ensure(s.decision_points_reached == dp, || {
        format!(
            "case {case}: decision points {} vs {dp}",
            s.decision_points_reached
        )
    })?;

    ensure(curv.len() == n - 2, || {
        format!(
            "case {case}: curvature has {} entries for {n} frames",
            curv.len()
        )
    })?;
    ensure(rot.len() == n - 1, || {
        format!(
            "case {case}: rotation has {} entries for {n} frames",
            rot.len()
        )
    })?;
    for (k, (a, b)) in curv.iter().zip(oracle_curvature(&t)).enumerate() {
        ensure(close(*a, b, 0.0, 1e-12), || {
            format!("case {case}: curvature[{k}] {a} vs {b}")
        })?;
    }
    for (k, (a, b)) in rot.iter().zip(oracle_rotation(&t)).enumerate() {
        ensure(close(*a, b, 0.0, 1e-12), || {
            format!("case {case}: rotation[{k}] {a} vs {b}")
        })?;
    }
    let mean_abs: f64 = oracle_curvature(&t).iter().map(|c| c.abs()).sum::<f64>() / (n - 2) as f64;
    ensure(close(s.mean_abs_curvature, mean_abs, 1e-12, 1e-15), || {
        format!(
            "case {case}: mean |curvature| {} vs {mean_abs}",
            s.mean_abs_curvature
        )
    })?;
    let total: f64 = oracle_rotation(&t).iter().sum();
    ensure(close(s.total_rotation, total, 1e-12, 1e-15), || {
        format!(
            "case {case}: total rotation {} vs {total}",
            s.total_rotation
        )
    })
}

// ---------------------------------------------------------------- geometry

pub fn geometry_invariants_check(samples: usize, s: u64) -> Check {
    let mut rng = seed::rng(s);
    for i in 0..samples {
        let q = random_unit_quaternion(&mut rng);
        let f = quat_angle_between(&q, &q.antipode());
        ensure(f == 0.0, || format!("sample {i}: f(q, -q) = {f}"))?;
    }
    for i in 0..samples {
        let (a, b, q) = (
            random_unit_quaternion(&mut rng),
            random_unit_quaternion(&mut rng),
            random_unit_quaternion(&mut rng),
        );
        let base = quat_angle_between(&a, &b);
        let rotated = quat_angle_between(&q.compose(&a), &q.compose(&b));
        ensure((base - rotated).abs() <= 1e-9, || {
            format!("sample {i}: pre-rotation changed {base} to {rotated}")
        })?;
        let oracle = oracle_rotation_angle(&a, &b);
        ensure((base - oracle).abs() <= 1e-9, || {
            format!("sample {i}: angle {base} vs matrix oracle {oracle}")
        })?;
    }
    let mut checked = 0;
    while checked < samples {
        let (u, v) = (
            random_ground_vector(&mut rng),
            random_ground_vector(&mut rng),
        );
        let f = signed_plane_angle(u, v).map_err(|e| e.to_string())?;
        if f.abs() >= PI {
            continue;
        }
        let mirror = |w: Vec3| Vec3::new(w.x, w.y, -w.z);
        let fm = signed_plane_angle(mirror(u), mirror(v)).map_err(|e| e.to_string())?;
        ensure((f + fm).abs() <= 1e-12, || format!("mirror: {f} vs {fm}"))?;
        let back = signed_plane_angle(v, u).map_err(|e| e.to_string())?;
        ensure((f + back).abs() <= 1e-12, || {
            format!("antisymmetry: {f} vs {back}")
        })?;
        checked += 1;
    }
    Ok(())
}

// ---------------------------------------------------------------- maze

/// Connected components of the open-edge graph, by BFS over the edge list.
pub fn oracle_is_connected(m: &MazeGrid) -> bool {
    let mut adj: HashMap<Cell, Vec<Cell>> = HashMap::new();
    for e in m.open_edges() {
        let (a, b) = e.cells();
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let start = Cell::new(0, 0);
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in adj.get(&c).into_iter().flatten() {
            if seen.insert(*n) {
                queue.push_back(*n);
            }
        }
    }
    seen.len() == m.width() * m.depth()
}

pub fn maze_structure_check(seeds: std::ops::Range<u64>) -> Check {
    for s in seeds {
        for (w, d) in [
            (8, 8),
            (16, 16),
            (2 + (s % 7) as usize, 3 + (s % 5) as usize),
        ] {
            let low = generate_maze(s, w, d, Branching::Low).map_err(|e| e.to_string())?;
            let high = generate_maze(s, w, d, Branching::High).map_err(|e| e.to_string())?;
            ensure(oracle_is_connected(&low), || {
                format!("seed {s} {w}x{d}: low maze disconnected")
            })?;
            ensure(low.open_edges().len() == w * d - 1, || {
                format!(
                    "seed {s} {w}x{d}: low maze has {} passages for {} cells",
                    low.open_edges().len(),
                    w * d
                )
            })?;
            ensure(oracle_is_connected(&high), || {
                format!("seed {s} {w}x{d}: high maze disconnected")
            })?;
            let (nl, nh) = (
                oracle_decision_cells(&low).len(),
                oracle_decision_cells(&high).len(),
            );
            ensure(nh >= nl, || {
                format!("seed {s} {w}x{d}: high has {nh} decision points, low {nl}")
            })?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- simulator

/// Frames whose cell is outside the grid, or that move between cells not
/// joined by an open passage.
pub fn oracle_wall_penetrations(m: &MazeGrid, t: &Trajectory) -> usize {
    let cs = m.cell_size();
    let cell = |p: Vec3| {
        let (cx, cz) = ((p.x / cs).floor(), (p.z / cs).floor());
        (cx >= 0.0 && cz >= 0.0 && (cx as usize) < m.width() && (cz as usize) < m.depth())
            .then(|| Cell::new(cx as usize, cz as usize))
    };
    let mut bad = 0;
    let mut prev: Option<Cell> = None;
    for p in t.positions() {
        match cell(p) {
            None => bad += 1,
            Some(c) => {
                if let Some(q) = prev {
                    if q != c && !m.open_edges().contains(&Edge::new(q, c)) {
                        bad += 1;
                    }
                }
                prev = Some(c);
            }
        }
    }
    bad
}

/// Every timestamp is `k / frame_rate` and consecutive gaps equal the
/// frame period up to rounding.
pub fn timestamps_check(t: &Trajectory, frame_rate: f64) -> Check {
    let dt = 1.0 / frame_rate;
    for (k, f) in t.frames().iter().enumerate() {
        ensure(f.frame_index == k, || {
            format!("frame {k} has index {}", f.frame_index)
        })?;
        ensure(f.t == k as f64 / frame_rate, || {
            format!("frame {k}: t = {} not {}", f.t, k as f64 / frame_rate)
        })?;
    }
    for w in t.frames().windows(2) {
        let gap = w[1].t - w[0].t;
        ensure((gap - dt).abs() <= 1e-12, || {
            format!("frame {}: step {gap} != {dt}", w[1].frame_index)
        })?;
    }
    Ok(())
}
