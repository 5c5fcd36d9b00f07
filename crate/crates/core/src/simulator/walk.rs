//! Cell-level routes chosen by each navigation policy.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::profile::NavigationPolicy;
use crate::maze::{Cell, MazeGrid};
use crate::seed::Rng;

/// Sequence of adjacent open cells from the maze start, ending at the goal
/// or after `max_moves` moves.
pub fn walk(
    m: &MazeGrid,
    policy: NavigationPolicy,
    memory_fidelity: f64,
    max_moves: usize,
    rng: &mut Rng,
) -> Vec<Cell> {
    match policy {
        NavigationPolicy::WallFollower => wall_follower(m, max_moves),
        NavigationPolicy::MemoryBacktracker => backtracker(m, memory_fidelity, max_moves, rng),
        NavigationPolicy::RandomTurner => random_turner(m, max_moves, rng),
    }
}

fn step(c: Cell, dir: (i64, i64)) -> Option<Cell> {
    let x = c.x as i64 + dir.0;
    let z = c.z as i64 + dir.1;
    (x >= 0 && z >= 0).then(|| Cell::new(x as usize, z as usize))
}

fn wall_follower(m: &MazeGrid, max_moves: usize) -> Vec<Cell> {
    let mut cur = m.start();
    let mut path = vec![cur];
    // facing +x; right of (dx, dz) is (dz, -dx)
    let mut dir: (i64, i64) = (1, 0);
    while cur != m.goal() && path.len() <= max_moves {
        let right = (dir.1, -dir.0);
        let left = (-dir.1, dir.0);
        let back = (-dir.0, -dir.1);
        let Some((d, next)) = [right, dir, left, back].into_iter().find_map(|d| {
            step(cur, d)
                .filter(|n| m.in_bounds(*n) && m.is_open(cur, *n))
                .map(|n| (d, n))
        }) else {
            break;
        };
        dir = d;
        cur = next;
        path.push(cur);
    }
    path
}

fn onward(m: &MazeGrid, cur: Cell, prev: Option<Cell>) -> Vec<Cell> {
    let nbs = m.neighbors(cur);
    let fwd: Vec<Cell> = nbs.iter().copied().filter(|n| Some(*n) != prev).collect();
    if fwd.is_empty() {
        nbs.to_vec()
    } else {
        fwd
    }
}

fn random_turner(m: &MazeGrid, max_moves: usize, rng: &mut Rng) -> Vec<Cell> {
    let mut cur = m.start();
    let mut prev = None;
    let mut path = vec![cur];
    while cur != m.goal() && path.len() <= max_moves {
        let options = onward(m, cur, prev);
        let Some(&next) = options.choose(rng) else {
            break;
        };
        prev = Some(cur);
        cur = next;
        path.push(cur);
    }
    path
}

fn backtracker(m: &MazeGrid, fidelity: f64, max_moves: usize, rng: &mut Rng) -> Vec<Cell> {
    let mut cur = m.start();
    let mut prev: Option<Cell> = None;
    let mut path = vec![cur];
    let mut visited: HashMap<Cell, Option<Cell>> = HashMap::from([(cur, None)]);
    while cur != m.goal() && path.len() <= max_moves {
        let nbs = m.neighbors(cur);
        if nbs.is_empty() {
            break;
        }
        let is_junction = nbs.len() >= 3 || prev.is_none();
        let next = if is_junction && rng.gen::<f64>() < fidelity {
            let mut fresh: Vec<Cell> = nbs
                .iter()
                .copied()
                .filter(|n| !visited.contains_key(n))
                .collect();
            fresh.shuffle(rng);
            match fresh.first() {
                Some(&n) => n,
                // everything here is explored: retreat the way we first came
                None => match visited.get(&cur).copied().flatten() {
                    Some(parent) => parent,
                    None => *onward(m, cur, prev).choose(rng).expect("nonempty"),
                },
            }
        } else {
            *onward(m, cur, prev).choose(rng).expect("nonempty")
        };
        visited.entry(next).or_insert(Some(cur));
        prev = Some(cur);
        cur = next;
        path.push(cur);
    }
    path
}
