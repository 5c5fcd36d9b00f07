//! Single-level grid mazes, decision points and corridor pathfinding.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::{io, seed};

#[derive(Debug, Error)]
pub enum MazeError {
    #[error("invalid maze dimensions {width}x{depth}: both must be at least {min}")]
    InvalidDimensions {
        width: usize,
        depth: usize,
        min: usize,
    },
    #[error("cell ({x}, {z}) is outside the {width}x{depth} grid")]
    OutOfBounds {
        x: usize,
        z: usize,
        width: usize,
        depth: usize,
    },
    #[error("edge {0} does not join orthogonally adjacent cells")]
    NotAdjacent(Edge),
    #[error("open-edge graph is not connected")]
    Disconnected,
    #[error("invalid cell size {0}")]
    InvalidCellSize(f64),
    #[error("maze file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub z: usize,
}

impl Cell {
    pub const fn new(x: usize, z: usize) -> Self {
        Self { x, z }
    }

    pub fn is_adjacent(&self, o: &Cell) -> bool {
        self.x.abs_diff(o.x) + self.z.abs_diff(o.z) == 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.z)
    }
}

/// Unordered pair of cells, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "EdgeRecord", into = "EdgeRecord")]
pub struct Edge {
    a: Cell,
    b: Cell,
}

impl Edge {
    pub fn new(p: Cell, q: Cell) -> Self {
        if p <= q {
            Self { a: p, b: q }
        } else {
            Self { a: q, b: p }
        }
    }

    pub fn cells(&self) -> (Cell, Cell) {
        (self.a, self.b)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    a: Cell,
    b: Cell,
}

impl From<Edge> for EdgeRecord {
    fn from(e: Edge) -> Self {
        EdgeRecord { a: e.a, b: e.b }
    }
}

impl TryFrom<EdgeRecord> for Edge {
    type Error = String;
    fn try_from(r: EdgeRecord) -> Result<Self, String> {
        if r.a.is_adjacent(&r.b) {
            Ok(Edge::new(r.a, r.b))
        } else {
            Err(format!("cells {} and {} are not adjacent", r.a, r.b))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branching {
    Low,
    High,
}

impl FromStr for Branching {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Branching::Low),
            "high" => Ok(Branching::High),
            other => Err(format!(
                "unknown branching `{other}` (expected low or high)"
            )),
        }
    }
}

impl fmt::Display for Branching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branching::Low => "low",
            Branching::High => "high",
        })
    }
}

/// Grid maze stored as its set of open passages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MazeFile", into = "MazeFile")]
pub struct MazeGrid {
    width: usize,
    depth: usize,
    cell_size: f64,
    start: Cell,
    goal: Cell,
    open_edges: BTreeSet<Edge>,
    // adjacency[index(c)] = open neighbours of c, sorted
    adjacency: Vec<Vec<Cell>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MazeFile {
    width: usize,
    depth: usize,
    cell_size: f64,
    start: Cell,
    goal: Cell,
    open_edges: Vec<Edge>,
}

impl From<MazeGrid> for MazeFile {
    fn from(m: MazeGrid) -> Self {
        MazeFile {
            width: m.width,
            depth: m.depth,
            cell_size: m.cell_size,
            start: m.start,
            goal: m.goal,
            open_edges: m.open_edges.into_iter().collect(),
        }
    }
}

impl TryFrom<MazeFile> for MazeGrid {
    type Error = MazeError;
    fn try_from(f: MazeFile) -> Result<Self, MazeError> {
        MazeGrid::new(f.width, f.depth, f.cell_size, f.start, f.goal, f.open_edges)
    }
}

impl MazeGrid {
    /// Validates and builds a maze from an explicit passage list.
    ///
    /// Single-row corridors (`1xN`) are accepted here; generated mazes are
    /// always at least 2x2.
    pub fn new(
        width: usize,
        depth: usize,
        cell_size: f64,
        start: Cell,
        goal: Cell,
        open_edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, MazeError> {
        if width == 0 || depth == 0 || width * depth < 2 {
            return Err(MazeError::InvalidDimensions {
                width,
                depth,
                min: 1,
            });
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(MazeError::InvalidCellSize(cell_size));
        }
        let mut m = MazeGrid {
            width,
            depth,
            cell_size,
            start,
            goal,
            open_edges: BTreeSet::new(),
            adjacency: vec![Vec::new(); width * depth],
        };
        m.check_bounds(start)?;
        m.check_bounds(goal)?;
        for e in open_edges {
            m.check_bounds(e.a)?;
            m.check_bounds(e.b)?;
            if !e.a.is_adjacent(&e.b) {
                return Err(MazeError::NotAdjacent(e));
            }
            m.open_edges.insert(e);
        }
        m.rebuild_adjacency();
        if m.reachable_count(start) != width * depth {
            return Err(MazeError::Disconnected);
        }
        Ok(m)
    }

    fn rebuild_adjacency(&mut self) {
        for list in &mut self.adjacency {
            list.clear();
        }
        for e in &self.open_edges {
            let (ia, ib) = (self.index(e.a), self.index(e.b));
            self.adjacency[ia].push(e.b);
            self.adjacency[ib].push(e.a);
        }
        for list in &mut self.adjacency {
            list.sort();
        }
    }

    fn index(&self, c: Cell) -> usize {
        c.z * self.width + c.x
    }

    pub fn check_bounds(&self, c: Cell) -> Result<(), MazeError> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(MazeError::OutOfBounds {
                x: c.x,
                z: c.z,
                width: self.width,
                depth: self.depth,
            })
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.z < self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn cell_count(&self) -> usize {
        self.width * self.depth
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn start(&self) -> Cell {
        self.start
    }
    pub fn goal(&self) -> Cell {
        self.goal
    }
    pub fn open_edges(&self) -> &BTreeSet<Edge> {
        &self.open_edges
    }

    pub fn is_open(&self, a: Cell, b: Cell) -> bool {
        self.open_edges.contains(&Edge::new(a, b))
    }

    /// Open neighbours of `c` in ascending order.
    pub fn neighbors(&self, c: Cell) -> &[Cell] {
        &self.adjacency[self.index(c)]
    }

    pub fn degree(&self, c: Cell) -> usize {
        self.neighbors(c).len()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.depth).flat_map(move |z| (0..self.width).map(move |x| Cell::new(x, z)))
    }

    /// World-space center of a cell at floor height.
    pub fn cell_center(&self, c: Cell) -> Vec3 {
        Vec3::new(
            (c.x as f64 + 0.5) * self.cell_size,
            0.0,
            (c.z as f64 + 0.5) * self.cell_size,
        )
    }

    /// Grid cell containing a world position, if inside the maze footprint.
    pub fn cell_at(&self, p: Vec3) -> Option<Cell> {
        let fx = (p.x / self.cell_size).floor();
        let fz = (p.z / self.cell_size).floor();
        if fx < 0.0 || fz < 0.0 || !fx.is_finite() || !fz.is_finite() {
            return None;
        }
        let c = Cell::new(fx as usize, fz as usize);
        self.in_bounds(c).then_some(c)
    }

    fn reachable_count(&self, from: Cell) -> usize {
        let mut seen = vec![false; self.cell_count()];
        let mut stack = vec![from];
        seen[self.index(from)] = true;
        let mut n = 1;
        while let Some(c) = stack.pop() {
            for &nb in self.neighbors(c) {
                let i = self.index(nb);
                if !seen[i] {
                    seen[i] = true;
                    n += 1;
                    stack.push(nb);
                }
            }
        }
        n
    }

    pub fn is_connected(&self) -> bool {
        self.reachable_count(self.start) == self.cell_count()
    }

    /// Connected with exactly one route between any two cells.
    pub fn is_perfect(&self) -> bool {
        self.is_connected() && self.open_edges.len() == self.cell_count() - 1
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("maze serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, MazeError> {
        serde_json::from_str(text).map_err(|e| MazeError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), MazeError> {
        io::write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MazeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Cells with three or more open passages.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecisionPointSet {
    pub cells: BTreeSet<Cell>,
}

impl DecisionPointSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn contains(&self, c: &Cell) -> bool {
        self.cells.contains(c)
    }
}

pub fn decision_points(m: &MazeGrid) -> DecisionPointSet {
    DecisionPointSet {
        cells: m.cells().filter(|&c| m.degree(c) >= 3).collect(),
    }
}

/// Deterministic maze: recursive-backtracker spanning tree from `(0, 0)`,
/// plus `floor(0.1 * width * depth)` extra passages for [`Branching::High`].
///
/// The spanning tree consumes the random stream first, so both branching
/// levels share the same tree for a given seed and size.
pub fn generate_maze(
    seed: u64,
    width: usize,
    depth: usize,
    branching: Branching,
) -> Result<MazeGrid, MazeError> {
    if width < 2 || depth < 2 {
        return Err(MazeError::InvalidDimensions {
            width,
            depth,
            min: 2,
        });
    }
    let mut rng = seed::rng(seed::derive(
        seed,
        &[seed::tag("maze"), width as u64, depth as u64],
    ));
    let idx = |c: Cell| c.z * width + c.x;
    let mut visited = vec![false; width * depth];
    let mut edges = BTreeSet::new();
    let start = Cell::new(0, 0);
    visited[0] = true;
    let mut stack = vec![start];
    while let Some(&cur) = stack.last() {
        let mut options: Vec<Cell> = grid_neighbors(cur, width, depth)
            .filter(|n| !visited[idx(*n)])
            .collect();
        if options.is_empty() {
            stack.pop();
            continue;
        }
        options.shuffle(&mut rng);
        let next = options[0];
        visited[idx(next)] = true;
        edges.insert(Edge::new(cur, next));
        stack.push(next);
    }

    if branching == Branching::High {
        let extra = (width * depth) / 10;
        let mut closed: Vec<Edge> = (0..depth)
            .flat_map(|z| (0..width).map(move |x| Cell::new(x, z)))
            .flat_map(|c| {
                let mut v = Vec::with_capacity(2);
                if c.x + 1 < width {
                    v.push(Edge::new(c, Cell::new(c.x + 1, c.z)));
                }
                if c.z + 1 < depth {
                    v.push(Edge::new(c, Cell::new(c.x, c.z + 1)));
                }
                v
            })
            .filter(|e| !edges.contains(e))
            .collect();
        closed.shuffle(&mut rng);
        edges.extend(closed.into_iter().take(extra));
    }

    MazeGrid::new(
        width,
        depth,
        1.0,
        start,
        Cell::new(width - 1, depth - 1),
        edges,
    )
}

fn grid_neighbors(c: Cell, width: usize, depth: usize) -> impl Iterator<Item = Cell> {
    let mut v = Vec::with_capacity(4);
    if c.x > 0 {
        v.push(Cell::new(c.x - 1, c.z));
    }
    if c.x + 1 < width {
        v.push(Cell::new(c.x + 1, c.z));
    }
    if c.z > 0 {
        v.push(Cell::new(c.x, c.z - 1));
    }
    if c.z + 1 < depth {
        v.push(Cell::new(c.x, c.z + 1));
    }
    v.into_iter()
}

/// Breadth-first shortest route from `from` to `to`, inclusive of both ends.
/// Empty only if `to` is unreachable.
pub fn shortest_path(m: &MazeGrid, from: Cell, to: Cell) -> Result<Vec<Cell>, MazeError> {
    m.check_bounds(from)?;
    m.check_bounds(to)?;
    let mut parent: Vec<Option<Cell>> = vec![None; m.cell_count()];
    let mut seen = vec![false; m.cell_count()];
    let mut queue = VecDeque::from([from]);
    seen[m.index(from)] = true;
    while let Some(c) = queue.pop_front() {
        if c == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(p) = parent[m.index(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(path);
        }
        for &n in m.neighbors(c) {
            let i = m.index(n);
            if !seen[i] {
                seen[i] = true;
                parent[i] = Some(c);
                queue.push_back(n);
            }
        }
    }
    Ok(Vec::new())
}

/// Maze size factor of the 2x2 condition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MazeSize {
    Small,
    Large,
}

impl fmt::Display for MazeSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MazeSize::Small => "small",
            MazeSize::Large => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Condition {
    pub size: MazeSize,
    pub branching: Branching,
}

impl Condition {
    pub fn id(&self) -> String {
        format!("{}-{}", self.size, self.branching)
    }
}

/// Maze size x branching density, four conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionMatrix {
    pub small_size: usize,
    pub large_size: usize,
    pub cell_size: f64,
}

impl Default for ConditionMatrix {
    fn default() -> Self {
        Self {
            small_size: 8,
            large_size: 16,
            cell_size: 1.0,
        }
    }
}

impl ConditionMatrix {
    pub fn conditions(&self) -> [Condition; 4] {
        use Branching::*;
        use MazeSize::*;
        [
            Condition {
                size: Small,
                branching: Low,
            },
            Condition {
                size: Small,
                branching: High,
            },
            Condition {
                size: Large,
                branching: Low,
            },
            Condition {
                size: Large,
                branching: High,
            },
        ]
    }

    pub fn side(&self, size: MazeSize) -> usize {
        match size {
            MazeSize::Small => self.small_size,
            MazeSize::Large => self.large_size,
        }
    }

    pub fn condition(&self, id: &str) -> Option<Condition> {
        self.conditions().into_iter().find(|c| c.id() == id)
    }

    /// The maze every run of `cond` is played in.
    pub fn maze(&self, seed: u64, cond: Condition) -> Result<MazeGrid, MazeError> {
        let side = self.side(cond.size);
        let m = generate_maze(
            seed::derive(seed, &[seed::tag(&cond.id())]),
            side,
            side,
            cond.branching,
        )?;
        m.with_cell_size(self.cell_size)
    }
}

impl MazeGrid {
    pub fn with_cell_size(self, cell_size: f64) -> Result<Self, MazeError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(MazeError::InvalidCellSize(cell_size));
        }
        Ok(MazeGrid { cell_size, ..self })
    }
}
