//! Continuous ground path along corridor centerlines.
//!
//! Right-angle turns are rounded with a quarter circle of radius
//! `CORNER_RADIUS * cell_size`. Reversals at dead ends use a three-arc
//! "bulb" turn (60°, 300° the other way, 60°) of radius
//! `UTURN_RADIUS * cell_size` that starts and ends at the cell center, so the
//! path never leaves the cell square. All work is in `(x, z)` with angles
//! measured counter-clockwise from `+x` in that plane.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use crate::geometry::Vec3;
use crate::maze::{Cell, MazeGrid};

pub const CORNER_RADIUS: f64 = 0.3;
pub const UTURN_RADIUS: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
struct P2 {
    x: f64,
    z: f64,
}

impl P2 {
    fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }
    fn add(self, o: P2, s: f64) -> P2 {
        P2::new(self.x + o.x * s, self.z + o.z * s)
    }
    fn from_angle(a: f64) -> P2 {
        P2::new(a.cos(), a.sin())
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Line {
        from: P2,
        dir: P2,
        len: f64,
    },
    Arc {
        center: P2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    fn len(&self) -> f64 {
        match *self {
            Segment::Line { len, .. } => len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn radius(&self) -> f64 {
        match *self {
            Segment::Line { .. } => f64::INFINITY,
            Segment::Arc { radius, .. } => radius,
        }
    }

    /// Point and unit heading at arc length `s` into the segment.
    fn eval(&self, s: f64) -> (P2, P2) {
        match *self {
            Segment::Line { from, dir, .. } => (from.add(dir, s), dir),
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let a = start_angle + sweep.signum() * s / radius;
                let radial = P2::from_angle(a);
                let tangent = if sweep > 0.0 {
                    P2::new(-radial.z, radial.x)
                } else {
                    P2::new(radial.z, -radial.x)
                };
                (center.add(radial, radius), tangent)
            }
        }
    }
}

/// Arc-length parametrized path.
#[derive(Debug, Clone)]
pub struct CorridorPath {
    segments: Vec<Segment>,
    // cumulative length at the start of each segment
    starts: Vec<f64>,
    total: f64,
    origin: P2,
    origin_dir: P2,
}

struct Builder {
    segments: Vec<Segment>,
    pos: P2,
    dir: P2,
}

impl Builder {
    fn line_to(&mut self, to: P2) {
        let d = P2::new(to.x - self.pos.x, to.z - self.pos.z);
        let len = d.x.hypot(d.z);
        if len > 1e-12 {
            let dir = P2::new(d.x / len, d.z / len);
            self.segments.push(Segment::Line {
                from: self.pos,
                dir,
                len,
            });
            self.dir = dir;
        }
        self.pos = to;
    }

    /// Circular arc from the current pose; positive sweep turns counter-clockwise.
    fn arc(&mut self, radius: f64, sweep: f64) {
        let left = P2::new(-self.dir.z, self.dir.x);
        let center = self.pos.add(left, radius * sweep.signum());
        let start_angle = (self.pos.z - center.z).atan2(self.pos.x - center.x);
        let seg = Segment::Arc {
            center,
            radius,
            start_angle,
            sweep,
        };
        let (end, dir) = seg.eval(seg.len());
        self.segments.push(seg);
        self.pos = end;
        self.dir = dir;
    }
}

fn cross(a: P2, b: P2) -> f64 {
    a.x * b.z - a.z * b.x
}

impl CorridorPath {
    /// Builds the path through the centers of `route`. `uturn_side` picks
    /// the direction of the opening arc of each reversal (`true` = counter-clockwise).
    pub fn from_route(m: &MazeGrid, route: &[Cell], mut uturn_side: impl FnMut() -> bool) -> Self {
        let cs = m.cell_size();
        let center = |c: Cell| {
            let v = m.cell_center(c);
            P2::new(v.x, v.z)
        };
        let origin = center(route[0]);
        let dirs: Vec<P2> = route
            .windows(2)
            .map(|w| {
                let (a, b) = (center(w[0]), center(w[1]));
                P2::new((b.x - a.x) / cs, (b.z - a.z) / cs)
            })
            .collect();
        let origin_dir = dirs.first().copied().unwrap_or(P2::new(1.0, 0.0));
        let mut b = Builder {
            segments: Vec::new(),
            pos: origin,
            dir: origin_dir,
        };
        let r = CORNER_RADIUS * cs;
        let rho = UTURN_RADIUS * cs;
        for k in 1..route.len() {
            let p = center(route[k]);
            let d_in = dirs[k - 1];
            match dirs.get(k) {
                None => b.line_to(p),
                Some(&d_out) => {
                    let turn = cross(d_in, d_out);
                    let dot = d_in.x * d_out.x + d_in.z * d_out.z;
                    if dot > 0.5 {
                        b.line_to(p);
                    } else if dot < -0.5 {
                        b.line_to(p);
                        let s = if uturn_side() { 1.0 } else { -1.0 };
                        b.arc(rho, s * FRAC_PI_3);
                        b.arc(rho, -s * 5.0 * FRAC_PI_3);
                        b.arc(rho, s * FRAC_PI_3);
                        // snap out accumulated rounding
                        b.pos = p;
                        b.dir = d_out;
                    } else {
                        b.line_to(p.add(d_in, -r));
                        b.arc(r, turn.signum() * FRAC_PI_2);
                        b.pos = p.add(d_out, r);
                        b.dir = d_out;
                    }
                }
            }
        }
        let mut starts = Vec::with_capacity(b.segments.len());
        let mut total = 0.0;
        for s in &b.segments {
            starts.push(total);
            total += s.len();
        }
        CorridorPath {
            segments: b.segments,
            starts,
            total,
            origin,
            origin_dir,
        }
    }

    pub fn length(&self) -> f64 {
        self.total
    }

    fn locate(&self, s: f64) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        let i = self.starts.partition_point(|&st| st <= s);
        Some(i.saturating_sub(1))
    }

    /// Ground position and unit heading at arc length `s` (clamped to the path).
    pub fn pose(&self, s: f64) -> (Vec3, Vec3) {
        let s = s.clamp(0.0, self.total);
        let (p, d) = match self.locate(s) {
            None => (self.origin, self.origin_dir),
            Some(i) => self.segments[i].eval(s - self.starts[i]),
        };
        (Vec3::new(p.x, 0.0, p.z), Vec3::new(d.x, 0.0, d.z))
    }

    /// Turning radius of the segment at `s` and the arc length left in it.
    pub fn radius_at(&self, s: f64) -> (f64, f64) {
        match self.locate(s) {
            None => (f64::INFINITY, 0.0),
            Some(i) => {
                let end = self.starts[i] + self.segments[i].len();
                (self.segments[i].radius(), (end - s).max(0.0))
            }
        }
    }

    /// Signed total turning (counter-clockwise positive in `(x, z)`).
    pub fn total_turning(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match *s {
                Segment::Arc { sweep, .. } => sweep,
                Segment::Line { .. } => 0.0,
            })
            .sum()
    }
}

/// Yaw about `+y` whose rotation maps `+x` onto `heading`.
pub fn heading_yaw(heading: Vec3) -> f64 {
    (-heading.z).atan2(heading.x)
}
