//! Numerical seeding for the standard map: periodic orbits, unstable
//! directions, homoclinic points and the skeleton sets fed to connection
//! search. Nothing here is rigorous.
//!
//! The map factors as `f = R₁∘R₀` with involutions
//! `R₀(x, y) = (−x, y + k sin 2πx)` and `R₁(x, y) = (y − x, y)`,
//! `k = ε/2π`. Their fixed lines `x = 0`, `x = ½`, `y = 2x`, `y = 2x − 1`
//! carry points of every symmetric orbit and serve as seed lines.

use std::f64::consts::TAU;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connect::SkeletonPair;
use crate::dynamics::{mat2_mul, torus_dist, Mat2, Point2, SystemKind, SystemSpec};
use crate::error::{Error, Result};

pub const SEEDS_PER_LINE: usize = 512;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Orbit re-verification tolerance (torus metric).
pub const ORBIT_TOL: f64 = 1e-10;
/// Skeleton points closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitClass {
    Hyperbolic,
    Elliptic,
    Parabolic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<Point2>,
    pub period: usize,
    pub residue: f64,
    pub classification: OrbitClass,
}

impl PeriodicOrbit {
    pub fn is_hyperbolic(&self) -> bool {
        self.classification == OrbitClass::Hyperbolic
    }
}

fn classify(residue: f64) -> OrbitClass {
    if residue.abs() < 1e-9 || (residue - 1.0).abs() < 1e-9 {
        OrbitClass::Parabolic
    } else if !(0.0..=1.0).contains(&residue) {
        OrbitClass::Hyperbolic
    } else {
        OrbitClass::Elliptic
    }
}

/// Lifted standard map (no wrapping) at the parameter midpoint.
#[derive(Clone, Copy, Debug)]
struct Lift {
    eps: f64,
}

impl Lift {
    fn of(sys: &SystemSpec) -> Result<Self> {
        if sys.kind != SystemKind::Standard {
            return Err(Error::Unsupported("seeding is implemented for the standard map".into()));
        }
        Ok(Lift { eps: sys.eps_mid() })
    }

    fn step(&self, p: Point2) -> Point2 {
        let y = p.y + self.eps / TAU * (TAU * p.x).sin();
        Point2::new(p.x + y, y)
    }

    fn jac(&self, p: Point2) -> Mat2 {
        let c = self.eps * (TAU * p.x).cos();
        [[1.0 + c, 1.0], [c, 1.0]]
    }

    /// `fⁿ(p)` and `Dfⁿ(p)`.
    fn iterate(&self, p: Point2, n: usize) -> (Point2, Mat2) {
        let mut q = p;
        let mut d: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..n {
            d = mat2_mul(&self.jac(q), &d);
            q = self.step(q);
        }
        (q, d)
    }
}

fn round_residual(r: f64) -> f64 {
    r - r.round()
}

/// Newton on `fⁿ(p) − p ≡ 0 (mod 1)`. A root is accepted only when the
/// residual is below tolerance and the next step is negligible too, which
/// rejects stalls near degenerate (resonant) points.
fn newton(lift: &Lift, p0: Point2, n: usize) -> Option<Point2> {
    let mut p = p0;
    for _ in 0..NEWTON_MAX_ITER {
        let (q, d) = lift.iterate(p, n);
        let (fx, fy) = (round_residual(q.x - p.x), round_residual(q.y - p.y));
        let (a, b, c, e) = (d[0][0] - 1.0, d[0][1], d[1][0], d[1][1] - 1.0);
        let det = a * e - b * c;
        if det.abs() < 1e-14 || !det.is_finite() {
            return None;
        }
        let dx = (e * fx - b * fy) / det;
        let dy = (a * fy - c * fx) / det;
        if fx.hypot(fy) < NEWTON_TOL {
            return (dx.hypot(dy) < 1e-9).then(|| p.wrapped());
        }
        p = Point2::new(p.x - dx, p.y - dy);
        if !p.x.is_finite() || !p.y.is_finite() {
            return None;
        }
    }
    None
}

fn orbit_of(lift: &Lift, p: Point2, n: usize) -> Vec<Point2> {
    let mut pts = Vec::with_capacity(n);
    let mut q = p;
    for _ in 0..n {
        pts.push(q.wrapped());
        q = lift.step(q);
    }
    pts
}

/// Smallest `m` with `fᵐ(p) ≈ p` (up to `n`).
fn minimal_period(lift: &Lift, p: Point2, n: usize) -> usize {
    let mut q = p;
    for m in 1..=n {
        q = lift.step(q);
        if torus_dist(q.wrapped(), p) < 1e-8 {
            return m;
        }
    }
    n
}

fn symmetry_seeds() -> Vec<Point2> {
    let n = SEEDS_PER_LINE;
    let mut out = Vec::with_capacity(4 * n);
    for k in 0..n {
        let t = (k as f64 + 0.5) / n as f64;
        out.push(Point2::new(0.0, t));
        out.push(Point2::new(0.5, t));
        // y = 2x and y = 2x − 1 over x ∈ [0, 1)
        let x = 0.5 * t;
        out.push(Point2::new(x, 2.0 * x));
        out.push(Point2::new(x + 0.5, 2.0 * x));
    }
    out
}

/// Greene's residue of an orbit point: `(2 − tr Dfⁿ)/4`.
pub fn residue(sys: &SystemSpec, p: Point2, period: usize) -> Result<f64> {
    let (_, d) = Lift::of(sys)?.iterate(p, period);
    Ok((2.0 - (d[0][0] + d[1][1])) / 4.0)
}

/// `Dfⁿ` at `p`, midpoint parameter.
pub fn orbit_jacobian(sys: &SystemSpec, p: Point2, period: usize) -> Result<Mat2> {
    Ok(Lift::of(sys)?.iterate(p, period).1)
}

/// Periodic orbits of minimal period `1..=P`, found by Newton from seeds on
/// the symmetry lines and deduplicated up to cyclic shift.
pub fn find_periodic_orbits(sys: &SystemSpec, max_period: usize) -> Result<Vec<PeriodicOrbit>> {
    let lift = Lift::of(sys)?;
    let seeds = symmetry_seeds();
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for n in 1..=max_period {
        let found: Vec<Point2> = seeds.par_iter().filter_map(|&s| newton(&lift, s, n)).collect();
        let before = orbits.len();
        for p in found {
            if minimal_period(&lift, p, n) != n {
                continue;
            }
            let known = orbits.iter().any(|o| o.period == n && o.points.iter().any(|&q| torus_dist(p, q) < 1e-8));
            if known {
                continue;
            }
            let points = orbit_of(&lift, p, n);
            let r = residue(sys, p, n)?;
            orbits.push(PeriodicOrbit { points, period: n, residue: r, classification: classify(r) });
        }
        if orbits.len() == before {
            warn!("no orbits of period {n} found from {} seeds", seeds.len());
        }
    }
    for o in &mut orbits {
        canonical_rotation(o);
    }
    Ok(orbits)
}

/// Rotates the point list so the lexicographically smallest point leads.
fn canonical_rotation(o: &mut PeriodicOrbit) {
    let k = (0..o.points.len())
        .min_by(|&a, &b| {
            let (p, q) = (o.points[a], o.points[b]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
        })
        .unwrap_or(0);
    o.points.rotate_left(k);
}

fn eigen_unstable(d: &Mat2) -> Option<(f64, [f64; 2])> {
    let tr = d[0][0] + d[1][1];
    let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let lam = if tr >= 0.0 { tr / 2.0 + s } else { tr / 2.0 - s };
    // (d − λ) v = 0, using the better-conditioned row
    let v = if (d[0][1]).abs() + (d[0][0] - lam).abs() >= (d[1][0]).abs() + (d[1][1] - lam).abs() {
        [d[0][1], lam - d[0][0]]
    } else {
        [lam - d[1][1], d[1][0]]
    };
    let n = v[0].hypot(v[1]);
    Some((lam, [v[0] / n, v[1] / n]))
}

/// Unit unstable eigenvector of `Dfⁿ` at each orbit point, normalised to
/// point along `Df vᵢ` from one point to the next.
pub fn unstable_direction(sys: &SystemSpec, orbit: &PeriodicOrbit) -> Result<Vec<[f64; 2]>> {
    if !orbit.is_hyperbolic() {
        return Err(Error::Seeding(format!("orbit of period {} is not hyperbolic", orbit.period)));
    }
    let lift = Lift::of(sys)?;
    let (_, d) = lift.iterate(orbit.points[0], orbit.period);
    let (_, mut v) = eigen_unstable(&d).ok_or_else(|| Error::Seeding("no real unstable eigenvalue".into()))?;
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    let mut out = vec![v];
    for i in 0..orbit.period - 1 {
        let j = lift.jac(orbit.points[i]);
        let w = [j[0][0] * v[0] + j[0][1] * v[1], j[1][0] * v[0] + j[1][1] * v[1]];
        let n = w[0].hypot(w[1]);
        v = [w[0] / n, w[1] / n];
        out.push(v);
    }
    Ok(out)
}

/// Points of the unstable manifold of the fixed point `(0, 0)`, given by
/// the parameter `t` on the fundamental segment `t·v`, `t ∈ [s, λs]`,
/// pushed forward `n` times in lifted coordinates.
struct Manifold {
    lift: Lift,
    lam: f64,
    v: [f64; 2],
    s: f64,
}

impl Manifold {
    fn new(sys: &SystemSpec) -> Result<Self> {
        let lift = Lift::of(sys)?;
        let (lam, mut v) = eigen_unstable(&lift.jac(Point2::new(0.0, 0.0)))
            .ok_or_else(|| Error::Seeding("fixed point is not hyperbolic".into()))?;
        if v[0] < 0.0 {
            v = [-v[0], -v[1]];
        }
        Ok(Manifold { lift, lam, v, s: 1e-9 })
    }

    fn point(&self, n: usize, t: f64) -> Point2 {
        let p = Point2::new(t * self.v[0], t * self.v[1]);
        (0..n).fold(p, |q, _| self.lift.step(q))
    }

    /// Parameters on `[t0, t1]` at depth `n`, refined until consecutive
    /// images are within `cap`.
    fn polyline(&self, n: usize, t0: f64, t1: f64, cap: f64) -> Vec<(f64, Point2)> {
        let mut pts: Vec<(f64, Point2)> = (0..=64)
            .map(|k| {
                let t = t0 * (t1 / t0).powf(k as f64 / 64.0);
                (t, self.point(n, t))
            })
            .collect();
        for _ in 0..40 {
            let mut refined = Vec::with_capacity(pts.len() * 2);
            let mut split = false;
            for w in pts.windows(2) {
                refined.push(w[0]);
                let (a, b) = (w[0].1, w[1].1);
                if (a.x - b.x).hypot(a.y - b.y) > cap {
                    let t = (w[0].0 * w[1].0).sqrt();
                    refined.push((t, self.point(n, t)));
                    split = true;
                }
            }
            refined.push(*pts.last().expect("nonempty"));
            pts = refined;
            if !split || pts.len() > 1 << 22 {
                break;
            }
        }
        pts
    }

    /// Bisection for `g(fⁿ(t·v)) = target` between two parameters.
    fn bisect(&self, n: usize, mut a: f64, mut b: f64, g: &dyn Fn(Point2) -> f64, target: f64) -> f64 {
        let sa = g(self.point(n, a)) - target;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let sm = g(self.point(n, m)) - target;
            if (sm < 0.0) == (sa < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// First parameter on the arc `[t0, t1]` at depth `n` where `g` crosses
    /// an integer.
    fn crossing_at(&self, n: usize, t0: f64, t1: f64, g: &dyn Fn(Point2) -> f64) -> Option<(f64, Point2)> {
        let pts = self.polyline(n, t0, t1, 1e-3);
        for w in pts.windows(2) {
            let (ga, gb) = (g(w[0].1), g(w[1].1));
            let target = if gb > ga { ga.floor() + 1.0 } else { ga.ceil() - 1.0 };
            if (ga < target) != (gb < target) {
                let t = self.bisect(n, w[0].0, w[1].0, g, target);
                return Some((t, self.point(n, t)));
            }
        }
        None
    }

    /// First crossing over increasing depth.
    fn first_crossing(&self, t0: f64, t1: f64, max_n: usize, g: &dyn Fn(Point2) -> f64) -> Option<(usize, f64, Point2)> {
        (0..max_n).find_map(|n| self.crossing_at(n, t0, t1, g).map(|(t, p)| (n, t, p)))
    }
}

/// `(½, y_ε)` and `(u, v)`: the first crossing of the unstable manifold of
/// `(0, 0)` with `x = ½`, and the first point on the manifold arc from there
/// to its image lying on the reversor line `y ≡ 2x`.
pub fn homoclinic_guess(sys: &SystemSpec) -> Result<(Point2, Point2)> {
    let m = Manifold::new(sys)?;
    let (s, ls) = (m.s, m.s * m.lam);
    let (n, t, p) = m
        .first_crossing(s, ls, 80, &|q: Point2| q.x - 0.5)
        .ok_or_else(|| Error::Seeding("unstable manifold never reaches x = 1/2".into()))?;
    let half = Point2::new(0.5, p.y).wrapped();
    // arc from p to f(p): same depth, parameters t..λt
    let (_, uv) = m
        .crossing_at(n, t * (1.0 + 1e-9), t * m.lam, &|q: Point2| q.y - 2.0 * q.x)
        .ok_or_else(|| Error::Seeding("no reversor-line crossing between (1/2, y) and its image".into()))?;
    Ok((half, uv.wrapped()))
}

/// Point reflection `(x, y) ↦ (−x, −y)`, which commutes with the map.
pub fn reflect(p: Point2) -> Point2 {
    Point2::new(-p.x, -p.y).wrapped()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub label: String,
    pub point: Point2,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub points: Vec<LabeledPoint>,
    pub pairs: Vec<SkeletonPair>,
}

impl Skeleton {
    fn push(&mut self, label: String, p: Point2) -> bool {
        let p = p.wrapped();
        if self.points.iter().any(|q| torus_dist(q.point, p) < DEDUP_TOL) {
            return false;
        }
        self.points.push(LabeledPoint { label, point: p });
        true
    }

    fn all_pairs(&mut self) {
        self.pairs.clear();
        for a in &self.points {
            for b in &self.points {
                if a.label != b.label {
                    self.pairs.push(SkeletonPair { src: a.point, dst: b.point, label: format!("{}->{}", a.label, b.label) });
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sk: Skeleton = serde_json::from_str(s)?;
        for p in &sk.pairs {
            if torus_dist(p.src, p.dst) < DEDUP_TOL {
                return Err(Error::Seeding(format!("pair {} has equal endpoints", p.label)));
            }
        }
        Ok(sk)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkeletonMode {
    Homoclinic,
    Periodic,
}

/// Skeleton for the homoclinic construction (five points) or, in periodic
/// mode, those five plus all hyperbolic orbits up to period `P`; pairs are
/// all ordered distinct pairs.
pub fn build_skeleton(sys: &SystemSpec, mode: SkeletonMode, max_period: usize) -> Result<Skeleton> {
    let (h, uv) = homoclinic_guess(sys)?;
    let mut sk = Skeleton::default();
    sk.push("h".into(), h);
    sk.push("h*".into(), reflect(h));
    sk.push("uv".into(), uv);
    sk.push("uv*".into(), reflect(uv));
    sk.push("fix".into(), Point2::new(0.0, 0.0));
    if mode == SkeletonMode::Periodic {
        if max_period == 0 {
            return Err(Error::Config("periodic skeleton needs P >= 1".into()));
        }
        let orbits: Vec<PeriodicOrbit> = find_periodic_orbits(sys, max_period)?.into_iter().filter(|o| o.is_hyperbolic()).collect();
        append_orbits(&mut sk, &orbits);
    }
    sk.all_pairs();
    Ok(sk)
}

fn append_orbits(sk: &mut Skeleton, orbits: &[PeriodicOrbit]) {
    let mut counter = std::collections::HashMap::new();
    for o in orbits {
        let idx = counter.entry(o.period).or_insert(0usize);
        for (k, &p) in o.points.iter().enumerate() {
            sk.push(format!("o{}.{}.{}", o.period, idx, k), p);
        }
        *idx += 1;
    }
}

/// Adds orbit points to the point set without creating new pairs.
pub fn add_orbits_without_connections(skeleton: &Skeleton, orbits: &[PeriodicOrbit]) -> Skeleton {
    let mut sk = skeleton.clone();
    let start = sk.points.iter().filter(|p| p.label.starts_with("extra")).count();
    for (n, o) in orbits.iter().enumerate() {
        for (k, &p) in o.points.iter().enumerate() {
            sk.push(format!("extra{}.{}.{}", o.period, start + n, k), p);
        }
    }
    sk
}
