//! The maps under study: the standard map on the torus, the Hénon map and a
//! piecewise-affine horseshoe on the plane.
//!
//! Every map exposes a nonrigorous point evaluation and a rigorous
//! rectangle enclosure. Enclosures are returned *unwrapped*: on the torus the
//! rectangle may stick out of `[0,1]²` and is reduced modulo 1 by the
//! consumer (see [`SystemSpec::eval_enclosure`] for the wrapped form).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{iv_cos2pi, iv_sin2pi, iv_wrap1, IvRect, IvScalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Reduces both coordinates into `[0, 1)`.
    pub fn wrapped(self) -> Self {
        Point2 { x: wrap_unit(self.x), y: wrap_unit(self.y) }
    }
}

pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed difference `b - a` reduced to `[-1/2, 1/2)`.
pub fn torus_delta(a: f64, b: f64) -> f64 {
    let d = b - a;
    d - (d + 0.5).floor()
}

/// Max-norm distance on the unit torus.
pub fn torus_dist(p: Point2, q: Point2) -> f64 {
    torus_delta(p.x, q.x).abs().max(torus_delta(p.y, q.y).abs())
}

pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Phase space of a system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Domain {
    /// The unit torus `[0,1)²` with wrap-around in both coordinates.
    Torus,
    /// A planar rectangle; points mapped outside it have left the domain.
    Plane { root: IvRect },
}

impl Domain {
    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus)
    }

    /// The root rectangle of the box grid.
    pub fn root(&self) -> IvRect {
        match self {
            Domain::Torus => {
                let u = IvScalar::new(0.0, 1.0).expect("static interval");
                IvRect::new(u, u)
            }
            Domain::Plane { root } => *root,
        }
    }
}

/// Behaviour shared by every system the box machinery can work with.
pub trait PlanarMap: Sync {
    fn domain(&self) -> Domain;

    /// Floating-point image; wrapped into `[0,1)²` on the torus.
    fn eval_point(&self, p: Point2) -> Point2;

    /// Rigorous enclosure of `f(r)` as a union of unwrapped rectangles.
    fn enclose(&self, r: &IvRect) -> Vec<IvRect>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Standard,
    Henon,
    HorseshoeModel,
}

impl std::str::FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(SystemKind::Standard),
            "henon" => Ok(SystemKind::Henon),
            "horseshoe" | "horseshoe-model" => Ok(SystemKind::HorseshoeModel),
            other => Err(Error::InvalidSystem(format!("unknown map {other:?}"))),
        }
    }
}

/// A concrete system with (interval) parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub params: Vec<IvScalar>,
    pub domain: Domain,
}

/// Root rectangle used for the horseshoe model.
pub fn horseshoe_root() -> IvRect {
    let side = IvScalar::new(-0.5, 1.5).expect("static interval");
    IvRect::new(side, side)
}

fn two_pi() -> IvScalar {
    IvScalar::new(std::f64::consts::TAU, std::f64::consts::TAU.next_up()).expect("static interval")
}

impl SystemSpec {
    /// Standard map with parameter interval `eps`.
    pub fn standard(eps: IvScalar) -> Result<Self> {
        let s = SystemSpec { kind: SystemKind::Standard, params: vec![eps], domain: Domain::Torus };
        s.validate()?;
        Ok(s)
    }

    pub fn henon(a: IvScalar, b: IvScalar) -> Self {
        let side = IvScalar::new(-2.5, 2.5).expect("static interval");
        SystemSpec {
            kind: SystemKind::Henon,
            params: vec![a, b],
            domain: Domain::Plane { root: IvRect::new(side, side) },
        }
    }

    pub fn horseshoe() -> Self {
        SystemSpec {
            kind: SystemKind::HorseshoeModel,
            params: vec![],
            domain: Domain::Plane { root: horseshoe_root() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SystemKind::Standard => {
                if self.params.len() != 1 {
                    return Err(Error::InvalidSystem("standard map takes exactly one parameter".into()));
                }
                if self.params[0].lo() <= 0.0 {
                    return Err(Error::InvalidSystem("standard map needs eps > 0".into()));
                }
                if !self.domain.is_torus() {
                    return Err(Error::InvalidSystem("standard map lives on the torus".into()));
                }
            }
            SystemKind::Henon => {
                if self.params.len() != 2 {
                    return Err(Error::InvalidSystem("Hénon map takes parameters a, b".into()));
                }
                if self.domain.is_torus() {
                    return Err(Error::InvalidSystem("Hénon map lives on the plane".into()));
                }
            }
            SystemKind::HorseshoeModel => {
                if self.domain.is_torus() {
                    return Err(Error::InvalidSystem("horseshoe model lives on the plane".into()));
                }
            }
        }
        Ok(())
    }

    /// Midpoint of the first parameter (ε for the standard map).
    pub fn eps_mid(&self) -> f64 {
        self.params.first().map(|p| p.mid()).unwrap_or(0.0)
    }

    pub fn jacobian(&self, p: Point2) -> Result<Mat2> {
        match self.kind {
            SystemKind::Standard => {
                let eps = self.eps_mid();
                let c = eps * (std::f64::consts::TAU * p.x).cos();
                Ok([[1.0 + c, 1.0], [c, 1.0]])
            }
            SystemKind::Henon => {
                let a = self.params[0].mid();
                let b = self.params[1].mid();
                Ok([[-2.0 * a * p.x, 1.0], [b, 0.0]])
            }
            SystemKind::HorseshoeModel => {
                if p.x <= 0.5 {
                    Ok([[3.0, 0.0], [0.0, 1.0 / 3.0]])
                } else {
                    Ok([[-3.0, 0.0], [0.0, -1.0 / 3.0]])
                }
            }
        }
    }

    /// Generating function `h(x, x') = ½Δ² − (ε/4π²) cos(2πx)` with the
    /// minimal lift `Δ ∈ [-½, ½)` of `x' − x`.
    pub fn action_h(&self, x: f64, x_next: f64) -> Result<f64> {
        if self.kind != SystemKind::Standard {
            return Err(Error::Unsupported("action is only defined for the standard map".into()));
        }
        let eps = self.eps_mid();
        let d = torus_delta(x, x_next);
        Ok(0.5 * d * d - eps / (4.0 * std::f64::consts::PI.powi(2)) * (std::f64::consts::TAU * x).cos())
    }

    /// Upper bound `K* = ⅛ + ε/(4π²)` on `|h|` under the minimal lift.
    pub fn action_bound(&self) -> Result<f64> {
        if self.kind != SystemKind::Standard {
            return Err(Error::Unsupported("action is only defined for the standard map".into()));
        }
        let eps = self.params[0].hi();
        Ok(0.125 + eps / (4.0 * std::f64::consts::PI.powi(2)))
    }

    /// Enclosure of `f(r)` reduced into the domain. On the torus wrapping may
    /// split each rectangle into up to four pieces.
    pub fn eval_enclosure(&self, r: &IvRect) -> Vec<IvRect> {
        let raw = self.enclose(r);
        if !self.domain.is_torus() {
            return raw;
        }
        let mut out = Vec::new();
        for rect in raw {
            for x in iv_wrap1(rect.x) {
                for y in iv_wrap1(rect.y) {
                    out.push(IvRect::new(x, y));
                }
            }
        }
        out
    }
}

/// Sub-boxes per side for the standard map. The image of a box is a sheared
/// parallelogram, so one interval hull covers several times its area.
const STANDARD_SPLIT: usize = 2;

/// `n × n` sub-rectangles covering `r`; neighbours share their endpoints
/// exactly, so the union is all of `r`.
fn split_rect(r: &IvRect, n: usize) -> Vec<IvRect> {
    let cuts = |a: IvScalar| -> Vec<f64> {
        let (lo, hi) = (a.lo(), a.hi());
        let mut c: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * (k as f64 / n as f64)).collect();
        c[0] = lo;
        c[n] = hi;
        c
    };
    let (xs, ys) = (cuts(r.x), cuts(r.y));
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(IvRect::new(
                IvScalar::from_bounds_unchecked(xs[i], xs[i + 1]),
                IvScalar::from_bounds_unchecked(ys[j], ys[j + 1]),
            ));
        }
    }
    out
}

fn standard_enclosure(eps: IvScalar, r: &IvRect) -> IvRect {
    let k = eps.checked_div(two_pi()).expect("2π interval excludes zero");
    let t = k * iv_sin2pi(r.x);
    let y = r.y + t;
    let x = r.x + y;
    IvRect::new(x, y)
}

/// Horseshoe: `x ≤ ⅓ ↦ (3x, y/3)`, `x ≥ ⅔ ↦ (3 − 3x, 1 − y/3)`, and the
/// middle third folds out of the unit square through
/// `(1 + s(1 − s), y/3 + s(1 − 2y/3))` with `s = 3x − 1`, which keeps the map
/// continuous.
pub fn horseshoe_enclosure(r: &IvRect) -> Vec<IvRect> {
    let one = IvScalar::point(1.0);
    let three = IvScalar::point(3.0);
    let third = one.checked_div(three).expect("nonzero");
    let two_thirds = IvScalar::point(2.0).checked_div(three).expect("nonzero");
    let y3 = r.y * third;
    let mut out = Vec::with_capacity(2);
    if r.x.lo() <= third.hi() {
        let x = IvScalar::from_bounds_unchecked(r.x.lo(), r.x.hi().min(third.hi()));
        out.push(IvRect::new(x * three, y3));
    }
    if r.x.hi() >= third.lo() && r.x.lo() <= two_thirds.hi() {
        let x = IvScalar::from_bounds_unchecked(r.x.lo().max(third.lo()), r.x.hi().min(two_thirds.hi()));
        let s = x * three - one;
        out.push(IvRect::new(one + s * (one - s), y3 + s * (one - y3 * IvScalar::point(2.0))));
    }
    if r.x.hi() >= two_thirds.lo() {
        let x = IvScalar::from_bounds_unchecked(r.x.lo().max(two_thirds.lo()), r.x.hi());
        out.push(IvRect::new(three - x * three, one - y3));
    }
    out
}

fn horseshoe_point(p: Point2) -> Point2 {
    if p.x <= 1.0 / 3.0 {
        Point2::new(3.0 * p.x, p.y / 3.0)
    } else if p.x >= 2.0 / 3.0 {
        Point2::new(3.0 - 3.0 * p.x, 1.0 - p.y / 3.0)
    } else {
        let s = 3.0 * p.x - 1.0;
        Point2::new(1.0 + s * (1.0 - s), p.y / 3.0 + s * (1.0 - 2.0 * p.y / 3.0))
    }
}

impl PlanarMap for SystemSpec {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn eval_point(&self, p: Point2) -> Point2 {
        match self.kind {
            SystemKind::Standard => {
                let eps = self.eps_mid();
                let t = eps / std::f64::consts::TAU * (std::f64::consts::TAU * p.x).sin();
                let y = p.y + t;
                Point2::new(p.x + y, y).wrapped()
            }
            SystemKind::Henon => {
                let a = self.params[0].mid();
                let b = self.params[1].mid();
                Point2::new(1.0 - a * p.x * p.x + p.y, b * p.x)
            }
            SystemKind::HorseshoeModel => horseshoe_point(p),
        }
    }

    fn enclose(&self, r: &IvRect) -> Vec<IvRect> {
        match self.kind {
            SystemKind::Standard => {
                split_rect(r, STANDARD_SPLIT).iter().map(|q| standard_enclosure(self.params[0], q)).collect()
            }
            SystemKind::Henon => {
                let (a, b) = (self.params[0], self.params[1]);
                // x² via a single-use square keeps the enclosure tight
                let sq = square(r.x);
                vec![IvRect::new(IvScalar::point(1.0) - a * sq + r.y, b * r.x)]
            }
            SystemKind::HorseshoeModel => horseshoe_enclosure(r),
        }
    }
}

fn square(x: IvScalar) -> IvScalar {
    if x.lo() >= 0.0 || x.hi() <= 0.0 {
        x * x
    } else {
        let m = (x * x).hi();
        IvScalar::from_bounds_unchecked(0.0, m)
    }
}

/// Enclosure of `cos(2πx)`, re-exported for callers computing derivative
/// bounds.
pub fn cos2pi(x: IvScalar) -> IvScalar {
    iv_cos2pi(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn std2() -> SystemSpec {
        SystemSpec::standard(IvScalar::point(2.0)).unwrap()
    }

    #[test]
    fn standard_fixed_points() {
        for eps in [0.3, 1.0, 2.0] {
            let s = SystemSpec::standard(IvScalar::point(eps)).unwrap();
            assert_eq!(s.eval_point(Point2::new(0.0, 0.0)), Point2::new(0.0, 0.0));
            let q = s.eval_point(Point2::new(0.5, 0.0));
            assert!(torus_dist(q, Point2::new(0.5, 0.0)) < 1e-15);
        }
    }

    #[test]
    fn standard_quarter_point() {
        let q = std2().eval_point(Point2::new(0.25, 0.0));
        let t = 2.0 / std::f64::consts::TAU;
        assert!((q.x - (0.25 + t)).abs() < 1e-15);
        assert!((q.y - t).abs() < 1e-15);
        assert!((q.x - 0.5683).abs() < 1e-4 && (q.y - 0.3183).abs() < 1e-4);
    }

    #[test]
    fn jacobian_values_and_area_preservation() {
        let s = std2();
        assert_eq!(s.jacobian(Point2::new(0.0, 0.0)).unwrap(), [[3.0, 1.0], [2.0, 1.0]]);
        let j = s.jacobian(Point2::new(0.25, 0.7)).unwrap();
        assert!((j[0][0] - 1.0).abs() < 1e-15 && j[1][0].abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = Point2::new(rng.gen(), rng.gen());
            let j = s.jacobian(p).unwrap();
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!((det - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn point_box_enclosure_contains_fixed_point() {
        let r = IvRect::new(IvScalar::point(0.0), IvScalar::point(0.0));
        let e = std2().eval_enclosure(&r);
        assert!(e.iter().any(|r| r.contains(0.0, 0.0)));
    }

    #[test]
    fn interval_parameter_enclosure_contains_sampled_parameters() {
        let s = SystemSpec::standard(IvScalar::new(1.995, 2.0).unwrap()).unwrap();
        let r = IvRect::new(IvScalar::new(0.3, 0.31).unwrap(), IvScalar::new(0.6, 0.61).unwrap());
        let e = s.eval_enclosure(&r);
        for eps in [1.995, 1.9975, 2.0] {
            let p = SystemSpec::standard(IvScalar::point(eps)).unwrap();
            for i in 0..=10 {
                for j in 0..=10 {
                    let q = p.eval_point(Point2::new(0.3 + 0.001 * i as f64, 0.6 + 0.001 * j as f64));
                    assert!(e.iter().any(|r| r.contains(q.x, q.y)), "eps {eps} point {q:?}");
                }
            }
        }
    }

    #[test]
    fn enclosure_is_inclusion_monotone() {
        let s = std2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (x0, y0): (f64, f64) = (rng.gen(), rng.gen());
            let (w, h): (f64, f64) = (rng.gen::<f64>() * 0.05, rng.gen::<f64>() * 0.05);
            let outer = IvRect::new(IvScalar::new(x0, x0 + w).unwrap(), IvScalar::new(y0, y0 + h).unwrap());
            let inner = IvRect::new(
                IvScalar::new(x0 + 0.25 * w, x0 + 0.5 * w).unwrap(),
                IvScalar::new(y0 + 0.1 * h, y0 + 0.9 * h).unwrap(),
            );
            let a = s.enclose(&inner)[0];
            let b = s.enclose(&outer)[0];
            assert!(a.is_subset(&b));
        }
    }

    #[test]
    fn action_properties() {
        let s0 = SystemSpec::standard(IvScalar::point(1e-300)).unwrap();
        assert!(s0.action_h(0.3, 0.3).unwrap().abs() < 1e-300);
        let s = std2();
        let bound = s.action_bound().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let h = s.action_h(rng.gen(), rng.gen()).unwrap();
            assert!(h.abs() <= bound);
        }
        assert!(SystemSpec::horseshoe().action_h(0.1, 0.2).is_err());
    }

    #[test]
    fn generating_function_recovers_map() {
        let s = std2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let d = 1e-6;
        for _ in 0..50 {
            let x: f64 = rng.gen_range(0.05..0.95);
            let y: f64 = rng.gen_range(-0.3..0.3);
            let q = std2().eval_point(Point2::new(x, wrap_unit(y)));
            let yn = y + 2.0 / std::f64::consts::TAU * (std::f64::consts::TAU * x).sin();
            let xn = x + yn;
            // keep the lift within the minimal-lift window
            if (xn - x).abs() >= 0.45 {
                continue;
            }
            let dxn = (s.action_h(x, xn + d).unwrap() - s.action_h(x, xn - d).unwrap()) / (2.0 * d);
            let dx = (s.action_h(x + d, xn).unwrap() - s.action_h(x - d, xn).unwrap()) / (2.0 * d);
            assert!((dxn - yn).abs() < 1e-6, "y' mismatch");
            assert!((-dx - y).abs() < 1e-6, "y mismatch");
            assert!(torus_dist(q, Point2::new(xn, yn).wrapped()) < 1e-12);
        }
    }

    #[test]
    fn discrete_euler_lagrange_along_orbit() {
        let s = SystemSpec::standard(IvScalar::point(0.6)).unwrap();
        let mut xs = vec![0.1f64];
        let mut y = 0.05f64;
        for _ in 0..4 {
            let x = *xs.last().unwrap();
            y += 0.6 / std::f64::consts::TAU * (std::f64::consts::TAU * x).sin();
            xs.push(x + y);
        }
        let d = 1e-6;
        for k in 1..xs.len() - 1 {
            let g = |xk: f64| s.action_h(xs[k - 1], xk).unwrap() + s.action_h(xk, xs[k + 1]).unwrap();
            let deriv = (g(xs[k] + d) - g(xs[k] - d)) / (2.0 * d);
            assert!(deriv.abs() < 1e-5, "k={k} deriv={deriv}");
        }
    }

    #[test]
    fn horseshoe_branches() {
        let inside = IvRect::new(IvScalar::new(0.1, 0.2).unwrap(), IvScalar::new(0.3, 0.6).unwrap());
        let e = horseshoe_enclosure(&inside);
        assert_eq!(e.len(), 1);
        assert!(e[0].x.contains(0.3) && e[0].x.contains(0.6) && e[0].y.contains(0.1) && e[0].y.contains(0.2));
        let straddle = IvRect::new(IvScalar::new(0.3, 0.4).unwrap(), IvScalar::new(0.0, 0.1).unwrap());
        let e = horseshoe_enclosure(&straddle);
        assert_eq!(e.len(), 2);
        // the pieces meet along x = 1
        assert!(e[0].x.contains(1.0) && e[1].x.contains(1.0));
        let fold = IvRect::new(IvScalar::new(0.5, 0.5).unwrap(), IvScalar::new(0.0, 0.0).unwrap());
        let e = horseshoe_enclosure(&fold);
        assert!(e.len() == 1 && e[0].x.contains(1.25) && e[0].y.contains(0.5));
    }

    #[test]
    fn validation() {
        assert!(SystemSpec::standard(IvScalar::point(0.0)).is_err());
        let mut s = std2();
        s.domain = Domain::Plane { root: horseshoe_root() };
        assert!(s.validate().is_err());
        assert!("standard".parse::<SystemKind>().is_ok());
        assert!("lorenz".parse::<SystemKind>().is_err());
    }
}
