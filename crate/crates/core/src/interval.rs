//! Interval arithmetic with outward rounding.
//!
//! Every operation returns an interval that contains the exact real result
//! over all inputs. Rounding is emulated in round-to-nearest mode with
//! error-free transformations: the rounding error of each endpoint is
//! recovered exactly (TwoSum / FMA residuals) and the endpoint is moved one
//! ulp outward only when the exact value lies beyond it. Exact operations
//! therefore stay exact.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the FMA/TwoSum residuals may be inexact due to
/// gradual underflow, so results are widened unconditionally.
const TINY: f64 = 1.0e-290;

/// A closed interval `[lo, hi]` of finite doubles.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvScalar {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for IvScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for IvScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Arithmetic operation selector for [`iv_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[inline]
fn down_if(v: f64, exact_below: bool) -> f64 {
    if !v.is_finite() {
        return if v == f64::INFINITY { f64::MAX } else { v };
    }
    if exact_below || v.abs() < TINY {
        v.next_down()
    } else {
        v
    }
}

#[inline]
fn up_if(v: f64, exact_above: bool) -> f64 {
    if !v.is_finite() {
        return if v == f64::NEG_INFINITY { f64::MIN } else { v };
    }
    if exact_above || v.abs() < TINY {
        v.next_up()
    } else {
        v
    }
}

/// Sum rounded toward negative infinity.
#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    down_if(s, err < 0.0)
}

/// Sum rounded toward positive infinity.
#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    up_if(s, err > 0.0)
}

/// Product rounded toward negative infinity.
#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    let err = a.mul_add(b, -p);
    down_if(p, err < 0.0)
}

/// Product rounded toward positive infinity.
#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    let err = a.mul_add(b, -p);
    up_if(p, err > 0.0)
}

/// Quotient rounded toward negative infinity (`b != 0`).
#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    // a - q*b is exact; the true quotient exceeds q iff r/b > 0.
    let r = (-q).mul_add(b, a);
    down_if(q, (r < 0.0) != (b < 0.0) && r != 0.0)
}

/// Quotient rounded toward positive infinity (`b != 0`).
#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    let r = (-q).mul_add(b, a);
    up_if(q, (r > 0.0) != (b < 0.0) && r != 0.0)
}

impl IvScalar {
    /// Builds `[lo, hi]`, rejecting NaN, infinities and inverted bounds.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInterval(format!("non-finite endpoint [{lo}, {hi}]")));
        }
        if lo > hi {
            return Err(Error::InvalidInterval(format!("lo > hi in [{lo}, {hi}]")));
        }
        Ok(IvScalar { lo, hi })
    }

    /// Degenerate interval `[v, v]`. Panics on non-finite input.
    pub fn point(v: f64) -> Self {
        assert!(v.is_finite(), "point interval from non-finite value");
        IvScalar { lo: v, hi: v }
    }

    pub(crate) fn from_bounds_unchecked(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi && lo.is_finite() && hi.is_finite());
        IvScalar { lo, hi }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Midpoint (nonrigorous).
    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    /// Upper bound on the width.
    pub fn width(&self) -> f64 {
        add_up(self.hi, -self.lo)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &IvScalar) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &IvScalar) -> IvScalar {
        IvScalar { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn checked_div(self, rhs: IvScalar) -> Result<IvScalar> {
        if rhs.contains_zero() {
            return Err(Error::InvalidInterval(format!("division by {rhs:?} containing zero")));
        }
        let c = [
            (div_down(self.lo, rhs.lo), div_up(self.lo, rhs.lo)),
            (div_down(self.lo, rhs.hi), div_up(self.lo, rhs.hi)),
            (div_down(self.hi, rhs.lo), div_up(self.hi, rhs.lo)),
            (div_down(self.hi, rhs.hi), div_up(self.hi, rhs.hi)),
        ];
        let lo = c.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        IvScalar::new(lo, hi)
    }

    /// Multiplication by an exactly representable scalar.
    pub fn scale(self, k: f64) -> IvScalar {
        self * IvScalar::point(k)
    }
}

impl Add for IvScalar {
    type Output = IvScalar;
    fn add(self, rhs: IvScalar) -> IvScalar {
        IvScalar { lo: add_down(self.lo, rhs.lo), hi: add_up(self.hi, rhs.hi) }
    }
}

impl Sub for IvScalar {
    type Output = IvScalar;
    fn sub(self, rhs: IvScalar) -> IvScalar {
        IvScalar { lo: add_down(self.lo, -rhs.hi), hi: add_up(self.hi, -rhs.lo) }
    }
}

impl Neg for IvScalar {
    type Output = IvScalar;
    fn neg(self) -> IvScalar {
        IvScalar { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for IvScalar {
    type Output = IvScalar;
    fn mul(self, rhs: IvScalar) -> IvScalar {
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        let lo = mul_down(a, c).min(mul_down(a, d)).min(mul_down(b, c)).min(mul_down(b, d));
        let hi = mul_up(a, c).max(mul_up(a, d)).max(mul_up(b, c)).max(mul_up(b, d));
        IvScalar { lo, hi }
    }
}

impl Div for IvScalar {
    type Output = IvScalar;
    /// Panics when the divisor contains zero; see [`IvScalar::checked_div`].
    fn div(self, rhs: IvScalar) -> IvScalar {
        self.checked_div(rhs).expect("interval division by zero-containing divisor")
    }
}

/// Dispatching form of the four basic operations.
pub fn iv_arith(a: IvScalar, b: IvScalar, op: ArithOp) -> Result<IvScalar> {
    match op {
        ArithOp::Add => Ok(a + b),
        ArithOp::Sub => Ok(a - b),
        ArithOp::Mul => Ok(a * b),
        ArithOp::Div => a.checked_div(b),
    }
}

/// Axis-aligned rectangle `x × y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IvRect {
    pub x: IvScalar,
    pub y: IvScalar,
}

impl IvRect {
    pub fn new(x: IvScalar, y: IvScalar) -> Self {
        IvRect { x, y }
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        self.x.contains(px) && self.y.contains(py)
    }

    pub fn is_subset(&self, other: &IvRect) -> bool {
        self.x.is_subset(&other.x) && self.y.is_subset(&other.y)
    }

    pub fn hull(&self, other: &IvRect) -> IvRect {
        IvRect { x: self.x.hull(&other.x), y: self.y.hull(&other.y) }
    }
}

/// Enclosure of `sin(2πt)` for a single `t ∈ [0, 1/4]`, padded by a
/// relative error of 2^-50 (four ulps at the result's scale).
fn sin2pi_quarter(t: f64) -> (f64, f64) {
    debug_assert!((0.0..=0.25).contains(&t));
    if t == 0.0 {
        return (0.0, 0.0);
    }
    if t == 0.25 {
        return (1.0, 1.0);
    }
    let v = (std::f64::consts::TAU * t).sin();
    // sin(2πt) ≥ 4t on [0, 1/4] and the relative error of the evaluation is
    // below 3 ulps there, so a relative pad of 2^-50 is an upper bound.
    let pad = v.abs() * (1.0 / (1u64 << 50) as f64) + f64::MIN_POSITIVE;
    let lo = (v - pad).next_down().max(0.0);
    let hi = (v + pad).next_up().min(1.0);
    (lo, hi)
}

/// Enclosure of `sin(2πr)` for `r ∈ [0, 1]`.
fn sin2pi_reduced(r: f64) -> (f64, f64) {
    let r = if r >= 1.0 { 0.0 } else { r };
    if r <= 0.25 {
        sin2pi_quarter(r)
    } else if r <= 0.5 {
        sin2pi_quarter(0.5 - r)
    } else if r <= 0.75 {
        let (lo, hi) = sin2pi_quarter(r - 0.5);
        (-hi, -lo)
    } else {
        let (lo, hi) = sin2pi_quarter(1.0 - r);
        (-hi, -lo)
    }
}

/// Enclosure of `sin(2πx)` for a single double `x`.
fn sin2pi_point(x: f64) -> (f64, f64) {
    // x - floor(x) rounds for negative x of small magnitude, so the
    // reduced argument is only known to lie in [r0, r1].
    let fl = x.floor();
    let r = x - fl;
    let bb = r - x;
    if (x - (r - bb)) + (-fl - bb) == 0.0 {
        return sin2pi_reduced(r);
    }
    let (r0, r1) = (add_down(x, -fl), add_up(x, -fl));
    let (a0, b0) = sin2pi_reduced(r0);
    let (a1, b1) = sin2pi_reduced(r1);
    // |d/dr sin(2πr)| ≤ 2π < 7; the width is one ulp, so the product is exact
    let pad = 7.0 * (r1 - r0);
    ((a0.min(a1) - pad).next_down().max(-1.0), (b0.max(b1) + pad).next_up().min(1.0))
}

/// Whether `[lo, hi]` contains a point of the form `c + n` for an integer `n`.
fn contains_shifted(lo: f64, hi: f64, c: f64) -> bool {
    let n = (lo - c).ceil();
    n + c <= hi
}

/// Rigorous enclosure of `{ sin(2πx) : x ∈ a }`, always inside `[-1, 1]`.
pub fn iv_sin2pi(a: IvScalar) -> IvScalar {
    if a.hi - a.lo >= 1.0 || a.lo.abs() > 1.0e15 || a.hi.abs() > 1.0e15 {
        return IvScalar { lo: -1.0, hi: 1.0 };
    }
    let (l0, h0) = sin2pi_point(a.lo);
    let (l1, h1) = sin2pi_point(a.hi);
    let mut lo = l0.min(l1);
    let mut hi = h0.max(h1);
    if contains_shifted(a.lo, a.hi, 0.25) {
        hi = 1.0;
    }
    if contains_shifted(a.lo, a.hi, 0.75) {
        lo = -1.0;
    }
    IvScalar { lo, hi }
}

/// Enclosure of `cos(2πx)` via `cos(2πx) = sin(2π(x + 1/4))`.
pub fn iv_cos2pi(a: IvScalar) -> IvScalar {
    iv_sin2pi(a + IvScalar::point(0.25))
}

/// Reduces an interval modulo 1 into one or two pieces inside `[0, 1]`.
pub fn iv_wrap1(a: IvScalar) -> Vec<IvScalar> {
    if a.hi - a.lo >= 1.0 || a.width() >= 1.0 {
        return vec![IvScalar { lo: 0.0, hi: 1.0 }];
    }
    let shift = IvScalar::point(a.lo.floor());
    let r = a - shift;
    let lo = r.lo.max(0.0);
    if r.hi <= 1.0 {
        vec![IvScalar { lo, hi: r.hi }]
    } else {
        let tail = (r - IvScalar::point(1.0)).hi.max(0.0);
        vec![IvScalar { lo, hi: 1.0 }, IvScalar { lo: 0.0, hi: tail.min(1.0) }]
    }
}

/// Parses a decimal string into the tightest enclosing interval.
///
/// The nearest double is widened by one ulp on the side where the decimal
/// value could lie, so the result always contains the decimal number.
pub fn parse_outward(s: &str) -> Result<IvScalar> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line: 0, msg: format!("not a number: {s:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line: 0, msg: format!("non-finite number: {s:?}") });
    }
    if decimal_is_exact(s.trim(), v) {
        return Ok(IvScalar::point(v));
    }
    IvScalar::new(v.next_down(), v.next_up())
}

/// True when the shortest round-trip text of `v` equals the decimal `s`
/// (both normalised), i.e. `v` is exactly the decimal value only when its
/// binary expansion terminates; checked with a dyadic test on the digits.
fn decimal_is_exact(s: &str, v: f64) -> bool {
    // A decimal d = m / 10^k equals v exactly iff v * 10^k is the integer m.
    // Only short decimals with integral scaling are recognised.
    let s = s.strip_prefix('+').unwrap_or(s);
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    if body.contains(['e', 'E']) {
        return false;
    }
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let frac = frac.trim_end_matches('0');
    if frac.len() > 15 || int.len() > 15 {
        return false;
    }
    let digits = format!("{int}{frac}");
    let Ok(m) = digits.parse::<u64>() else { return false };
    let scale = 10u64.pow(frac.len() as u32);
    // v * scale exact?
    let vs = v.abs() * scale as f64;
    let err = v.abs().mul_add(scale as f64, -vs);
    err == 0.0 && vs == m as f64 && (m as f64) as u64 == m && (v < 0.0) == (neg && m != 0)
}
