//! High-precision fixed-point oracle (256 fractional bits) used by the
//! interval and enclosure tests. Independent of the crate's f64 code paths.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::sync::OnceLock;

const BITS: u32 = 256;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dyadic(BigInt);

fn one() -> BigInt {
    BigInt::one() << BITS
}

impl Dyadic {
    pub fn from_f64(v: f64) -> Dyadic {
        assert!(v.is_finite());
        if v == 0.0 {
            return Dyadic(BigInt::zero());
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        let m: BigInt = BigInt::from(mant) * BigInt::from(sign);
        let shift = e + BITS as i64;
        if shift >= 0 {
            Dyadic(m << shift as usize)
        } else {
            // Truncation toward -inf; only hit for |v| < 2^-204.
            Dyadic(m.div_floor(&(BigInt::one() << (-shift) as usize)))
        }
    }

    pub fn from_int(n: i64) -> Dyadic {
        Dyadic(BigInt::from(n) << BITS)
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        Dyadic(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Dyadic) -> Dyadic {
        Dyadic(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Dyadic) -> Dyadic {
        Dyadic((&self.0 * &o.0) >> BITS)
    }

    pub fn div_int(&self, k: i64) -> Dyadic {
        Dyadic(self.0.div_floor(&BigInt::from(k)))
    }

    pub fn div(&self, o: &Dyadic) -> Dyadic {
        Dyadic((&self.0 << BITS).div_floor(&o.0))
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic(-&self.0)
    }

    pub fn floor_int(&self) -> BigInt {
        self.0.div_floor(&one())
    }

    /// `self − floor(self)`, in `[0, 1)`.
    pub fn fract(&self) -> Dyadic {
        Dyadic(self.0.mod_floor(&one()))
    }

    pub fn cmp_f64(&self, v: f64) -> Ordering {
        self.cmp(&Dyadic::from_f64(v))
    }

    pub fn ge_f64(&self, v: f64) -> bool {
        self.cmp_f64(v) != Ordering::Less
    }

    pub fn le_f64(&self, v: f64) -> bool {
        self.cmp_f64(v) != Ordering::Greater
    }

    fn cmp_decimal(&self, s: &str) -> Ordering {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        let m: BigInt = format!("{int}{frac}").parse().unwrap();
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        (&self.0 * scale).cmp(&(m << BITS))
    }

    pub fn lt_decimal(&self, s: &str) -> bool {
        self.cmp_decimal(s) == Ordering::Less
    }

    pub fn gt_decimal(&self, s: &str) -> bool {
        self.cmp_decimal(s) == Ordering::Greater
    }

    pub fn to_f64(&self) -> f64 {
        let hi = &self.0 >> (BITS - 64);
        hi.to_f64().unwrap() / 2f64.powi(64)
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic(self.0.abs())
    }
}

fn atan_inv(k: i64) -> Dyadic {
    // atan(1/k) = Σ (-1)^n / ((2n+1) k^(2n+1))
    let mut sum = BigInt::zero();
    let k2 = BigInt::from(k * k);
    let mut term = one() / BigInt::from(k);
    let mut n: i64 = 0;
    while !term.is_zero() {
        let t = &term / BigInt::from(2 * n + 1);
        if n % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
        term /= &k2;
        n += 1;
    }
    Dyadic(sum)
}

pub fn pi() -> &'static Dyadic {
    static PI: OnceLock<Dyadic> = OnceLock::new();
    PI.get_or_init(|| {
        let a = atan_inv(5);
        let b = atan_inv(239);
        Dyadic(a.0 * 16 - b.0 * 4)
    })
}

/// sin(θ) by Taylor series (θ of moderate size).
pub fn sin(theta: &Dyadic) -> Dyadic {
    let x2 = theta.mul(theta);
    let mut term = theta.clone();
    let mut sum = theta.clone();
    let mut n: i64 = 1;
    loop {
        term = term.mul(&x2).div_int((2 * n) * (2 * n + 1)).neg();
        if term.0.is_zero() {
            break;
        }
        sum = sum.add(&term);
        n += 1;
    }
    sum
}

/// sin(2πx) for an exact dyadic x.
pub fn sin2pi_d(x: &Dyadic) -> Dyadic {
    let r = x.fract();
    let two_pi = Dyadic(pi().0.clone() * 2);
    // Center the argument to keep the series short.
    let theta = two_pi.mul(&r.sub(&Dyadic(one() >> 1)));
    sin(&theta).neg()
}

pub fn cos2pi_d(x: &Dyadic) -> Dyadic {
    sin2pi_d(&x.add(&Dyadic(one() >> 2)))
}

/// sin(2πx) rounded to a double; for spot comparisons only.
pub fn sin2pi(x: f64) -> f64 {
    sin2pi_d(&Dyadic::from_f64(x)).to_f64()
}

/// Exact standard-map image (mod 1) of a double point for a double ε.
pub fn standard_map(x: f64, y: f64, eps: f64) -> (Dyadic, Dyadic) {
    let xd = Dyadic::from_f64(x);
    let yd = Dyadic::from_f64(y);
    let k = Dyadic::from_f64(eps).div(&Dyadic(pi().0.clone() * 2));
    let t = k.mul(&sin2pi_d(&xd));
    let yn = yd.add(&t);
    let xn = xd.add(&yn);
    (xn.fract(), yn.fract())
}
