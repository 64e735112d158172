//! Fixed-point reals with 60 decimal digits after the point, plus the
//! `Real` abstraction that lets the witness computations run either in
//! doubles or in extended precision.
//!
//! A `BigReal` stores round(value * 10^60) as a big integer. All absolute
//! errors are a few units in the last place, which is what the residual
//! analyses need; relative error at extreme magnitudes is not a goal.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Result, SolError};

const DIGITS: u32 = 60;

fn scale() -> &'static BigInt {
    static SCALE: OnceLock<BigInt> = OnceLock::new();
    SCALE.get_or_init(|| BigInt::from(10u32).pow(DIGITS))
}

/// Nearest-integer division, ties away from zero:
/// trunc((2n ± d) / 2d) with the sign-matched adjustment.
fn div_round(n: &BigInt, d: &BigInt) -> BigInt {
    let two_n = n * 2;
    let adj = if n.sign() == d.sign() { two_n + d } else { two_n - d };
    adj / (d * 2)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigReal {
    m: BigInt,
}

impl BigReal {
    pub fn zero() -> Self {
        BigReal { m: BigInt::zero() }
    }

    pub fn one() -> Self {
        BigReal { m: scale().clone() }
    }

    pub fn from_i64(n: i64) -> Self {
        BigReal { m: BigInt::from(n) * scale() }
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        BigReal { m: div_round(&(BigInt::from(n) * scale()), &BigInt::from(d)) }
    }

    /// 10^k as a BigReal; k below -60 underflows to zero.
    pub fn pow10(k: i32) -> Self {
        let e = k + DIGITS as i32;
        if e < 0 {
            return BigReal::zero();
        }
        BigReal { m: BigInt::from(10u32).pow(e as u32) }
    }

    /// Exact conversion of a finite double.
    pub fn from_f64(x: f64) -> Self {
        let rat = BigRational::from_float(x).unwrap_or_else(|| {
            panic!("cannot represent non-finite double {x}");
        });
        BigReal { m: div_round(&(rat.numer() * scale()), rat.denom()) }
    }

    pub fn from_decimal_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(SolError::Domain(format!("empty decimal literal {s:?}")));
        }
        let digits_ok = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if !digits_ok(int_part) || !digits_ok(frac_part) {
            return Err(SolError::Domain(format!("bad decimal literal {s:?}")));
        }
        let mut frac: String = frac_part.chars().take(DIGITS as usize).collect();
        let round_up = frac_part.len() > DIGITS as usize
            && frac_part.as_bytes()[DIGITS as usize] >= b'5';
        while frac.len() < DIGITS as usize {
            frac.push('0');
        }
        let int_val: BigInt = if int_part.is_empty() {
            BigInt::zero()
        } else {
            int_part.parse().map_err(|e| SolError::Domain(format!("{e}")))?
        };
        let frac_val: BigInt = frac.parse().map_err(|e| SolError::Domain(format!("{e}")))?;
        let mut m = int_val * scale() + frac_val;
        if round_up {
            m += 1;
        }
        Ok(BigReal { m: m * sign })
    }

    /// Correctly rounded decimal string with `digits` places after the point.
    pub fn to_decimal(&self, digits: u32) -> String {
        let digits = digits.min(DIGITS);
        let cut = BigInt::from(10u32).pow(DIGITS - digits);
        let n = div_round(&self.m, &cut);
        let neg = n.is_negative();
        let mut body = n.abs().to_string();
        let width = digits as usize + 1;
        if body.len() < width {
            body = format!("{}{}", "0".repeat(width - body.len()), body);
        }
        let point = body.len() - digits as usize;
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push_str(&body[..point]);
        if digits > 0 {
            out.push('.');
            out.push_str(&body[point..]);
        }
        out
    }

    pub fn to_f64(&self) -> f64 {
        self.to_decimal(DIGITS).parse().expect("decimal parse")
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.m.is_negative()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        BigReal { m: &self.m + &rhs.m }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        BigReal { m: &self.m - &rhs.m }
    }

    pub fn neg(&self) -> Self {
        BigReal { m: -&self.m }
    }

    pub fn abs(&self) -> Self {
        BigReal { m: self.m.abs() }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        BigReal { m: div_round(&(&self.m * &rhs.m), scale()) }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        assert!(!rhs.m.is_zero(), "division by zero");
        BigReal { m: div_round(&(&self.m * scale()), &rhs.m) }
    }

    fn half(&self) -> Self {
        BigReal { m: div_round(&self.m, &BigInt::from(2)) }
    }

    /// Nearest integer value, ties away from zero.
    pub fn round(&self) -> Self {
        BigReal { m: div_round(&self.m, scale()) * scale() }
    }

    pub fn sqrt(&self) -> Self {
        assert!(!self.m.is_negative(), "sqrt of negative value");
        let t = &self.m * scale();
        let r = t.sqrt();
        let low = &t - &r * &r;
        let high = (&r + 1u32) * (&r + 1u32) - &t;
        BigReal { m: if low > high { r + 1u32 } else { r } }
    }

    /// exp via halving to |x| < 1/16, Taylor, then repeated squaring.
    pub fn exp(&self) -> Self {
        assert!(
            self.m.abs() < BigInt::from(200u32) * scale(),
            "exp argument out of supported range"
        );
        let sixteenth = BigReal::from_ratio(1, 16);
        let mut y = self.clone();
        let mut k = 0u32;
        while y.abs() > sixteenth {
            y = y.half();
            k += 1;
        }
        let mut acc = BigReal::one();
        let mut term = BigReal::one();
        let mut n = 1i64;
        loop {
            term = term.mul(&y).div(&BigReal::from_i64(n));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
            n += 1;
        }
        for _ in 0..k {
            acc = acc.mul(&acc);
        }
        acc
    }

    /// exp(x) - 1 without cancellation for small x.
    pub fn expm1(&self) -> Self {
        let sixteenth = BigReal::from_ratio(1, 16);
        if self.abs() > sixteenth {
            return self.exp().sub(&BigReal::one());
        }
        let mut acc = BigReal::zero();
        let mut term = BigReal::one();
        let mut n = 1i64;
        loop {
            term = term.mul(self).div(&BigReal::from_i64(n));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
            n += 1;
        }
        acc
    }

    fn ln_newton(&self, seed: f64) -> Self {
        // Newton for e^t = x: t <- t + x e^{-t} - 1; the double seed leaves
        // ~16 correct digits, three iterations overshoot 60.
        let one = BigReal::one();
        let mut t = BigReal::from_f64(seed);
        for _ in 0..3 {
            let corr = self.mul(&t.neg().exp()).sub(&one);
            t = t.add(&corr);
        }
        t
    }

    pub fn ln(&self) -> Self {
        assert!(self.m.is_positive(), "ln of non-positive value");
        self.ln_newton(self.to_f64().ln())
    }

    /// ln(1 + x), seeded against cancellation near zero.
    pub fn ln_1p(&self) -> Self {
        let w = BigReal::one().add(self);
        assert!(w.m.is_positive(), "ln_1p argument at or below -1");
        w.ln_newton(self.to_f64().ln_1p())
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(40))
    }
}

/// The arithmetic the witness engine needs, implemented by `f64` (fast
/// path) and `BigReal` (extended precision).
pub trait Real: Clone + PartialOrd + fmt::Debug {
    fn from_f64(x: f64) -> Self;
    fn from_i64(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn round(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn expm1(&self) -> Self;
    fn ln_1p(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn round(&self) -> Self {
        f64::round(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn expm1(&self) -> Self {
        f64::exp_m1(*self)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
}

impl Real for BigReal {
    fn from_f64(x: f64) -> Self {
        BigReal::from_f64(x)
    }
    fn from_i64(n: i64) -> Self {
        BigReal::from_i64(n)
    }
    fn to_f64(&self) -> f64 {
        BigReal::to_f64(self)
    }
    fn zero() -> Self {
        BigReal::zero()
    }
    fn one() -> Self {
        BigReal::one()
    }
    fn add(&self, rhs: &Self) -> Self {
        BigReal::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        BigReal::sub(self, rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        BigReal::mul(self, rhs)
    }
    fn div(&self, rhs: &Self) -> Self {
        BigReal::div(self, rhs)
    }
    fn neg(&self) -> Self {
        BigReal::neg(self)
    }
    fn abs(&self) -> Self {
        BigReal::abs(self)
    }
    fn round(&self) -> Self {
        BigReal::round(self)
    }
    fn exp(&self) -> Self {
        BigReal::exp(self)
    }
    fn ln(&self) -> Self {
        BigReal::ln(self)
    }
    fn expm1(&self) -> Self {
        BigReal::expm1(self)
    }
    fn ln_1p(&self) -> Self {
        BigReal::ln_1p(self)
    }
    fn sqrt(&self) -> Self {
        BigReal::sqrt(self)
    }
    fn is_zero(&self) -> bool {
        BigReal::is_zero(self)
    }
    fn is_negative(&self) -> bool {
        BigReal::is_negative(self)
    }
}
