//! Exact arithmetic in real quadratic fields Q(sqrt D).
//!
//! Values are `u + v*sqrt(D)` with `u`, `v` arbitrary-precision rationals and
//! `D` a positive square-free integer. Equality is field-wise, sign queries
//! are decided by rational comparison (never through floating point), and
//! decimal rendering is correctly rounded.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SolError};

/// Splits `n` into `(square_free, root)` with `n = square_free * root^2`.
pub fn square_free_decompose(n: u64) -> (u64, u64) {
    let mut n = n;
    let mut square_free = 1u64;
    let mut root = 1u64;
    let mut p = 2u64;
    while p <= n / p {
        if n % p == 0 {
            let mut e = 0u32;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            if e % 2 == 1 {
                square_free *= p;
            }
            root *= p.pow(e / 2);
        }
        p += 1;
    }
    square_free *= n.max(1);
    (square_free, root)
}

/// An element of the real quadratic field Q(sqrt D).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadRat {
    u: BigRational,
    v: BigRational,
    d: u64,
}

impl QuadRat {
    /// Builds `u + v*sqrt(d)`. Square factors of `d` are folded into `v`, so
    /// the stored discriminant is always square-free; a perfect-square `d`
    /// (which would make the value rational in disguise) is rejected.
    pub fn new(u: BigRational, v: BigRational, d: u64) -> Result<Self> {
        if d == 0 {
            return Err(SolError::InvalidDiscriminant {
                d,
                reason: "discriminant must be positive".into(),
            });
        }
        let (square_free, root) = square_free_decompose(d);
        if square_free == 1 {
            return Err(SolError::InvalidDiscriminant {
                d,
                reason: "discriminant must not be a perfect square".into(),
            });
        }
        let v = v * BigRational::from_integer(BigInt::from(root));
        Ok(QuadRat { u, v, d: square_free })
    }

    pub fn from_integers(u: i64, v: i64, d: u64) -> Result<Self> {
        Self::new(
            BigRational::from_integer(BigInt::from(u)),
            BigRational::from_integer(BigInt::from(v)),
            d,
        )
    }

    pub fn rational(u: BigRational, d: u64) -> Result<Self> {
        Self::new(u, BigRational::zero(), d)
    }

    pub fn zero(d: u64) -> Result<Self> {
        Self::rational(BigRational::zero(), d)
    }

    pub fn one(d: u64) -> Result<Self> {
        Self::rational(BigRational::one(), d)
    }

    fn raw(u: BigRational, v: BigRational, d: u64) -> Self {
        QuadRat { u, v, d }
    }

    pub fn u(&self) -> &BigRational {
        &self.u
    }

    pub fn v(&self) -> &BigRational {
        &self.v
    }

    pub fn discriminant(&self) -> u64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.v.is_zero()
    }

    fn check_field(&self, rhs: &Self) -> Result<()> {
        if self.d == rhs.d {
            Ok(())
        } else {
            Err(SolError::MismatchedField { lhs: self.d, rhs: rhs.d })
        }
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self> {
        self.check_field(rhs)?;
        Ok(QuadRat::raw(&self.u + &rhs.u, &self.v + &rhs.v, self.d))
    }

    pub fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        self.check_field(rhs)?;
        Ok(QuadRat::raw(&self.u - &rhs.u, &self.v - &rhs.v, self.d))
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        self.check_field(rhs)?;
        let d = BigRational::from_integer(BigInt::from(self.d));
        let u = &self.u * &rhs.u + &self.v * &rhs.v * &d;
        let v = &self.u * &rhs.v + &self.v * &rhs.u;
        Ok(QuadRat::raw(u, v, self.d))
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        self.checked_mul(&rhs.inverse()?)
    }

    /// Galois conjugate `u - v*sqrt(D)`.
    pub fn conj(&self) -> Self {
        QuadRat::raw(self.u.clone(), -&self.v, self.d)
    }

    /// Field norm `u^2 - D*v^2`, a rational.
    pub fn norm(&self) -> BigRational {
        let d = BigRational::from_integer(BigInt::from(self.d));
        &self.u * &self.u - &self.v * &self.v * d
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.norm();
        if n.is_zero() {
            // D square-free makes the norm vanish only at zero itself.
            return Err(SolError::DivisionByZero { d: self.d });
        }
        let conj = self.conj();
        Ok(QuadRat::raw(conj.u / &n, conj.v / &n, self.d))
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        QuadRat::raw(&self.u * k, &self.v * k, self.d)
    }

    pub fn pow(&self, n: i64) -> Result<Self> {
        let mut base = if n < 0 { self.inverse()? } else { self.clone() };
        let mut exp = n.unsigned_abs();
        let mut acc = QuadRat::raw(BigRational::one(), BigRational::zero(), self.d);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.checked_mul(&base)?;
            }
            base = base.checked_mul(&base)?;
            exp >>= 1;
        }
        Ok(acc)
    }

    /// Exact sign: -1, 0, or 1, decided by comparing `u^2` with `D*v^2`.
    pub fn signum(&self) -> i8 {
        match self.cmp_rational(&BigRational::zero()) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    /// Exact comparison with a rational number.
    pub fn cmp_rational(&self, r: &BigRational) -> Ordering {
        let du = &self.u - r;
        if self.v.is_zero() {
            return du.cmp(&BigRational::zero());
        }
        if du.is_zero() {
            return self.v.cmp(&BigRational::zero());
        }
        let du_pos = du.is_positive();
        let v_pos = self.v.is_positive();
        if du_pos == v_pos {
            return if du_pos { Ordering::Greater } else { Ordering::Less };
        }
        let d = BigRational::from_integer(BigInt::from(self.d));
        let lhs = &du * &du;
        let rhs = &self.v * &self.v * d;
        // Opposite signs: the larger square decides. Equality would force
        // sqrt(D) rational, impossible for square-free D > 1.
        match lhs.cmp(&rhs) {
            Ordering::Equal => Ordering::Equal,
            Ordering::Greater => {
                if du_pos {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
            Ordering::Less => {
                if v_pos {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }

    /// Exact comparison with another element of the same field.
    ///
    /// Panics on a field mismatch; use `checked_sub` + `signum` for fallible
    /// comparison across boundaries.
    pub fn cmp_exact(&self, rhs: &Self) -> Ordering {
        assert_eq!(self.d, rhs.d, "cannot compare elements of different quadratic fields");
        let diff = QuadRat::raw(&self.u - &rhs.u, &self.v - &rhs.v, self.d);
        diff.cmp_rational(&BigRational::zero())
    }

    /// Exact floor.
    pub fn floor(&self) -> BigInt {
        if self.v.is_zero() {
            return self.u.floor().to_integer();
        }
        // Bracket v*sqrt(D) between consecutive multiples of 1/den using an
        // integer square root, then settle the one ambiguous integer exactly.
        let num = self.v.numer().abs();
        let den = self.v.denom().clone();
        let m = (&num * &num * BigInt::from(self.d)).sqrt();
        let lo_num = if self.v.is_positive() { m } else { -(m + BigInt::one()) };
        let lo = &self.u + BigRational::new(lo_num, den);
        let mut candidate = lo.floor().to_integer();
        loop {
            let next = BigRational::from_integer(&candidate + 1);
            if self.cmp_rational(&next) == Ordering::Less {
                break;
            }
            candidate += 1;
        }
        candidate
    }

    /// Nearest integer to `self * 10^digits`, ties away from zero.
    fn round_scaled(&self, digits: u32) -> BigInt {
        let pow = BigInt::from(10u32).pow(digits);
        let sign = self.signum();
        if sign == 0 {
            return BigInt::zero();
        }
        let mag = if sign < 0 {
            QuadRat::raw(-&self.u, -&self.v, self.d)
        } else {
            self.clone()
        };
        let scaled = QuadRat::raw(
            &mag.u * BigRational::from_integer(pow.clone()),
            &mag.v * BigRational::from_integer(pow),
            self.d,
        );
        let fl = scaled.floor();
        let half = &BigRational::from_integer(fl.clone()) + BigRational::new(BigInt::one(), BigInt::from(2));
        let n = if scaled.cmp_rational(&half) == Ordering::Less { fl } else { fl + 1 };
        if sign < 0 {
            -n
        } else {
            n
        }
    }

    fn decimal_unchecked(&self, digits: u32) -> String {
        let n = self.round_scaled(digits);
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

    /// Correctly rounded decimal expansion with `digits` places after the
    /// point. The sign of the rendered string always matches the exact sign.
    pub fn to_decimal(&self, digits: u32) -> Result<String> {
        if digits < 15 {
            return Err(SolError::Domain(format!(
                "decimal precision must be at least 15 digits, got {digits}"
            )));
        }
        Ok(self.decimal_unchecked(digits))
    }

    /// Nearest double. Computed through an exact decimal rounding, so huge
    /// cancellations between `u` and `v*sqrt(D)` cannot leak in.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut digits = 25u32;
        let mut n = self.round_scaled(digits);
        while n.is_zero() && digits < 500 {
            digits *= 2;
            n = self.round_scaled(digits);
        }
        if n.is_zero() {
            return 0.0;
        }
        let len = n.abs().to_string().len();
        if len < 19 {
            digits += (19 - len) as u32;
            n = self.round_scaled(digits);
        }
        format!("{n}e-{digits}").parse::<f64>().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for QuadRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.v.is_zero() {
            return write!(f, "{}", self.u);
        }
        if self.u.is_zero() {
            return write!(f, "{}*sqrt({})", self.v, self.d);
        }
        if self.v.is_negative() {
            write!(f, "{} - {}*sqrt({})", self.u, -&self.v, self.d)
        } else {
            write!(f, "{} + {}*sqrt({})", self.u, self.v, self.d)
        }
    }
}

macro_rules! quad_binop {
    ($trait:ident, $method:ident, $checked:ident, $what:expr) => {
        impl std::ops::$trait for &QuadRat {
            type Output = QuadRat;
            fn $method(self, rhs: &QuadRat) -> QuadRat {
                self.$checked(rhs)
                    .unwrap_or_else(|e| panic!("{} failed: {e}", $what))
            }
        }
    };
}

quad_binop!(Add, add, checked_add, "quadratic addition");
quad_binop!(Sub, sub, checked_sub, "quadratic subtraction");
quad_binop!(Mul, mul, checked_mul, "quadratic multiplication");

impl std::ops::Neg for &QuadRat {
    type Output = QuadRat;
    fn neg(self) -> QuadRat {
        QuadRat::raw(-&self.u, -&self.v, self.d)
    }
}

#[derive(Serialize, Deserialize)]
struct QuadRatRepr {
    u: String,
    v: String,
    #[serde(rename = "D")]
    d: u64,
}

impl Serialize for QuadRat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        QuadRatRepr {
            u: self.u.to_string(),
            v: self.v.to_string(),
            d: self.d,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuadRat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = QuadRatRepr::deserialize(deserializer)?;
        let u = BigRational::from_str(&repr.u)
            .map_err(|e| D::Error::custom(format!("bad rational {:?}: {e}", repr.u)))?;
        let v = BigRational::from_str(&repr.v)
            .map_err(|e| D::Error::custom(format!("bad rational {:?}: {e}", repr.v)))?;
        QuadRat::new(u, v, repr.d).map_err(|e| D::Error::custom(e.to_string()))
    }
}
