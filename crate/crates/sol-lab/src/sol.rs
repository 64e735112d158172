//! The Sol group in global coordinates: multiplication, inversion, the
//! exponential and logarithm maps, one-parameter subgroups, and the
//! left-invariant metric.
//!
//! Model: (x1,y1,z1)(x2,y2,z2) = (x1 + e^{z1} x2, y1 + e^{-z1} y2, z1 + z2)
//! with metric ds^2 = e^{-2z} dx^2 + e^{2z} dy^2 + dz^2.

use std::fmt;

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SolError};
use crate::util::fmt_f64;

/// A group element (x, y, z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A Lie-algebra element in the left-invariant frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Serialize for TangentVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(3))?;
        seq.serialize_element(&fmt_f64(self.a1))?;
        seq.serialize_element(&fmt_f64(self.a2))?;
        seq.serialize_element(&fmt_f64(self.a3))?;
        seq.end()
    }
}

/// Diagonal metric coefficients at a base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTensor {
    pub gxx: f64,
    pub gyy: f64,
    pub gzz: f64,
}

impl SolPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        SolPoint { x, y, z }
    }

    pub fn identity() -> Self {
        SolPoint { x: 0.0, y: 0.0, z: 0.0 }
    }

    pub fn mul(&self, rhs: &SolPoint) -> SolPoint {
        SolPoint {
            x: self.x + self.z.exp() * rhs.x,
            y: self.y + (-self.z).exp() * rhs.y,
            z: self.z + rhs.z,
        }
    }

    pub fn inverse(&self) -> SolPoint {
        SolPoint {
            x: -(-self.z).exp() * self.x,
            y: -self.z.exp() * self.y,
            z: -self.z,
        }
    }

    pub fn conjugate_by(&self, g: &SolPoint) -> SolPoint {
        g.mul(self).mul(&g.inverse())
    }

    pub fn sup_dist(&self, rhs: &SolPoint) -> f64 {
        (self.x - rhs.x)
            .abs()
            .max((self.y - rhs.y).abs())
            .max((self.z - rhs.z).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl fmt::Display for SolPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Serialize for SolPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(3))?;
        seq.serialize_element(&fmt_f64(self.x))?;
        seq.serialize_element(&fmt_f64(self.y))?;
        seq.serialize_element(&fmt_f64(self.z))?;
        seq.end()
    }
}

struct SolPointVisitor;

impl<'de> Visitor<'de> for SolPointVisitor {
    type Value = SolPoint;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "an array [x, y, z] of numbers or decimal strings")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<SolPoint, A::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Coord {
            Num(f64),
            Text(String),
        }
        let mut take = |label: &str| -> std::result::Result<f64, A::Error> {
            let c: Coord = seq
                .next_element()?
                .ok_or_else(|| serde::de::Error::custom(format!("missing {label} coordinate")))?;
            match c {
                Coord::Num(v) => Ok(v),
                Coord::Text(s) => s
                    .trim()
                    .parse()
                    .map_err(|e| serde::de::Error::custom(format!("bad {label} coordinate: {e}"))),
            }
        };
        let x = take("x")?;
        let y = take("y")?;
        let z = take("z")?;
        Ok(SolPoint { x, y, z })
    }
}

impl<'de> Deserialize<'de> for SolPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_seq(SolPointVisitor)
    }
}

/// (e^w - 1)/w, stable through w = 0.
///
/// Below 1e-10 the ratio is 1 to double precision; up to 1e-6 a second-order
/// Taylor step avoids the cancellation in exp_m1(w)/w.
pub fn expm1_over(w: f64) -> f64 {
    let a = w.abs();
    if a < 1e-10 {
        1.0
    } else if a < 1e-6 {
        1.0 + w / 2.0 + w * w / 6.0
    } else {
        w.exp_m1() / w
    }
}

/// g^t for the one-parameter subgroup through g.
pub fn one_param(g: &SolPoint, t: f64) -> SolPoint {
    let z = g.z;
    // Both component ratios collapse to t as z -> 0.
    let rx = expm1_over(t * z) / expm1_over(z);
    let ry = expm1_over(-t * z) / expm1_over(-z);
    SolPoint {
        x: g.x * t * rx,
        y: g.y * t * ry,
        z: t * z,
    }
}

/// exp(t * v) in group coordinates.
pub fn sol_exp(v: &TangentVector, t: f64) -> SolPoint {
    let w = v.a3 * t;
    SolPoint {
        x: v.a1 * t * expm1_over(w),
        y: v.a2 * t * expm1_over(-w),
        z: w,
    }
}

/// The unique v with exp(v) = g.
pub fn sol_log(g: &SolPoint) -> TangentVector {
    TangentVector {
        a1: g.x / expm1_over(g.z),
        a2: g.y / expm1_over(-g.z),
        a3: g.z,
    }
}

pub fn metric_at(p: &SolPoint) -> MetricTensor {
    MetricTensor {
        gxx: (-2.0 * p.z).exp(),
        gyy: (2.0 * p.z).exp(),
        gzz: 1.0,
    }
}

impl MetricTensor {
    /// Quadratic form applied to a coordinate displacement.
    pub fn norm(&self, dx: f64, dy: f64, dz: f64) -> f64 {
        (self.gxx * dx * dx + self.gyy * dy * dy + self.gzz * dz * dz).sqrt()
    }
}

/// First-order distance from p to q: coordinate displacement measured in
/// the metric at p.
pub fn eval_metric_proximity(p: &SolPoint, q: &SolPoint) -> f64 {
    metric_at(p).norm(q.x - p.x, q.y - p.y, q.z - p.z)
}

/// Polyline length with the metric frozen at each segment midpoint.
pub fn curve_length(samples: &[SolPoint]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(SolError::Domain(format!(
            "curve length needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut total = 0.0;
    for pair in samples.windows(2) {
        let (p, q) = (&pair[0], &pair[1]);
        let mid = SolPoint::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0, (p.z + q.z) / 2.0);
        let m = metric_at(&mid);
        total += m.norm(q.x - p.x, q.y - p.y, q.z - p.z);
    }
    Ok(total)
}
