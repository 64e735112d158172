//! Escape-witness machinery: solves for the parameters where connection
//! curves cross a fixed coordinate level, tests coset membership of the
//! crossings through integer residuals, and certifies that no finite coset
//! family can absorb the whole curve sequence. Also hosts the density
//! probe that measures how finely lattice translates fill a box.
//!
//! Frame convention: a standard witness point sits on the x = 0 plane. The
//! mirrored case (y = 0) is handled by the flip (x, y, z) -> (y, x, -z),
//! which is an automorphism of the group; the engine always runs in the
//! standard frame and reports are mapped back through the flip.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bigreal::{BigReal, Real};
use crate::connections::{CosetPoint, SearchWindow};
use crate::error::{Result, SolError};
use crate::lattice::SemidirectLattice;
use crate::quadratic::square_free_decompose;
use crate::sol::SolPoint;
use crate::util::{run_chunked, ser_f64, ser_f64_opt};

/// Arithmetic backing for the residual analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Big50,
}

impl Precision {
    /// Integrality tolerance for coset residuals.
    pub fn residual_tol(self) -> f64 {
        match self {
            Precision::Double => 1e-9,
            Precision::Big50 => 1e-40,
        }
    }
}

impl FromStr for Precision {
    type Err = SolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "big50" => Ok(Precision::Big50),
            other => Err(SolError::Domain(format!(
                "unknown precision {other:?}, expected \"double\" or \"big50\""
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Big50 => "big50",
        })
    }
}

const LINE_TOL: f64 = 1e-9;

/// A witness point with its height sequence. The point must lie on a
/// coordinate plane: x = 0 (standard) or y = 0 (mirrored), with the other
/// planar coordinate nonzero.
#[derive(Clone, Debug)]
pub struct WitnessConfig {
    lattice: Arc<SemidirectLattice>,
    g: SolPoint,
    mirrored: bool,
    rs: Vec<i64>,
    t1: f64,
    precision: Precision,
    residual_tol: f64,
    line_search_bound: i64,
}

impl WitnessConfig {
    pub fn new(
        lattice: Arc<SemidirectLattice>,
        g: SolPoint,
        imax: usize,
        t1: f64,
        precision: Precision,
    ) -> Result<Self> {
        if !g.is_finite() {
            return Err(SolError::Domain(format!("witness point {g} is not finite")));
        }
        let x_zero = g.x == 0.0;
        let y_zero = g.y == 0.0;
        if x_zero == y_zero {
            return Err(SolError::Domain(format!(
                "witness point {g} must have exactly one vanishing planar coordinate"
            )));
        }
        if !(0.0 < t1 && t1 < 1.0) {
            return Err(SolError::Domain(format!("t1 must lie in (0, 1), got {t1}")));
        }
        let mirrored = y_zero;
        // a height-zero representative is slid one lattice height along its
        // own coset so every zeta below is nonzero
        let g = if g.z == 0.0 {
            let s = lattice.s();
            if mirrored {
                SolPoint::new(g.x, 0.0, -s)
            } else {
                SolPoint::new(0.0, g.y, s)
            }
        } else {
            g
        };
        let cfg = WitnessConfig {
            lattice,
            g,
            mirrored,
            rs: (1..=imax as i64).collect(),
            t1,
            precision,
            residual_tol: precision.residual_tol(),
            line_search_bound: 50,
        };
        cfg.check_heights()?;
        Ok(cfg)
    }

    /// Replaces the default height sequence r_i = i.
    pub fn with_r_sequence(mut self, rs: Vec<i64>) -> Result<Self> {
        if rs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SolError::Domain(
                "height sequence must be strictly increasing".into(),
            ));
        }
        self.rs = rs;
        self.check_heights()?;
        Ok(self)
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(SolError::Domain(format!(
                "residual tolerance must be positive, got {tol}"
            )));
        }
        self.residual_tol = tol;
        Ok(self)
    }

    fn check_heights(&self) -> Result<()> {
        let s = self.lattice.s();
        let z = self.frame_z();
        for &r in &self.rs {
            let zeta = z + s * r as f64;
            if zeta == 0.0 {
                return Err(SolError::RepresentativeDegeneracy(format!(
                    "height index r = {r} puts the translate on the zero level"
                )));
            }
            if zeta.abs() > 180.0 {
                return Err(SolError::Domain(format!(
                    "height index r = {r} exceeds the analysis range"
                )));
            }
        }
        Ok(())
    }

    fn frame_y(&self) -> f64 {
        if self.mirrored {
            self.g.x
        } else {
            self.g.y
        }
    }

    fn frame_z(&self) -> f64 {
        if self.mirrored {
            -self.g.z
        } else {
            self.g.z
        }
    }

    pub fn lattice(&self) -> &Arc<SemidirectLattice> {
        &self.lattice
    }

    pub fn point(&self) -> SolPoint {
        self.g
    }

    pub fn mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn imax(&self) -> usize {
        self.rs.len()
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn heights(&self) -> &[i64] {
        &self.rs
    }

    fn slot(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.rs.len() {
            return Err(SolError::Domain(format!(
                "index {i} outside the witness range 1..={}",
                self.rs.len()
            )));
        }
        Ok(i - 1)
    }
}

/// Level-solving core over a chosen arithmetic. Works entirely in the
/// standard frame.
struct Engine<R: Real> {
    y: R,
    z: R,
    s: R,
    t1: R,
    gap: R,
    rs: Vec<i64>,
    zetas: Vec<R>,
    em1s: Vec<R>,
    tol: R,
    post_tol: R,
}

impl<R: Real> Engine<R> {
    fn build(cfg: &WitnessConfig) -> Result<Self> {
        let tr = cfg.lattice.matrix().trace() as i64;
        let disc = (tr as i128 * tr as i128 - 4) as u64;
        let (d, root) = square_free_decompose(disc);
        let lam = R::from_i64(tr)
            .add(&R::from_i64(root as i64).mul(&R::from_i64(d as i64).sqrt()))
            .div(&R::from_i64(2));
        let s = lam.ln();
        let z = R::from_f64(cfg.frame_z());
        let zetas: Vec<R> = cfg
            .rs
            .iter()
            .map(|&r| z.add(&s.mul(&R::from_i64(r))))
            .collect();
        let em1s: Vec<R> = zetas.iter().map(|zeta| zeta.neg().expm1()).collect();
        Ok(Engine {
            y: R::from_f64(cfg.frame_y()),
            z,
            gap: s.neg().expm1().neg(),
            s,
            t1: R::from_f64(cfg.t1),
            rs: cfg.rs.clone(),
            zetas,
            em1s,
            tol: R::from_f64(cfg.residual_tol),
            post_tol: R::from_f64(1e-12),
        })
    }

    /// y-coordinate of the curve toward translate slot `idx` at parameter t.
    fn level(&self, idx: usize, t: &R) -> R {
        let num = t.mul(&self.zetas[idx]).neg().expm1();
        self.y.mul(&num).div(&self.em1s[idx])
    }

    fn third(&self, idx: usize, t: &R) -> R {
        t.mul(&self.zetas[idx])
    }

    /// Inverts the level map: the unique t with level(idx, t) = target.
    fn solve_t(&self, idx: usize, target: &R) -> Result<R> {
        let w = target.div(&self.y);
        if !(w > R::zero()) {
            return Err(SolError::NoSolution(format!(
                "level {:e} is on the wrong side of zero for this curve",
                target.to_f64()
            )));
        }
        let u = w.mul(&self.em1s[idx]);
        if !(R::one().add(&u) > R::zero()) {
            return Err(SolError::NoSolution(format!(
                "curve saturates below level {:e}",
                target.to_f64()
            )));
        }
        let log_term = u.ln_1p();
        if log_term.abs() > R::from_i64(180) {
            return Err(SolError::Domain(format!(
                "level {:e} is outside the analysis range",
                target.to_f64()
            )));
        }
        let t = log_term.neg().div(&self.zetas[idx]);
        let back = self.level(idx, &t);
        let mut scale = target.abs();
        if scale < R::one() {
            scale = R::one();
        }
        if back.sub(target).abs() > scale.mul(&self.post_tol) {
            return Err(SolError::InvariantViolation(format!(
                "level re-evaluation drifted: {:e} vs {:e}",
                back.to_f64(),
                target.to_f64()
            )));
        }
        Ok(t)
    }

    /// Height residual of two crossings in lattice units.
    fn residual(&self, idx_i: usize, idx_j: usize, ti: &R, tj: &R) -> R {
        self.third(idx_j, tj).sub(&self.third(idx_i, ti)).div(&self.s)
    }

    fn is_integer(&self, residual: &R) -> bool {
        residual.sub(&residual.round()).abs() < self.tol
    }

    /// Ratio of shifted exponential terms for two slots at a common level.
    fn ratio(&self, idx_i: usize, idx_j: usize, target: &R) -> R {
        let w = self.y.div(target);
        self.em1s[idx_i].add(&w).div(&self.em1s[idx_j].add(&w))
    }

    /// Prefactor of the geometric envelope; None when the level does not
    /// contract (w <= 1 makes the envelope vacuous).
    fn envelope_const(&self, target: &R) -> Option<R> {
        let w = self.y.div(target);
        if w > R::one() {
            Some(self.z.neg().exp().div(&w.sub(&R::one())))
        } else {
            None
        }
    }

    fn envelope(&self, c: &R, r: i64) -> R {
        c.mul(&self.s.mul(&R::from_i64(r)).neg().exp())
    }
}

/// Fiber trace of a coset: the curves live on the plane x = 0, and a coset
/// meets that plane along at most one discrete line (level, anchor + s·Z)
/// because the slope is irrational.
#[derive(Clone, Debug, Serialize)]
pub struct CaptureLine {
    pub p: i64,
    pub q: i64,
    #[serde(serialize_with = "ser_f64")]
    pub level: f64,
    #[serde(serialize_with = "ser_f64")]
    pub anchor: f64,
}

fn capture_lines(
    lat: &SemidirectLattice,
    rep_frame: &SolPoint,
    mirrored: bool,
    bound: i64,
    tol: f64,
) -> Vec<CaptureLine> {
    // in the mirrored frame the two eigenvector slopes trade places
    let (slope, co) = if mirrored {
        (lat.p21_f(), lat.p12_f())
    } else {
        (lat.p12_f(), lat.p21_f())
    };
    if rep_frame.x == 0.0 {
        // only the trivial lattice translate stays on the fiber
        return vec![CaptureLine { p: 0, q: 0, level: rep_frame.y, anchor: rep_frame.z }];
    }
    let decay = (-rep_frame.z).exp();
    let kappa = -rep_frame.x * decay;
    let mut lines = Vec::new();
    for n in -bound..=bound {
        let m_real = kappa - slope * n as f64;
        let m = m_real.round();
        if (m_real - m).abs() < tol && m.abs() <= bound as f64 {
            let m = m as i64;
            let level = rep_frame.y + decay * (co * m as f64 + n as f64);
            let (p, q) = if mirrored { (n, m) } else { (m, n) };
            lines.push(CaptureLine { p, q, level, anchor: rep_frame.z });
        }
    }
    lines
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexRecord {
    pub r: i64,
    #[serde(serialize_with = "ser_f64_opt")]
    pub t: Option<f64>,
    #[serde(serialize_with = "ser_f64_opt")]
    pub third: Option<f64>,
    #[serde(serialize_with = "ser_f64_opt")]
    pub rtilde: Option<f64>,
    pub integer: Option<bool>,
    #[serde(serialize_with = "ser_f64_opt")]
    pub ratio_error: Option<f64>,
    #[serde(serialize_with = "ser_f64_opt")]
    pub ratio_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaptureRecord {
    pub index: usize,
    pub line: usize,
    #[serde(serialize_with = "ser_f64")]
    pub t: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rtilde: f64,
    pub r: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CosetAnalysis {
    pub coset: usize,
    pub lines: Vec<CaptureLine>,
    pub captures: Vec<CaptureRecord>,
    /// Index pairs past the envelope threshold claimed by the same coset:
    /// their residual gap is forced to zero while their heights strictly
    /// increase, so a common coset is impossible.
    pub contradictions: Vec<[usize; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    NonBlockedAtScale,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NonBlockedAtScale => "NON_BLOCKED_AT_SCALE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub precision: Precision,
    pub mirrored: bool,
    pub imax: usize,
    #[serde(serialize_with = "ser_f64")]
    pub t1: f64,
    #[serde(serialize_with = "ser_f64")]
    pub s: f64,
    #[serde(serialize_with = "ser_f64")]
    pub z: f64,
    #[serde(serialize_with = "ser_f64")]
    pub y: f64,
    #[serde(serialize_with = "ser_f64_opt")]
    pub ytilde: Option<f64>,
    pub indices: Vec<IndexRecord>,
    pub cosets: Vec<CosetAnalysis>,
    /// First index from which the envelope beats the spectral gap.
    pub i0: Option<usize>,
    /// An index no supplied coset captures.
    pub escape_witness: Option<usize>,
    pub verdict: Verdict,
}

/// Runs the witness analysis of the curve sequence against a finite coset
/// family. The verdict is NON_BLOCKED_AT_SCALE when some index escapes
/// every coset and the envelope threshold is reached inside the window;
/// anything weaker stays INCONCLUSIVE.
pub fn certify_nonblockable(
    cfg: &WitnessConfig,
    cosets: &[CosetPoint],
) -> Result<WitnessReport> {
    if cosets.is_empty() {
        return Err(SolError::Domain(
            "certification needs at least one coset".into(),
        ));
    }
    for (i, c) in cosets.iter().enumerate() {
        if c.lattice.matrix() != cfg.lattice.matrix() {
            return Err(SolError::Domain(format!(
                "coset {i} belongs to a different lattice"
            )));
        }
    }
    match cfg.precision {
        Precision::Double => run_engine::<f64>(cfg, cosets),
        Precision::Big50 => run_engine::<BigReal>(cfg, cosets),
    }
}

/// Same certification for a y = 0 witness point; the standard engine is
/// applied through the mirror flip.
pub fn mirrored_case(cfg: &WitnessConfig, cosets: &[CosetPoint]) -> Result<WitnessReport> {
    if !cfg.mirrored {
        return Err(SolError::Domain(
            "mirrored analysis expects a witness point with y = 0".into(),
        ));
    }
    certify_nonblockable(cfg, cosets)
}

fn run_engine<R: Real>(cfg: &WitnessConfig, cosets: &[CosetPoint]) -> Result<WitnessReport> {
    let eng = Engine::<R>::build(cfg)?;
    let n = eng.rs.len();
    let sgn = if cfg.mirrored { -1.0 } else { 1.0 };

    let ytilde = if n == 0 { None } else { Some(eng.level(0, &eng.t1)) };
    let mut ts: Vec<Option<R>> = Vec::with_capacity(n);
    if let Some(seed) = &ytilde {
        for idx in 0..n {
            match eng.solve_t(idx, seed) {
                Ok(t) => ts.push(Some(t)),
                Err(SolError::NoSolution(_)) => ts.push(None),
                Err(e) => return Err(e),
            }
        }
    }

    let envelope_c = ytilde.as_ref().and_then(|seed| eng.envelope_const(seed));
    let i0 = envelope_c
        .as_ref()
        .and_then(|c| (0..n).find(|&idx| eng.envelope(c, eng.rs[idx]) < eng.gap))
        .map(|idx| idx + 1);

    let mut indices = Vec::with_capacity(n);
    for idx in 0..n {
        let mut rec = IndexRecord {
            r: eng.rs[idx],
            t: ts[idx].as_ref().map(|t| t.to_f64()),
            third: ts[idx].as_ref().map(|t| sgn * eng.third(idx, t).to_f64()),
            rtilde: None,
            integer: None,
            ratio_error: None,
            ratio_bound: None,
        };
        if idx + 1 < n {
            if let (Some(ti), Some(tj)) = (&ts[idx], &ts[idx + 1]) {
                let rt = eng.residual(idx, idx + 1, ti, tj);
                rec.integer = Some(eng.is_integer(&rt));
                rec.rtilde = Some(sgn * rt.to_f64());
            }
            if let Some(seed) = &ytilde {
                let lhs = eng.ratio(idx, idx + 1, seed);
                rec.ratio_error = Some(lhs.sub(&R::one()).abs().to_f64());
                rec.ratio_bound = Some(match &envelope_c {
                    Some(c) => eng.envelope(c, eng.rs[idx]).to_f64(),
                    None => f64::INFINITY,
                });
            }
        }
        indices.push(rec);
    }

    let mut captured = vec![false; n];
    let mut analyses = Vec::with_capacity(cosets.len());
    for (ci, coset) in cosets.iter().enumerate() {
        let rep = coset.rep_float();
        let rep_frame = if cfg.mirrored {
            SolPoint::new(rep.y, rep.x, -rep.z)
        } else {
            rep
        };
        let lines = capture_lines(
            &cfg.lattice,
            &rep_frame,
            cfg.mirrored,
            cfg.line_search_bound,
            LINE_TOL,
        );
        let mut captures = Vec::new();
        for (li, line) in lines.iter().enumerate() {
            let level = R::from_f64(line.level);
            let anchor = R::from_f64(line.anchor);
            for idx in 0..n {
                let t = match eng.solve_t(idx, &level) {
                    Ok(t) => t,
                    Err(SolError::NoSolution(_)) => continue,
                    Err(SolError::Domain(_)) => continue,
                    Err(e) => return Err(e),
                };
                if !(t > R::zero() && t < R::one()) {
                    continue;
                }
                let rt = eng.third(idx, &t).sub(&anchor).div(&eng.s);
                if eng.is_integer(&rt) {
                    captured[idx] = true;
                    captures.push(CaptureRecord {
                        index: idx + 1,
                        line: li,
                        t: t.to_f64(),
                        rtilde: sgn * rt.to_f64(),
                        r: (sgn * rt.round().to_f64()) as i64,
                    });
                }
            }
        }
        let mut beyond: Vec<usize> = captures
            .iter()
            .map(|c| c.index)
            .filter(|&i| i0.map_or(false, |i0| i >= i0))
            .collect();
        beyond.sort_unstable();
        beyond.dedup();
        let mut contradictions = Vec::new();
        for a in 0..beyond.len() {
            for b in a + 1..beyond.len() {
                contradictions.push([beyond[a], beyond[b]]);
            }
        }
        let lines = lines
            .into_iter()
            .map(|l| CaptureLine { anchor: sgn * l.anchor, ..l })
            .collect();
        analyses.push(CosetAnalysis { coset: ci, lines, captures, contradictions });
    }

    let escape_witness = (0..n).find(|&idx| !captured[idx]).map(|idx| idx + 1);
    let verdict = if escape_witness.is_some() && i0.is_some() {
        Verdict::NonBlockedAtScale
    } else {
        Verdict::Inconclusive
    };
    Ok(WitnessReport {
        precision: cfg.precision,
        mirrored: cfg.mirrored,
        imax: n,
        t1: cfg.t1,
        s: eng.s.to_f64(),
        z: cfg.g.z,
        y: cfg.frame_y(),
        ytilde: ytilde.as_ref().map(|v| v.to_f64()),
        indices,
        cosets: analyses,
        i0,
        escape_witness,
        verdict,
    })
}

/// Point of the i-th curve at parameter t, in the original frame.
pub fn curve_point(cfg: &WitnessConfig, i: usize, t: f64) -> Result<SolPoint> {
    let idx = cfg.slot(i)?;
    if !t.is_finite() {
        return Err(SolError::Domain(format!("curve parameter {t} is not finite")));
    }
    let eng = Engine::<f64>::build(cfg)?;
    let level = eng.level(idx, &t);
    let third = eng.third(idx, &t);
    Ok(if cfg.mirrored {
        SolPoint::new(level, 0.0, -third)
    } else {
        SolPoint::new(0.0, level, third)
    })
}

/// Parameter where the i-th curve attains the given planar level.
pub fn solve_t(cfg: &WitnessConfig, i: usize, level: f64) -> Result<f64> {
    let idx = cfg.slot(i)?;
    Engine::<f64>::build(cfg)?.solve_t(idx, &level)
}

/// Residual height gap between crossings i and j in lattice units, and
/// whether it is an integer at the configured tolerance.
pub fn coset_residual(
    cfg: &WitnessConfig,
    i: usize,
    j: usize,
    ti: f64,
    tj: f64,
) -> Result<(f64, bool)> {
    let idx_i = cfg.slot(i)?;
    let idx_j = cfg.slot(j)?;
    let eng = Engine::<f64>::build(cfg)?;
    let rt = eng.residual(idx_i, idx_j, &ti, &tj);
    let sgn = if cfg.mirrored { -1.0 } else { 1.0 };
    Ok((sgn * rt, eng.is_integer(&rt)))
}

/// Exponential-term ratio for slots i and j at a common level, with its
/// geometric envelope. The envelope is infinite when the level does not
/// contract toward the witness level.
pub fn ratio_check(cfg: &WitnessConfig, i: usize, j: usize, level: f64) -> Result<(f64, f64)> {
    let idx_i = cfg.slot(i)?;
    let idx_j = cfg.slot(j)?;
    let eng = Engine::<f64>::build(cfg)?;
    let lhs = eng.ratio(idx_i, idx_j, &level);
    let bound = match eng.envelope_const(&level) {
        Some(c) => eng.envelope(&c, eng.rs[idx_i].min(eng.rs[idx_j])),
        None => f64::INFINITY,
    };
    Ok((lhs, bound))
}

/// Axis-aligned probe region.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProbeBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl ProbeBox {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, z0: f64, z1: f64) -> Result<Self> {
        let b = ProbeBox { x0, x1, y0, y1, z0, z1 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x0, self.x1, self.y0, self.y1, self.z0, self.z1];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SolError::Domain("probe box must be finite".into()));
        }
        if self.x1 < self.x0 || self.y1 < self.y0 || self.z1 < self.z0 {
            return Err(SolError::Domain(
                "probe box has inverted extents".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WindowUsed {
    pub pmax: i64,
    pub qmax: i64,
    pub rmax: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairMiss {
    #[serde(serialize_with = "ser_f64")]
    pub x: f64,
    #[serde(serialize_with = "ser_f64")]
    pub z: f64,
    /// Number of grid targets in the y column over this (x, z) pair.
    pub column_size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetRecord {
    #[serde(serialize_with = "ser_f64")]
    pub x: f64,
    #[serde(serialize_with = "ser_f64")]
    pub z: f64,
    pub p: i64,
    pub q: i64,
    pub r: i64,
    #[serde(serialize_with = "ser_f64")]
    pub err: f64,
    pub column_size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    #[serde(serialize_with = "ser_f64")]
    pub eps: f64,
    #[serde(serialize_with = "ser_f64")]
    pub grid_step: f64,
    pub window: SearchWindow,
    pub targets_total: usize,
    pub pair_count: usize,
    pub hits: usize,
    #[serde(serialize_with = "ser_f64")]
    pub coverage: f64,
    pub window_used: WindowUsed,
    pub misses: Vec<PairMiss>,
    pub misses_truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<TargetRecord>>,
}

fn axis_grid(a0: f64, a1: f64, step: f64) -> Vec<f64> {
    if a1 == a0 {
        return vec![a0];
    }
    let n = ((a1 - a0) / step).ceil() as usize + 1;
    (0..n)
        .map(|k| a0 + (a1 - a0) * k as f64 / (n - 1) as f64)
        .collect()
}

struct PairHit {
    p: i64,
    q: i64,
    r: i64,
    err: f64,
}

/// Smallest-window translate within eps of the x-coordinate at the given
/// height; the y-coordinate is always matchable, so a target reduces to
/// its (x, z) pair. Minimality is by max(|p|, |q|, |r|), ties by (r, p, q).
fn minimal_hit(
    lat: &SemidirectLattice,
    x: f64,
    z: f64,
    eps: f64,
    w: &SearchWindow,
) -> Option<PairHit> {
    let s = lat.s();
    let p12 = lat.p12_f();
    let mut best: Option<((u64, i64, i64, i64), PairHit)> = None;
    for r in -w.rmax..=w.rmax {
        let f = (z - s * r as f64).exp();
        let lo = (x - eps) / f;
        let hi = (x + eps) / f;
        for q in -w.qmax..=w.qmax {
            let plo = (lo - p12 * q as f64).ceil().max(-(w.pmax as f64));
            let phi = (hi - p12 * q as f64).floor().min(w.pmax as f64);
            if plo > phi {
                continue;
            }
            let p = plo.max(0.0).min(phi);
            let err = (f * (p + p12 * q as f64) - x).abs();
            if err > eps {
                continue;
            }
            let p = p as i64;
            let norm = p.unsigned_abs().max(q.unsigned_abs()).max(r.unsigned_abs());
            let key = (norm, r, p, q);
            if best.as_ref().map_or(true, |(k, _)| key < *k) {
                best = Some((key, PairHit { p, q, r, err }));
            }
        }
    }
    best.map(|(_, h)| h)
}

const MISS_CAP: usize = 1000;

/// Measures how much of an eps/2 target grid over the box is reached by
/// lattice translates within the window, to tolerance eps in the
/// x-coordinate at matching height.
pub fn density_probe(
    lat: &SemidirectLattice,
    bx: &ProbeBox,
    eps: f64,
    w: &SearchWindow,
    threads: usize,
    record_targets: bool,
) -> Result<DensityReport> {
    if !(eps > 0.0) {
        return Err(SolError::Domain(format!("eps must be positive, got {eps}")));
    }
    bx.validate()?;
    w.validate()?;
    let step = eps / 2.0;
    let xs = axis_grid(bx.x0, bx.x1, step);
    let ys = axis_grid(bx.y0, bx.y1, step);
    let zs = axis_grid(bx.z0, bx.z1, step);
    let column = ys.len();

    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| zs.iter().map(move |&z| (x, z)))
        .collect();
    let results = run_chunked(threads, &pairs, |&(x, z)| minimal_hit(lat, x, z, eps, w));

    let mut hits = 0usize;
    let mut window_used = WindowUsed { pmax: 0, qmax: 0, rmax: 0 };
    let mut misses = Vec::new();
    let mut misses_truncated = false;
    let mut targets = record_targets.then(Vec::new);
    for (&(x, z), hit) in pairs.iter().zip(&results) {
        match hit {
            Some(h) => {
                hits += column;
                window_used.pmax = window_used.pmax.max(h.p.abs());
                window_used.qmax = window_used.qmax.max(h.q.abs());
                window_used.rmax = window_used.rmax.max(h.r.abs());
                if let Some(t) = targets.as_mut() {
                    t.push(TargetRecord {
                        x,
                        z,
                        p: h.p,
                        q: h.q,
                        r: h.r,
                        err: h.err,
                        column_size: column,
                    });
                }
            }
            None => {
                if misses.len() < MISS_CAP {
                    misses.push(PairMiss { x, z, column_size: column });
                } else {
                    misses_truncated = true;
                }
            }
        }
    }
    let targets_total = pairs.len() * column;
    Ok(DensityReport {
        eps,
        grid_step: step,
        window: *w,
        targets_total,
        pair_count: pairs.len(),
        hits,
        coverage: hits as f64 / targets_total as f64,
        window_used,
        misses,
        misses_truncated,
        targets,
    })
}
