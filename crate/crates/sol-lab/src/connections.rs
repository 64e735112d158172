//! Connection curves of the quotient Sol/Γ: enumeration of the lattice
//! translates reachable from a coset representative, curve evaluation,
//! midpoint sets, and grid-resolution blocking checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolError};
use crate::lattice::{ExactSolPoint, SemidirectLattice};
use crate::sol::{eval_metric_proximity, sol_exp, sol_log, SolPoint, TangentVector};
use crate::util::{run_chunked, ser_f64};

/// Finite truncation of the curve family: lattice indices |p| ≤ pmax,
/// |q| ≤ qmax, |r| ≤ rmax and a t-sampling resolution.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchWindow {
    pub pmax: i64,
    pub qmax: i64,
    pub rmax: i64,
    pub tgrid: usize,
}

impl SearchWindow {
    pub fn new(pmax: i64, qmax: i64, rmax: i64, tgrid: usize) -> Result<Self> {
        let w = SearchWindow { pmax, qmax, rmax, tgrid };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pmax < 1 || self.qmax < 1 || self.rmax < 1 || self.tgrid < 1 {
            return Err(SolError::Domain(format!(
                "window bounds must all be at least 1, got ({}, {}, {}, tgrid {})",
                self.pmax, self.qmax, self.rmax, self.tgrid
            )));
        }
        Ok(())
    }
}

/// A point of the quotient, carried by a float or exact representative.
#[derive(Clone, Debug)]
pub enum Representative {
    Float(SolPoint),
    Exact(ExactSolPoint),
}

#[derive(Clone, Debug)]
pub struct CosetPoint {
    pub rep: Representative,
    pub lattice: Arc<SemidirectLattice>,
}

impl CosetPoint {
    pub fn from_float(lattice: Arc<SemidirectLattice>, p: SolPoint) -> Self {
        CosetPoint { rep: Representative::Float(p), lattice }
    }

    pub fn from_exact(lattice: Arc<SemidirectLattice>, g: ExactSolPoint) -> Self {
        CosetPoint { rep: Representative::Exact(g), lattice }
    }

    pub fn identity(lattice: Arc<SemidirectLattice>) -> Self {
        let e = lattice.embed(0, 0, 0);
        CosetPoint::from_exact(lattice, e)
    }

    pub fn rep_float(&self) -> SolPoint {
        match &self.rep {
            Representative::Float(p) => *p,
            Representative::Exact(g) => self.lattice.to_float(g),
        }
    }

    /// Exact coset equality: rep₁⁻¹·rep₂ ∈ Γ. Only decidable for exact
    /// representatives.
    pub fn eq_coset(&self, other: &CosetPoint) -> Result<bool> {
        match (&self.rep, &other.rep) {
            (Representative::Exact(a), Representative::Exact(b)) => {
                let diff = self.lattice.exact_mul(&self.lattice.exact_inv(a)?, b)?;
                Ok(self.lattice.membership(&diff).is_some())
            }
            _ => Err(SolError::InexactOperation(
                "coset equality needs exact representatives".into(),
            )),
        }
    }
}

/// One connecting curve c(t) = exp(t·direction), targeting the lattice
/// translate indexed by (p, q, r).
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionCurve {
    pub direction: TangentVector,
    pub p: i64,
    pub q: i64,
    pub r: i64,
}

/// Directions of every curve from the identity coset to m within the
/// window, ordered by (r, p, q).
pub fn log_set(m: &CosetPoint, w: &SearchWindow) -> Result<Vec<ConnectionCurve>> {
    w.validate()?;
    let g = m.rep_float();
    let lat = &m.lattice;
    let mut out = Vec::with_capacity(
        ((2 * w.rmax + 1) * (2 * w.pmax + 1) * (2 * w.qmax + 1)) as usize,
    );
    for r in -w.rmax..=w.rmax {
        for p in -w.pmax..=w.pmax {
            for q in -w.qmax..=w.qmax {
                let target = g.mul(&lat.embed_float(p, q, r));
                out.push(ConnectionCurve { direction: sol_log(&target), p, q, r });
            }
        }
    }
    Ok(out)
}

pub fn eval_curve(c: &ConnectionCurve, t: f64) -> Result<SolPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SolError::Domain(format!(
            "curve parameter must lie in [0, 1], got {t}"
        )));
    }
    Ok(sol_exp(&c.direction, t))
}

/// Keeps the first point of every 1e-10 cluster, preserving input order.
fn dedup_points(points: Vec<SolPoint>, tol: f64) -> Vec<SolPoint> {
    // kept points sorted by x for windowed lookups
    let mut by_x: Vec<usize> = Vec::new();
    let mut keep = vec![false; points.len()];
    for (i, pt) in points.iter().enumerate() {
        let start = by_x.partition_point(|&j| points[j].x < pt.x - tol);
        let mut duplicate = false;
        for &j in &by_x[start..] {
            if points[j].x > pt.x + tol {
                break;
            }
            if points[j].sup_dist(pt) <= tol {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            keep[i] = true;
            let pos = by_x.partition_point(|&j| points[j].x < pt.x);
            by_x.insert(pos, i);
        }
    }
    points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

/// Curve midpoints {c(1/2)}, deduplicated to 1e-10 in the sup norm.
pub fn midpoint_set(m: &CosetPoint, w: &SearchWindow) -> Result<Vec<SolPoint>> {
    let mids = log_set(m, w)?
        .iter()
        .map(|c| sol_exp(&c.direction, 0.5))
        .collect();
    Ok(dedup_points(mids, 1e-10))
}

/// A curve stopped by a blocker at grid parameter t.
#[derive(Clone, Debug, Serialize)]
pub struct CurveHit {
    pub p: i64,
    pub q: i64,
    pub r: i64,
    #[serde(serialize_with = "ser_f64")]
    pub t: f64,
    pub blocker: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockingReport {
    #[serde(serialize_with = "ser_f64")]
    pub eps: f64,
    pub tgrid: usize,
    pub blocked_curves: Vec<CurveHit>,
    pub evading_curves: Vec<(i64, i64, i64)>,
}

/// Samples every curve on the t-grid and classifies it as blocked (some
/// sample within eps of a blocker, first-order metric distance at the
/// sample) or evading. Evading verdicts are certified at this resolution;
/// blocked verdicts are advisory.
pub fn blocking_check(
    m: &CosetPoint,
    blockers: &[SolPoint],
    eps: f64,
    w: &SearchWindow,
    threads: usize,
) -> Result<BlockingReport> {
    if eps <= 0.0 {
        return Err(SolError::Domain(format!("eps must be positive, got {eps}")));
    }
    let rep = m.rep_float();
    for (i, b) in blockers.iter().enumerate() {
        for (name, endpoint) in [("the representative", rep), ("the identity", SolPoint::identity())]
        {
            if eval_metric_proximity(b, &endpoint) <= eps {
                return Err(SolError::Domain(format!(
                    "blocker {i} lies within eps of {name}"
                )));
            }
        }
    }

    let curves = log_set(m, w)?;
    let hits = run_chunked(threads, &curves, |c| {
        for k in 1..=w.tgrid {
            let t = k as f64 / (w.tgrid + 1) as f64;
            let pt = sol_exp(&c.direction, t);
            for (bi, b) in blockers.iter().enumerate() {
                if eval_metric_proximity(&pt, b) <= eps {
                    return Some((t, bi));
                }
            }
        }
        None
    });

    let mut blocked_curves = Vec::new();
    let mut evading_curves = Vec::new();
    for (c, hit) in curves.iter().zip(hits) {
        match hit {
            Some((t, blocker)) => {
                blocked_curves.push(CurveHit { p: c.p, q: c.q, r: c.r, t, blocker })
            }
            None => evading_curves.push((c.p, c.q, c.r)),
        }
    }
    Ok(BlockingReport { eps, tgrid: w.tgrid, blocked_curves, evading_curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Sl2z};

    fn lat() -> Arc<SemidirectLattice> {
        Arc::new(build_lattice(&Sl2z::new(2, 1, 1, 1).unwrap()).unwrap())
    }

    fn w111() -> SearchWindow {
        SearchWindow::new(1, 1, 1, 9).unwrap()
    }

    #[test]
    fn window_bounds_are_validated() {
        assert!(SearchWindow::new(0, 1, 1, 1).is_err());
        assert!(SearchWindow::new(1, 1, 1, 0).is_err());
        assert!(SearchWindow::new(3, 2, 1, 7).is_ok());
    }

    #[test]
    fn log_set_enumerates_in_window_order() {
        let m = CosetPoint::identity(lat());
        let curves = log_set(&m, &w111()).unwrap();
        assert_eq!(curves.len(), 27);
        assert_eq!((curves[0].r, curves[0].p, curves[0].q), (-1, -1, -1));
        let ids: Vec<_> = curves.iter().map(|c| (c.r, c.p, c.q)).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);

        // the identity translate contributes the zero direction
        let center = curves.iter().find(|c| (c.p, c.q, c.r) == (0, 0, 0)).unwrap();
        assert_eq!(
            (center.direction.a1, center.direction.a2, center.direction.a3),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn curves_end_on_the_targeted_translates() {
        let lattice = lat();
        let g0 = lattice.embed(1, 2, 0);
        let m = CosetPoint::from_exact(lattice.clone(), g0.clone());
        for c in log_set(&m, &w111()).unwrap() {
            let end = eval_curve(&c, 1.0).unwrap();
            let exact_end = lattice
                .exact_mul(&g0, &lattice.embed(c.p, c.q, c.r))
                .unwrap();
            assert!(end.sup_dist(&lattice.to_float(&exact_end)) < 1e-10);

            // and the endpoint is in the coset of g0, exactly
            let shift = lattice
                .exact_mul(&lattice.exact_inv(&g0).unwrap(), &exact_end)
                .unwrap();
            assert_eq!(lattice.membership(&shift), Some((c.p, c.q, c.r)));
        }
    }

    #[test]
    fn curve_parameter_is_range_checked() {
        let m = CosetPoint::identity(lat());
        let c = &log_set(&m, &w111()).unwrap()[0];
        assert!(eval_curve(c, -0.1).is_err());
        assert!(eval_curve(c, 1.1).is_err());
        assert_eq!(eval_curve(c, 0.0).unwrap(), SolPoint::identity());
    }

    #[test]
    fn coset_equality_is_exact() {
        let lattice = lat();
        let a = CosetPoint::from_exact(lattice.clone(), lattice.embed(1, 2, 3));
        let b = CosetPoint::identity(lattice.clone());
        assert!(a.eq_coset(&b).unwrap());

        let off = ExactSolPoint {
            x: crate::quadratic::QuadRat::rational(
                num_rational::BigRational::new(1.into(), 2.into()),
                5,
            )
            .unwrap(),
            y: crate::quadratic::QuadRat::zero(5).unwrap(),
            zeta: 0.0,
            r: 0,
        };
        let c = CosetPoint::from_exact(lattice.clone(), off);
        assert!(!c.eq_coset(&b).unwrap());

        let f = CosetPoint::from_float(lattice, SolPoint::identity());
        assert!(b.eq_coset(&f).is_err());
    }

    #[test]
    fn midpoints_dedup_and_grow_with_the_window() {
        let m = CosetPoint::identity(lat());
        let mids = midpoint_set(&m, &w111()).unwrap();
        assert_eq!(mids.len(), 27);

        let bigger = midpoint_set(&m, &SearchWindow::new(1, 1, 2, 9).unwrap()).unwrap();
        assert!(bigger.len() >= mids.len());
        let widest = midpoint_set(&m, &SearchWindow::new(2, 2, 2, 9).unwrap()).unwrap();
        assert!(widest.len() >= bigger.len());
    }

    #[test]
    fn axis_column_midpoints_stay_on_the_axis() {
        let lattice = lat();
        let s = lattice.s();
        let m = CosetPoint::from_float(lattice, SolPoint::new(0.0, 0.0, 0.4));
        let mids = midpoint_set(&m, &w111()).unwrap();
        for r in -1i64..=1 {
            let expect = SolPoint::new(0.0, 0.0, (0.4 + s * r as f64) / 2.0);
            assert!(
                mids.iter().any(|p| p.sup_dist(&expect) < 1e-12),
                "missing axis midpoint for r = {r}"
            );
        }
    }

    #[test]
    fn dedup_keeps_first_of_each_cluster() {
        let pts = vec![
            SolPoint::new(0.0, 0.0, 0.0),
            SolPoint::new(1.0, 1.0, 1.0),
            SolPoint::new(5e-11, -5e-11, 0.0),
            SolPoint::new(1.0, 1.0, 1.0 + 2e-10),
        ];
        let out = dedup_points(pts, 1e-10);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0], SolPoint::new(0.0, 0.0, 0.0));
        assert_eq!(out[1], SolPoint::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_blocker_set_blocks_nothing() {
        let m = CosetPoint::identity(lat());
        let report = blocking_check(&m, &[], 0.01, &w111(), 1).unwrap();
        assert!(report.blocked_curves.is_empty());
        assert_eq!(report.evading_curves.len(), 27);
    }

    #[test]
    fn a_midpoint_blocks_exactly_its_own_curve() {
        let m = CosetPoint::identity(lat());
        let w = SearchWindow::new(1, 1, 1, 101).unwrap();
        let curves = log_set(&m, &w).unwrap();
        let target = curves
            .iter()
            .find(|c| (c.p, c.q, c.r) == (0, 0, 1))
            .unwrap();
        let blocker = eval_curve(target, 0.5).unwrap();
        let report = blocking_check(&m, &[blocker], 1e-4, &w, 2).unwrap();
        assert_eq!(report.blocked_curves.len(), 1);
        let hit = &report.blocked_curves[0];
        assert_eq!((hit.p, hit.q, hit.r), (0, 0, 1));
        assert!((hit.t - 0.5).abs() < 1e-12);
        assert_eq!(report.evading_curves.len(), 26);
    }

    #[test]
    fn blockers_near_endpoints_are_rejected() {
        let m = CosetPoint::identity(lat());
        let err = blocking_check(&m, &[SolPoint::new(0.0, 0.0, 1e-6)], 0.01, &w111(), 1);
        assert!(matches!(err, Err(SolError::Domain(_))));
        let err = blocking_check(&m, &[SolPoint::identity()], -1.0, &w111(), 1);
        assert!(matches!(err, Err(SolError::Domain(_))));
    }

    #[test]
    fn pair_curves_reduce_to_identity_based_curves() {
        use rand::{Rng, SeedableRng};
        let lattice = lat();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let g1 = SolPoint::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.0..1.0),
            );
            let g2 = SolPoint::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.0..1.0),
            );
            let reduced = CosetPoint::from_float(lattice.clone(), g1.inverse().mul(&g2));
            for c in log_set(&reduced, &w111()).unwrap() {
                let translated_end = g1.mul(&eval_curve(&c, 1.0).unwrap());
                let direct_end = g2.mul(&lattice.embed_float(c.p, c.q, c.r));
                assert!(translated_end.sup_dist(&direct_end) < 1e-10);
            }
        }
    }
}
