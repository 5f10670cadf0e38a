//! Boundary cross-checks: the Nagumo condition on the zero level set and
//! the Brezis distance quotient `ρ(x + εf(x), S)/ε`.

use rayon::prelude::*;
use serde::Serialize;

use super::BarrierProblem;
use crate::distance::{distance_estimate, newton_project, SetSamples};
use crate::error::{Error, Result};

pub const DEFAULT_QUOTIENT_EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const REGULARITY_THRESHOLD: f64 = 1e-6;
const PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySample {
    /// Grid point inside the band.
    pub grid_x: Vec<f64>,
    /// Its projection onto `h = 0` (the grid point itself if projection failed).
    pub x: Vec<f64>,
    pub h: f64,
    pub lfh: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NagumoReport {
    pub pass: bool,
    pub witness: Option<BoundarySample>,
    pub band: f64,
    pub tol: f64,
    pub min_grad_norm: f64,
    /// False when ‖∇h‖ < 1e-6 somewhere on the sampled boundary, i.e. 0 may
    /// not be a regular value of h and the Nagumo test is not conclusive.
    pub regular: bool,
    pub samples: Vec<BoundarySample>,
}

fn band_points(prob: &BarrierProblem, band: f64) -> Result<Vec<Vec<f64>>> {
    let hv: Vec<Result<f64>> = (0..prob.domain.len())
        .into_par_iter()
        .map(|i| Ok(prob.h.eval(&prob.domain.point(i))?))
        .collect();
    let mut out = Vec::new();
    for (i, v) in hv.into_iter().enumerate() {
        if v?.abs() <= band {
            out.push(prob.domain.point(i));
        }
    }
    Ok(out)
}

/// Checks `L_f h ≥ −tol` on grid points with `|h| ≤ band`, each first
/// projected onto `h = 0`. If the band holds no grid point it is widened
/// tenfold once before giving up.
pub fn nagumo_boundary_check(prob: &BarrierProblem, band: f64, tol: f64) -> Result<NagumoReport> {
    if !(band > 0.0) {
        return Err(Error::InvalidArgument("band must be positive".into()));
    }
    let mut used = band;
    let mut pts = band_points(prob, used)?;
    if pts.is_empty() {
        used = band * 10.0;
        pts = band_points(prob, used)?;
    }
    if pts.is_empty() {
        return Err(Error::EmptyBoundary { band: used });
    }

    let samples: Vec<Result<BoundarySample>> = pts
        .into_par_iter()
        .map(|grid_x| {
            let (proj, res) = newton_project(&prob.h, &grid_x)?;
            let x = if res <= PROJECTION_TOL || res < prob.h.eval(&grid_x)?.abs() {
                proj
            } else {
                grid_x.clone()
            };
            let (h, lfh, _) = prob.lie(&x)?;
            let g = prob.h.grad(&x)?;
            let grad_norm = g.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(BoundarySample { grid_x, x, h, lfh, grad_norm })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    let witness = samples
        .iter()
        .filter(|s| s.lfh < -tol)
        .fold(None::<&BoundarySample>, |best, s| match best {
            Some(b) if b.lfh <= s.lfh => Some(b),
            _ => Some(s),
        })
        .cloned();
    let min_grad_norm = samples.iter().map(|s| s.grad_norm).fold(f64::INFINITY, f64::min);
    Ok(NagumoReport {
        pass: witness.is_none(),
        witness,
        band: used,
        tol,
        min_grad_norm,
        regular: min_grad_norm >= REGULARITY_THRESHOLD,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientTrend {
    ToZero,
    BoundedAway,
    Unclear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientRow {
    pub x: Vec<f64>,
    /// `ρ̂(x + εf(x), S)/ε` for each ε of the report.
    pub quotients: Vec<f64>,
    pub trend: QuotientTrend,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceQuotientReport {
    pub eps: Vec<f64>,
    pub rows: Vec<QuotientRow>,
    /// True when every row tends to zero.
    pub all_to_zero: bool,
}

fn trend(q: &[f64]) -> QuotientTrend {
    let first = q[0];
    let last = q[q.len() - 1];
    if q.iter().all(|v| *v <= 1e-9) {
        return QuotientTrend::ToZero;
    }
    if !last.is_finite() {
        return QuotientTrend::Unclear;
    }
    if last <= 0.5 * first && q.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12) {
        QuotientTrend::ToZero
    } else if last >= 0.5 * first {
        QuotientTrend::BoundedAway
    } else {
        QuotientTrend::Unclear
    }
}

/// Tabulates `ρ̂(x + εf(x), S)/ε` over `eps_sequence` (decreasing) for each
/// boundary point. S is represented by its grid samples plus projections.
pub fn distance_quotient_check(
    prob: &BarrierProblem,
    eps_sequence: &[f64],
    boundary_points: &[Vec<f64>],
) -> Result<DistanceQuotientReport> {
    if eps_sequence.len() < 2 || eps_sequence.windows(2).any(|w| !(w[1] < w[0])) || !(eps_sequence[eps_sequence.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument("eps sequence must be positive, decreasing, length >= 2".into()));
    }
    let s = SetSamples::from_points(&prob.h, prob.domain.points())?;
    let rows: Vec<Result<QuotientRow>> = boundary_points
        .par_iter()
        .map(|x| {
            let fx = prob.f.eval(x)?;
            let mut quotients = Vec::with_capacity(eps_sequence.len());
            for &eps in eps_sequence {
                let p: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a + eps * b).collect();
                quotients.push(distance_estimate(&prob.h, &p, &s)? / eps);
            }
            let trend = trend(&quotients);
            Ok(QuotientRow { x: x.clone(), quotients, trend })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let all_to_zero = rows.iter().all(|r| r.trend == QuotientTrend::ToZero);
    Ok(DistanceQuotientReport { eps: eps_sequence.to_vec(), rows, all_to_zero })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoxDomain;
    use crate::expr::{ExprFunction, VectorExprFunction};
    use crate::minfunc::MuCandidate;

    fn problem(f: &[&str], h: &str, vars: &[&str], lo: f64, hi: f64, count: usize) -> BarrierProblem {
        let n = vars.len();
        BarrierProblem::new(
            VectorExprFunction::parse_vector(f, vars).unwrap(),
            ExprFunction::parse(h, vars).unwrap(),
            MuCandidate::parse("0").unwrap(),
            BoxDomain::uniform(vec![lo; n], vec![hi; n], count).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn nagumo_examples() {
        let r = nagumo_boundary_check(&problem(&["x"], "x", &["x"], -2.0, 2.0, 401), 1e-3, 1e-9).unwrap();
        assert!(r.pass && r.regular);

        let r = nagumo_boundary_check(&problem(&["-1"], "x", &["x"], -2.0, 2.0, 401), 1e-3, 1e-9).unwrap();
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert!(w.x[0].abs() < 1e-12 && w.lfh == -1.0);

        let r = nagumo_boundary_check(&problem(&["-1"], "x^3", &["x"], -2.0, 2.0, 401), 1e-3, 1e-9).unwrap();
        assert!(r.pass);
        assert!(!r.regular);
    }

    #[test]
    fn band_widens_once_then_fails() {
        // Grid points at ±0.5, ±1.5: |h| ≥ 0.5 everywhere.
        let p = problem(&["x"], "x", &["x"], -1.5, 1.5, 4);
        assert!(matches!(nagumo_boundary_check(&p, 1e-3, 1e-9), Err(Error::EmptyBoundary { .. })));
        let r = nagumo_boundary_check(&p, 0.05, 1e-9).unwrap();
        assert_eq!(r.band, 0.5);
    }

    #[test]
    fn quotient_examples() {
        let eps = DEFAULT_QUOTIENT_EPS;
        let r = distance_quotient_check(&problem(&["x"], "x", &["x"], -2.0, 2.0, 401), &eps, &[vec![0.0]]).unwrap();
        assert!(r.rows[0].quotients.iter().all(|q| *q == 0.0));
        assert_eq!(r.rows[0].trend, QuotientTrend::ToZero);

        let r = distance_quotient_check(&problem(&["-1"], "x", &["x"], -2.0, 2.0, 401), &eps, &[vec![0.0]]).unwrap();
        assert!(r.rows[0].quotients.iter().all(|q| (q - 1.0).abs() < 1e-12));
        assert_eq!(r.rows[0].trend, QuotientTrend::BoundedAway);

        let p = problem(&["-x2", "x1"], "1 - x1^2 - x2^2", &["x1", "x2"], -2.0, 2.0, 81);
        let r = distance_quotient_check(&p, &eps, &[vec![1.0, 0.0]]).unwrap();
        for (e, q) in eps.iter().zip(&r.rows[0].quotients) {
            let exact = f64::sqrt(1.0 + e * e) - 1.0;
            assert!((q - exact / e).abs() < 1e-9, "{q} vs {}", exact / e);
        }
        assert_eq!(r.rows[0].trend, QuotientTrend::ToZero);
    }
}
