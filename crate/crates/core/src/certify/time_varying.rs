//! Time-varying barriers: `∂h/∂t + L_f h ≥ −μ(t, h)` on a (t, x) grid.

use rayon::prelude::*;
use serde::Serialize;

use super::{assemble, CertificationReport, Sample};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::{ExprFunction, VectorExprFunction};
use crate::minfunc::{
    classify, Confidence, Evidence, MinimalCase, MinimalityVerdict, MuCandidate, Status, ZERO_TOL,
};

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeMu {
    /// μ(t, w), an expression in the variables `[t, w]`.
    Varying { mu: ExprFunction, locally_lipschitz: bool },
    Invariant(MuCandidate),
}

impl TimeMu {
    fn eval(&self, t: f64, w: f64) -> Result<f64> {
        Ok(match self {
            TimeMu::Varying { mu, .. } => mu.eval(&[t, w])?,
            TimeMu::Invariant(c) => c.mu.eval(w)?,
        })
    }
}

/// `ẋ = f(x, t)`, `S(t) = {h(x, t) ≥ 0}`. Both f and h take the state
/// variables followed by `t`.
#[derive(Debug, Clone, Serialize)]
pub struct TimeVaryingProblem {
    pub f: VectorExprFunction,
    pub h: ExprFunction,
    pub mu: TimeMu,
    pub domain: BoxDomain,
}

impl TimeVaryingProblem {
    pub fn new(f: VectorExprFunction, h: ExprFunction, mu: TimeMu, domain: BoxDomain) -> Result<Self> {
        let vars = h.variables();
        if vars.last().map(String::as_str) != Some("t") {
            return Err(Error::InvalidArgument(format!(
                "time-varying h must list t as its last variable, got {vars:?}"
            )));
        }
        let n = vars.len() - 1;
        if f.cols() != 1 || f.rows() != n || f.variables() != vars {
            return Err(Error::Dimension(format!(
                "f must be a {n}-vector over {vars:?}, got {}x{} over {:?}",
                f.rows(),
                f.cols(),
                f.variables()
            )));
        }
        if domain.dim() != n {
            return Err(Error::Dimension(format!("box has {} axes, state has {n}", domain.dim())));
        }
        if let TimeMu::Varying { mu, .. } = &mu {
            if mu.variables() != ["t", "w"] {
                return Err(Error::InvalidArgument(format!(
                    "time-varying mu must be over [t, w], got {:?}",
                    mu.variables()
                )));
            }
        }
        Ok(TimeVaryingProblem { f, h, mu, domain })
    }

    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }
}

fn t_points(t_end: f64, t_grid: usize) -> Vec<f64> {
    (0..t_grid)
        .map(|i| if i + 1 == t_grid { t_end } else { t_end * i as f64 / (t_grid - 1) as f64 })
        .collect()
}

/// Sufficient test for a time-varying μ: `μ(t, 0) ≤ 0` on the sampled
/// times plus declared uniqueness of solutions (local Lipschitz continuity).
pub fn classify_time_varying(
    mu: &ExprFunction,
    locally_lipschitz: bool,
    t_end: f64,
    t_grid: usize,
) -> Result<MinimalityVerdict> {
    let ts = t_points(t_end, t_grid.max(2));
    let mut max0 = f64::NEG_INFINITY;
    for &t in &ts {
        max0 = max0.max(mu.eval(&[t, 0.0])?);
    }
    let evidence = Evidence::TimeVarying { max_mu_at_zero: max0, samples: ts.len() };
    let (status, confidence) = if max0 > ZERO_TOL {
        (Status::NotMinimal, Confidence::Sampled)
    } else if locally_lipschitz {
        (Status::Minimal(MinimalCase::TimeVaryingUnique), Confidence::Declared)
    } else {
        (Status::Inconclusive, Confidence::Sampled)
    };
    Ok(MinimalityVerdict { status, evidence, confidence })
}

/// Evaluates `margin = ∂h/∂t + ∇ₓh·f + μ(t, h)` on the product of the space
/// grid with `t_grid` times in `[0, t_end]`. Points are ordered like the
/// variables of h, so t varies fastest.
pub fn check_tmbf(prob: &TimeVaryingProblem, t_end: f64, t_grid: usize, tol: f64) -> Result<CertificationReport> {
    if !(t_end > 0.0) || t_grid < 2 {
        return Err(Error::InvalidArgument("need t_end > 0 and t_grid >= 2".into()));
    }
    let mu_verdict = match &prob.mu {
        TimeMu::Varying { mu, locally_lipschitz } => classify_time_varying(mu, *locally_lipschitz, t_end, t_grid)?,
        TimeMu::Invariant(c) => classify(c)?,
    };
    let ts = t_points(t_end, t_grid);
    let m = prob.domain.len();
    let n = prob.state_dim();
    let nt = ts.len();
    let results: Vec<Result<(Sample, bool)>> = (0..nt * m)
        .into_par_iter()
        .map(|k| {
            let t = ts[k % nt];
            let x = prob.domain.point(k / nt);
            let mut z = x.clone();
            z.push(t);
            let (h, g) = prob.h.value_and_grad(&z)?;
            let fx = prob.f.eval(&z)?;
            let mut lfh = g.values[n];
            for i in 0..n {
                lfh += g.values[i] * fx[i];
            }
            let margin = lfh + prob.mu.eval(t, h)?;
            Ok((Sample { t: Some(t), x, h, lfh, margin }, g.nondifferentiable))
        })
        .collect();
    assemble(results, mu_verdict, tol, &prob.domain)
}
