//! Control barrier functions for `ẋ = f(x) + g(x)u` with polyhedral input
//! constraints `U(x) = {u : A(x)u ≤ b(x)}`: the viable set
//! `K(x) = {u ∈ U(x) : L_f h + L_g h·u ≥ −μ(h)}`, its strict interior, the
//! QP safety filter and a sampled certification of the barrier condition.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{assemble, CertificationReport, Sample};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::{ExprFunction, VectorExprFunction};
use crate::lp::{maximize_free, LpOutcome};
use crate::minfunc::{classify, MuCandidate};
use crate::qp::{least_distance, QpOutcome, MAX_VARS};

pub const MAX_INPUT_ROWS: usize = 16;
pub const DEFAULT_SLACK: f64 = 1e-9;
const ZERO_ROW: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct ControlProblem {
    pub f: VectorExprFunction,
    /// `n × m` input matrix.
    pub g: VectorExprFunction,
    pub h: ExprFunction,
    pub mu: MuCandidate,
    /// `k × m` constraint matrix; `None` means `U(x) = Rᵐ`.
    pub a: Option<VectorExprFunction>,
    pub b: Option<VectorExprFunction>,
    pub k_nom: VectorExprFunction,
    pub domain: BoxDomain,
}

impl ControlProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f: VectorExprFunction,
        g: VectorExprFunction,
        h: ExprFunction,
        mu: MuCandidate,
        a: Option<VectorExprFunction>,
        b: Option<VectorExprFunction>,
        k_nom: VectorExprFunction,
        domain: BoxDomain,
    ) -> Result<Self> {
        let vars = h.variables().to_vec();
        let n = vars.len();
        let m = g.cols();
        let same = |e: &VectorExprFunction| e.variables() == vars.as_slice();
        if f.rows() != n || f.cols() != 1 || !same(&f) {
            return Err(Error::Dimension(format!("f must be a {n}-vector over {vars:?}")));
        }
        if g.rows() != n || !same(&g) {
            return Err(Error::Dimension(format!("g must have {n} rows over {vars:?}")));
        }
        if m == 0 || m > MAX_VARS {
            return Err(Error::Dimension(format!("input dimension must be 1..={MAX_VARS}, got {m}")));
        }
        if k_nom.rows() != m || k_nom.cols() != 1 || !same(&k_nom) {
            return Err(Error::Dimension(format!("k_nom must be a {m}-vector over {vars:?}")));
        }
        match (&a, &b) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                let k = a.rows();
                if a.cols() != m || !same(a) {
                    return Err(Error::Dimension(format!("A must be k x {m} over {vars:?}")));
                }
                if b.rows() != k || b.cols() != 1 || !same(b) {
                    return Err(Error::Dimension(format!("b must be a {k}-vector over {vars:?}")));
                }
                if k > MAX_INPUT_ROWS {
                    return Err(Error::Dimension(format!("at most {MAX_INPUT_ROWS} input constraints, got {k}")));
                }
            }
            _ => return Err(Error::InvalidArgument("A and b must be given together".into())),
        }
        if domain.dim() != n {
            return Err(Error::Dimension(format!("box has {} axes, state has {n}", domain.dim())));
        }
        mu.validate()?;
        Ok(ControlProblem { f, g, h, mu, a, b, k_nom, domain })
    }

    pub fn state_dim(&self) -> usize {
        self.h.variables().len()
    }

    pub fn input_dim(&self) -> usize {
        self.g.cols()
    }

    pub fn input_rows(&self) -> usize {
        self.a.as_ref().map_or(0, |a| a.rows())
    }

    /// `ẋ = f(x) + g(x)u`.
    pub fn field(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let m = self.input_dim();
        let mut fx = self.f.eval(x)?;
        let gx = self.g.eval(x)?;
        for (i, fi) in fx.iter_mut().enumerate() {
            for j in 0..m {
                *fi += gx[i * m + j] * u[j];
            }
        }
        Ok(fx)
    }

    /// `(h, L_f h, L_g h)` at `x`.
    pub fn lie(&self, x: &[f64]) -> Result<BarrierRow> {
        let (h, grad) = self.h.value_and_grad(x)?;
        let fx = self.f.eval(x)?;
        let gx = self.g.eval(x)?;
        let m = self.input_dim();
        let lfh = grad.values.iter().zip(&fx).map(|(a, b)| a * b).sum();
        let lgh = (0..m)
            .map(|j| grad.values.iter().enumerate().map(|(i, gi)| gi * gx[i * m + j]).sum())
            .collect();
        let mu = self.mu.mu.eval(h)?;
        Ok(BarrierRow { h, lfh, lgh, neg_mu: -mu })
    }

    fn input_constraints(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        match (&self.a, &self.b) {
            (Some(a), Some(b)) => {
                let m = self.input_dim();
                let av = a.eval(x)?;
                Ok((av.chunks(m).map(<[f64]>::to_vec).collect(), b.eval(x)?))
            }
            _ => Ok((Vec::new(), Vec::new())),
        }
    }
}

/// The barrier constraint data at a point: `L_f h + L_g h·u ≥ −μ(h)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierRow {
    pub h: f64,
    pub lfh: f64,
    pub lgh: Vec<f64>,
    /// `−μ(h)`.
    pub neg_mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "source", content = "index", rename_all = "snake_case")]
pub enum RowLabel {
    Input(usize),
    Barrier,
}

/// `K(x) = {u : G u ≤ d}`; the barrier row is last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSystem {
    pub g: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub labels: Vec<RowLabel>,
    pub barrier: BarrierRow,
}

impl ConstraintSystem {
    pub fn barrier_index(&self) -> usize {
        self.g.len() - 1
    }
}

/// Stacks `G = [A(x); −L_g h(x)]`, `d = [b(x); μ(h(x)) + L_f h(x)]`.
pub fn viable_set_row(prob: &ControlProblem, x: &[f64]) -> Result<ConstraintSystem> {
    let barrier = prob.lie(x)?;
    let (mut g, mut d) = prob.input_constraints(x)?;
    let mut labels: Vec<RowLabel> = (0..g.len()).map(RowLabel::Input).collect();
    g.push(barrier.lgh.iter().map(|v| -v).collect());
    d.push(-barrier.neg_mu + barrier.lfh);
    labels.push(RowLabel::Barrier);
    Ok(ConstraintSystem { g, d, labels, barrier })
}

/// Largest `s ≤ 1` with `G u + s‖Gᵢ‖ ≤ d` for some u, i.e. the radius of
/// the largest ball (capped at 1) inside `{G u ≤ d}`. Rows with zero
/// normal contribute `dᵢ` directly. `−∞` when the set is empty.
pub fn chebyshev_margin(g: &[Vec<f64>], d: &[f64]) -> f64 {
    let m = g.first().map_or(0, |r| r.len());
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut margin = 1.0_f64;
    for (row, &di) in g.iter().zip(d) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= ZERO_ROW {
            margin = margin.min(di);
        } else {
            let mut r = row.clone();
            r.push(norm);
            rows.push(r);
            rhs.push(di);
        }
    }
    let mut cap = vec![0.0; m + 1];
    cap[m] = 1.0;
    rows.push(cap);
    rhs.push(1.0);
    let mut c = vec![0.0; m + 1];
    c[m] = 1.0;
    match maximize_free(&c, &rows, &rhs) {
        LpOutcome::Optimal { value, .. } => margin.min(value),
        LpOutcome::Unbounded => margin,
        LpOutcome::Infeasible => f64::NEG_INFINITY,
    }
}

/// Whether `K(x)` has a point satisfying every row strictly, measured as a
/// Chebyshev margin exceeding `slack`.
pub fn strict_interior_nonempty(prob: &ControlProblem, x: &[f64], slack: f64) -> Result<bool> {
    let sys = viable_set_row(prob, x)?;
    Ok(chebyshev_margin(&sys.g, &sys.d) > slack)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FilterOutcome {
    Solved {
        u: Vec<f64>,
        /// Row indices into the stacked system (barrier row last).
        active_set: Vec<usize>,
        multipliers: Vec<f64>,
        /// `‖u − k_nom(x)‖²`.
        objective: f64,
        degenerate: bool,
    },
    Infeasible {
        /// Farkas certificate `y ≥ 0`, `Gᵀy = 0`, `dᵀy = −1`.
        certificate: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafeControlResult {
    pub x: Vec<f64>,
    pub k_nom: Vec<f64>,
    pub outcome: FilterOutcome,
    pub strict_interior_nonempty: bool,
    pub barrier_row: BarrierRow,
}

impl SafeControlResult {
    pub fn u(&self) -> Option<&[f64]> {
        match &self.outcome {
            FilterOutcome::Solved { u, .. } => Some(u),
            FilterOutcome::Infeasible { .. } => None,
        }
    }

    pub fn active_set(&self) -> &[usize] {
        match &self.outcome {
            FilterOutcome::Solved { active_set, .. } => active_set,
            FilterOutcome::Infeasible { .. } => &[],
        }
    }
}

/// The filter output alone, without the strict-interior diagnostic;
/// `None` when K(x) is empty. Used inside integrators.
pub fn safe_control(prob: &ControlProblem, x: &[f64]) -> Result<Option<Vec<f64>>> {
    let sys = viable_set_row(prob, x)?;
    let k_nom = prob.k_nom.eval(x)?;
    Ok(match least_distance(&sys.g, &sys.d, &k_nom)? {
        QpOutcome::Solved(s) => Some(s.u),
        QpOutcome::Infeasible { .. } => None,
    })
}

/// `k̂(x) = argmin_{u ∈ K(x)} ‖u − k_nom(x)‖²`.
pub fn qp_filter(prob: &ControlProblem, x: &[f64]) -> Result<SafeControlResult> {
    let sys = viable_set_row(prob, x)?;
    let k_nom = prob.k_nom.eval(x)?;
    let outcome = match least_distance(&sys.g, &sys.d, &k_nom)? {
        QpOutcome::Solved(s) => FilterOutcome::Solved {
            u: s.u,
            active_set: s.active_set,
            multipliers: s.multipliers,
            objective: s.objective,
            degenerate: s.degenerate,
        },
        QpOutcome::Infeasible { ray } => FilterOutcome::Infeasible { certificate: ray },
    };
    let strict = chebyshev_margin(&sys.g, &sys.d) > DEFAULT_SLACK;
    Ok(SafeControlResult {
        x: x.to_vec(),
        k_nom,
        outcome,
        strict_interior_nonempty: strict,
        barrier_row: sys.barrier,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub x: Vec<f64>,
    pub u: Option<Vec<f64>>,
    pub active_set: Vec<usize>,
    /// `‖k̂(xᵢ) − k̂(xᵢ₋₁)‖ / ‖xᵢ − xᵢ₋₁‖`; absent at the first point and
    /// next to infeasible points.
    pub jump_quotient: Option<f64>,
    pub strict_interior_nonempty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityScan {
    #[serde(skip)]
    pub rows: Vec<ScanRow>,
    pub points: usize,
    pub max_jump_quotient: f64,
    /// Path indices where the strict interior of K(x) is empty.
    pub interior_flags: Vec<usize>,
    pub infeasible: Vec<usize>,
}

impl ContinuityScan {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.rows.first().map_or(0, |r| r.x.len());
        let m = self.rows.iter().find_map(|r| r.u.as_ref().map(Vec::len)).unwrap_or(0);
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=m).map(|j| format!("u{j}")));
        header.extend(["active_set", "jump_quotient", "strict_interior"].map(String::from));
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
            match &r.u {
                Some(u) => rec.extend(u.iter().map(|v| v.to_string())),
                None => rec.extend((0..m).map(|_| "infeasible".to_string())),
            }
            rec.push(r.active_set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"));
            rec.push(r.jump_quotient.map_or(String::new(), |q| q.to_string()));
            rec.push(r.strict_interior_nonempty.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs the filter along a sampled path and tabulates difference quotients.
pub fn continuity_scan(prob: &ControlProblem, path: &[Vec<f64>]) -> Result<ContinuityScan> {
    let results: Vec<Result<SafeControlResult>> = path.par_iter().map(|x| qp_filter(prob, x)).collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut max_jump: f64 = 0.0;
    let mut interior_flags = Vec::new();
    let mut infeasible = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let u = r.u().map(<[f64]>::to_vec);
        if u.is_none() {
            infeasible.push(i);
        }
        if !r.strict_interior_nonempty {
            interior_flags.push(i);
        }
        let jump = match (i.checked_sub(1).and_then(|p| results[p].u()), &u) {
            (Some(prev), Some(cur)) => {
                let du = prev.iter().zip(cur).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let dx = path[i - 1].iter().zip(&path[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (dx > 0.0).then(|| du / dx)
            }
            _ => None,
        };
        if let Some(q) = jump {
            max_jump = max_jump.max(q);
        }
        rows.push(ScanRow {
            x: r.x.clone(),
            u,
            active_set: r.active_set().to_vec(),
            jump_quotient: jump,
            strict_interior_nonempty: r.strict_interior_nonempty,
        });
    }
    Ok(ContinuityScan { points: rows.len(), rows, max_jump_quotient: max_jump, interior_flags, infeasible })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McbfReport {
    /// Margins are `L_f h + sup_{u∈U(x)} L_g h·u + μ(h)`, reported in the
    /// `margin` field of each sample.
    pub certification: CertificationReport,
    /// Points where U(x) is unbounded in the ascent direction, so the
    /// supremum is +∞ and the condition holds trivially.
    pub unbounded_points: usize,
    /// Points where U(x) is empty (margin −∞).
    pub empty_input_set_points: usize,
    /// Grid points where the strict interior of K(x) is empty; a
    /// continuous selection is only guaranteed where it is not.
    pub strict_interior_failures: usize,
    pub first_strict_interior_failure: Option<Vec<f64>>,
    /// Compactness of the union of U(x) is assumed, never checked.
    pub compact_inputs_assumption: &'static str,
}

/// Sampled check of `L_f h + sup_{u ∈ U(x)} L_g h·u ≥ −μ(h)`.
pub fn check_mcbf(prob: &ControlProblem, tol: f64) -> Result<McbfReport> {
    let mu_verdict = classify(&prob.mu)?;
    let g_zero = prob.g.is_identically_zero();
    let per_point: Vec<Result<((Sample, bool), u8, bool)>> = (0..prob.domain.len())
        .into_par_iter()
        .map(|i| {
            let x = prob.domain.point(i);
            let (h, lfh, kink) = crate::certify::lie_derivative(&prob.f, &prob.h, &x)?;
            let mu = prob.mu.mu.eval(h)?;
            let row = if g_zero { None } else { Some(prob.lie(&x)?) };
            let lgh: Vec<f64> = row.as_ref().map_or_else(|| vec![0.0; prob.input_dim()], |r| r.lgh.clone());
            let (a, b) = prob.input_constraints(&x)?;
            // 0 = finite sup, 1 = unbounded, 2 = empty U(x)
            let (sup, flag) = if lgh.iter().all(|v| *v == 0.0) {
                if a.is_empty() {
                    (None, 0)
                } else {
                    match maximize_free(&lgh, &a, &b) {
                        LpOutcome::Infeasible => (Some(f64::NEG_INFINITY), 2),
                        _ => (None, 0),
                    }
                }
            } else if a.is_empty() {
                (Some(f64::INFINITY), 1)
            } else {
                match maximize_free(&lgh, &a, &b) {
                    LpOutcome::Optimal { value, .. } => (Some(value), 0),
                    LpOutcome::Unbounded => (Some(f64::INFINITY), 1),
                    LpOutcome::Infeasible => (Some(f64::NEG_INFINITY), 2),
                }
            };
            let margin = match sup {
                None => lfh + mu,
                Some(s) => lfh + s + mu,
            };
            let strict = if g_zero {
                lfh + mu > DEFAULT_SLACK && chebyshev_margin(&a, &b) > DEFAULT_SLACK
            } else {
                let sys = viable_set_row(prob, &x)?;
                chebyshev_margin(&sys.g, &sys.d) > DEFAULT_SLACK
            };
            Ok(((Sample { t: None, x, h, lfh, margin }, kink), flag, strict))
        })
        .collect();
    let mut samples = Vec::with_capacity(per_point.len());
    let mut unbounded = 0;
    let mut empty = 0;
    let mut strict_fail = 0;
    let mut first_fail = None;
    for r in per_point {
        match r {
            Ok((s, flag, strict)) => {
                unbounded += (flag == 1) as usize;
                empty += (flag == 2) as usize;
                if !strict {
                    strict_fail += 1;
                    if first_fail.is_none() {
                        first_fail = Some(s.0.x.clone());
                    }
                }
                samples.push(Ok(s));
            }
            Err(e) => samples.push(Err(e)),
        }
    }
    let certification = assemble(samples, mu_verdict, tol, &prob.domain)?;
    Ok(McbfReport {
        certification,
        unbounded_points: unbounded,
        empty_input_set_points: empty,
        strict_interior_failures: strict_fail,
        first_strict_interior_failure: first_fail,
        compact_inputs_assumption: "unchecked",
    })
}
