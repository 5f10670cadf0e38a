//! Fixed-step RK4 simulation of open- and closed-loop systems, with
//! empirical checks of invariance, the comparison inequality and set
//! distance along the resulting trajectories.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::comparison::{
    dominance_check, minimal_solution, ComparisonTrajectory, DominanceResult, SampledFunction, ScalarIvp,
};
use crate::control::{safe_control, ControlProblem};
use crate::distance::{distance_estimate, SetSamples};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::{ExprFunction, VectorExprFunction};
use crate::minfunc::MuCandidate;
use crate::ode::{rk4_step, time_grid};

pub const DEFAULT_INVARIANCE_TOL: f64 = 1e-6;

/// The right-hand side being integrated.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    /// `ẋ = f(x)`.
    Autonomous(&'a VectorExprFunction),
    /// `ẋ = f(x, t)`; f takes the state variables followed by `t`.
    TimeVarying(&'a VectorExprFunction),
    /// `ẋ = f(x) + g(x)k̂(x)` with the QP safety filter evaluated at every
    /// RK4 stage.
    ClosedLoop(&'a ControlProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    DomainExit,
    QpInfeasible,
    DomainError { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub h_values: Vec<f64>,
    /// Filter output at each sample (closed loop only).
    pub controls: Vec<Vec<f64>>,
    /// First time the state left the box; integration stops there.
    pub exit_time: Option<f64>,
    pub events: Vec<SimEvent>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Turns a QP-infeasibility or expression-domain event into an error.
    pub fn into_result(self) -> Result<Self> {
        for e in &self.events {
            match &e.kind {
                EventKind::QpInfeasible => return Err(Error::QpInfeasibleAtState { t: e.t, x: e.x.clone() }),
                EventKind::DomainError { message } => {
                    return Err(Error::DomainAtState {
                        t: e.t,
                        x: e.x.clone(),
                        source: crate::expr::ExprError::Domain { subexpression: String::new(), message: message.clone() },
                    })
                }
                EventKind::DomainExit => {}
            }
        }
        Ok(self)
    }

    /// Columns: `t, x1…xn, h, u1…um, event`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.controls.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.push("h".into());
        header.extend((1..=m).map(|j| format!("u{j}")));
        header.push("event".into());
        out.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.states[i].iter().map(|v| v.to_string()));
            rec.push(self.h_values[i].to_string());
            if m > 0 {
                match self.controls.get(i) {
                    Some(u) => rec.extend(u.iter().map(|v| v.to_string())),
                    None => rec.extend((0..m).map(|_| String::new())),
                }
            }
            let tags: Vec<&str> = self
                .events
                .iter()
                .filter(|e| e.t == *t)
                .map(|e| match e.kind {
                    EventKind::DomainExit => "domain_exit",
                    EventKind::QpInfeasible => "qp_infeasible",
                    EventKind::DomainError { .. } => "domain_error",
                })
                .collect();
            rec.push(tags.join(";"));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

enum StageFailure {
    Infeasible(Vec<f64>),
    Domain(String, Vec<f64>),
    Fatal(Error),
}

fn stage_error(e: Error, x: &[f64]) -> StageFailure {
    match e {
        Error::Expr(e) => StageFailure::Domain(e.to_string(), x.to_vec()),
        other => StageFailure::Fatal(other),
    }
}

fn with_t(x: &[f64], t: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    z.push(t);
    z
}

fn eval_field(dyn_: Dynamics<'_>, t: f64, x: &[f64]) -> std::result::Result<Vec<f64>, StageFailure> {
    match dyn_ {
        Dynamics::Autonomous(f) => f.eval(x).map_err(|e| stage_error(e.into(), x)),
        Dynamics::TimeVarying(f) => f.eval(&with_t(x, t)).map_err(|e| stage_error(e.into(), x)),
        Dynamics::ClosedLoop(p) => {
            let u = safe_control(p, x).map_err(|e| stage_error(e, x))?;
            let u = u.ok_or_else(|| StageFailure::Infeasible(x.to_vec()))?;
            p.field(x, &u).map_err(|e| stage_error(e, x))
        }
    }
}

fn eval_h(h: &ExprFunction, n: usize, t: f64, x: &[f64]) -> Result<f64> {
    if h.variables().len() == n + 1 {
        Ok(h.eval(&with_t(x, t))?)
    } else {
        Ok(h.eval(x)?)
    }
}

fn state_dim(dyn_: Dynamics<'_>) -> usize {
    match dyn_ {
        Dynamics::Autonomous(f) => f.rows(),
        Dynamics::TimeVarying(f) => f.rows(),
        Dynamics::ClosedLoop(p) => p.state_dim(),
    }
}

/// Integrates from `x0` over `[0, t_end]` with step `dt` (the final step
/// may be shorter). Leaving `domain` truncates the trajectory; QP
/// infeasibility or an expression domain error at any stage does too, and
/// is recorded as an event.
pub fn integrate(
    dynamics: Dynamics<'_>,
    h: &ExprFunction,
    domain: Option<&BoxDomain>,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and t_end >= 0".into()));
    }
    let n = state_dim(dynamics);
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has {} entries, state has {n}", x0.len())));
    }
    if let Some(d) = domain {
        if !d.contains(x0) {
            return Err(Error::InvalidArgument(format!("x0 = {x0:?} lies outside the box")));
        }
    }
    let grid = if t_end == 0.0 { vec![0.0] } else { time_grid(t_end, dt) };
    let closed = matches!(dynamics, Dynamics::ClosedLoop(_));
    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        h_values: Vec::with_capacity(grid.len()),
        controls: Vec::new(),
        exit_time: None,
        events: Vec::new(),
    };

    let mut x = x0.to_vec();
    for (i, &t) in grid.iter().enumerate() {
        let hv = match eval_h(h, n, t, &x) {
            Ok(v) => v,
            Err(Error::Expr(e)) => {
                traj.events.push(SimEvent { t, x, kind: EventKind::DomainError { message: e.to_string() } });
                break;
            }
            Err(e) => return Err(e),
        };
        if let Dynamics::ClosedLoop(p) = dynamics {
            match safe_control(p, &x) {
                Ok(u) => match u {
                    Some(u) => traj.controls.push(u),
                    None => {
                        traj.events.push(SimEvent { t, x, kind: EventKind::QpInfeasible });
                        break;
                    }
                },
                Err(Error::Expr(e)) => {
                    traj.events.push(SimEvent { t, x, kind: EventKind::DomainError { message: e.to_string() } });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.h_values.push(hv);
        let Some(&t_next) = grid.get(i + 1) else { break };
        let step = rk4_step(&mut |s, y: &[f64]| eval_field(dynamics, s, y), t, &x, t_next - t);
        match step {
            Ok(next) => {
                if next.iter().any(|v| !v.is_finite()) || domain.is_some_and(|d| !d.contains(&next)) {
                    traj.exit_time = Some(t_next);
                    traj.events.push(SimEvent { t: t_next, x: next, kind: EventKind::DomainExit });
                    break;
                }
                x = next;
            }
            Err(StageFailure::Infeasible(at)) => {
                traj.events.push(SimEvent { t, x: at, kind: EventKind::QpInfeasible });
                break;
            }
            Err(StageFailure::Domain(message, at)) => {
                traj.events.push(SimEvent { t, x: at, kind: EventKind::DomainError { message } });
                break;
            }
            Err(StageFailure::Fatal(e)) => return Err(e),
        }
    }
    if !closed {
        traj.controls.clear();
    }
    Ok(traj)
}

/// Integrates from each initial state in parallel; results keep input order.
pub fn integrate_batch(
    dynamics: Dynamics<'_>,
    h: &ExprFunction,
    domain: Option<&BoxDomain>,
    x0s: &[Vec<f64>],
    t_end: f64,
    dt: f64,
) -> Vec<Result<Trajectory>> {
    x0s.par_iter().map(|x0| integrate(dynamics, h, domain, x0, t_end, dt)).collect()
}

/// Draws `count` grid points with `h ≥ 0` (at `t = 0` if h depends on
/// time), uniformly with replacement, from a seeded generator.
pub fn sample_in_set(h: &ExprFunction, domain: &BoxDomain, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut inside = Vec::new();
    for i in 0..domain.len() {
        if eval_h(h, domain.dim(), 0.0, &domain.point(i))? >= 0.0 {
            inside.push(i);
        }
    }
    if inside.is_empty() {
        return Err(Error::InvalidArgument("no grid point satisfies h >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| domain.point(inside[rng.gen_range(0..inside.len())])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceResult {
    pub invariant: bool,
    /// First sample with `h < −tol`, as `(t, h)`.
    pub first_violation: Option<(f64, f64)>,
    pub min_h: f64,
    pub tol: f64,
}

/// `h(x(t)) ≥ −tol` at every sample of the (possibly truncated) trajectory.
pub fn invariance_test(traj: &Trajectory, tol: f64) -> InvarianceResult {
    let first_violation = traj
        .times
        .iter()
        .zip(&traj.h_values)
        .find(|(_, h)| **h < -tol)
        .map(|(t, h)| (*t, *h));
    InvarianceResult {
        invariant: first_violation.is_none(),
        first_violation,
        min_h: traj.h_values.iter().copied().fold(f64::INFINITY, f64::min),
        tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlayReport {
    pub w0: f64,
    /// The comparison family; absent for single-sample trajectories.
    #[serde(skip)]
    pub comparison: Option<ComparisonTrajectory>,
    pub dominance: DominanceResult,
    /// Time where the comparison solution escaped, if it did.
    pub comparison_blowup: Option<f64>,
}

pub const OVERLAY_ABS_TOL: f64 = 1e-6;

/// Checks `h(x(t)) ≥ w̃(t)`, with w̃ the minimal solution of
/// `ẇ = −μ(w)`, `w(0) = h(x(0))`, computed on the trajectory's own grid.
pub fn comparison_overlay(traj: &Trajectory, mu: &MuCandidate, eps0: f64, n_refine: usize) -> Result<OverlayReport> {
    let w0 = *traj.h_values.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let eta = SampledFunction::new(traj.times.clone(), traj.h_values.clone())?;
    if traj.times.len() < 2 {
        return Ok(OverlayReport {
            w0,
            comparison: None,
            dominance: DominanceResult { holds: true, first_violation: None, min_margin: 0.0, points_compared: 1 },
            comparison_blowup: None,
        });
    }
    let dt = traj.times[1] - traj.times[0];
    let t_last = *traj.times.last().unwrap();
    let ivp = ScalarIvp::new(mu.mu.clone(), w0, t_last, dt)?;
    let cmp = minimal_solution(&ivp, eps0, n_refine)?;
    let dominance = dominance_check(&eta, &cmp, OVERLAY_ABS_TOL)?;
    Ok(OverlayReport { w0, dominance, comparison_blowup: cmp.blowup_time, comparison: Some(cmp) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceTrend {
    /// Zero throughout (the state stayed in S).
    Zero,
    /// Nonincreasing and ending below its start.
    Decaying,
    Growing,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub trend: DistanceTrend,
    /// Fraction of steps along which ρ did not increase.
    pub nonincreasing_fraction: f64,
}

/// Estimated distance from each trajectory sample to S.
pub fn set_distance_series(traj: &Trajectory, h: &ExprFunction, s: &SetSamples) -> Result<DistanceSeries> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("S has no grid samples".into()));
    }
    let rho: Vec<f64> = traj.states.iter().map(|x| distance_estimate(h, x, s)).collect::<Result<_>>()?;
    let steps = rho.len().saturating_sub(1);
    let down = rho.windows(2).filter(|w| w[1] <= w[0] + 1e-12).count();
    let first = rho.first().copied().unwrap_or(0.0);
    let last = rho.last().copied().unwrap_or(0.0);
    let trend = if rho.iter().all(|r| *r <= 1e-12) {
        DistanceTrend::Zero
    } else if down == steps && last < first {
        DistanceTrend::Decaying
    } else if last > first {
        DistanceTrend::Growing
    } else {
        DistanceTrend::Mixed
    };
    Ok(DistanceSeries {
        times: traj.times.clone(),
        rho,
        trend,
        nonincreasing_fraction: if steps == 0 { 1.0 } else { down as f64 / steps as f64 },
    })
}
