//! Minimal solutions of the scalar comparison system `ẇ = −μ(w)`.
//!
//! When μ is not Lipschitz the initial value problem can have many
//! solutions. The pointwise least one is the limit of the perturbed
//! solutions `ṙ = −μ(r) − ε`, `r(0) = w0 − ε`, which increase as `ε ↓ 0`.
//! [`minimal_solution`] integrates a geometric family of such problems on
//! one shared RK4 grid.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::minfunc::MuFunction;
use crate::ode::{rk4_step_scalar, time_grid};

pub const DEFAULT_FLOOR: f64 = -1e9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarIvp {
    pub mu: MuFunction,
    pub w0: f64,
    pub t_end: f64,
    pub step: f64,
}

impl ScalarIvp {
    pub fn new(mu: impl Into<MuFunction>, w0: f64, t_end: f64, step: f64) -> Result<Self> {
        let mu = mu.into();
        if let MuFunction::Expr(e) = &mu {
            if e.variables().len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "mu must be a function of one variable, got {:?}",
                    e.variables()
                )));
            }
        }
        if !(t_end > 0.0) || !(step > 0.0) || !w0.is_finite() {
            return Err(Error::InvalidArgument(
                "need t_end > 0, step > 0 and a finite w0".into(),
            ));
        }
        Ok(ScalarIvp { mu, w0, t_end, step })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimalSolutionOptions {
    /// Trajectories falling below this value are treated as escaping to −∞.
    pub floor: f64,
    /// Accelerate the ε → 0 limit with Aitken's Δ² process over the last
    /// three trajectories. When off, the estimate is the smallest-ε trajectory.
    pub extrapolate: bool,
}

impl Default for MinimalSolutionOptions {
    fn default() -> Self {
        MinimalSolutionOptions { floor: DEFAULT_FLOOR, extrapolate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTrajectory {
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    /// `trajectories[k][i]` is `r_{k+1}(times[i])`.
    pub trajectories: Vec<Vec<f64>>,
    pub estimate: Vec<f64>,
    /// Heuristic, not a bound: the larger of `|r_N − r_{N−1}|` and the
    /// extrapolation correction.
    pub err_estimate: Vec<f64>,
    pub blowup_time: Option<f64>,
    pub step: f64,
}

impl ComparisonTrajectory {
    /// The smallest-ε trajectory, a lower bound on the minimal solution.
    pub fn last(&self) -> &[f64] {
        self.trajectories.last().expect("at least two trajectories")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.trajectories.len()).map(|k| format!("r_{k}")));
        header.push("estimate".into());
        header.push("err_estimate".into());
        out.write_record(&header)?;
        for i in 0..self.times.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.trajectories.iter().map(|r| r[i].to_string()));
            row.push(self.estimate[i].to_string());
            row.push(self.err_estimate[i].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Integrated {
    values: Vec<f64>,
    /// Index of the first grid point below the floor.
    escaped_at: Option<usize>,
}

fn integrate_perturbed(ivp: &ScalarIvp, times: &[f64], eps: f64, floor: f64) -> Result<Integrated> {
    let mut rhs = |r: f64| ivp.mu.eval(r).map(|m| -m - eps);
    let mut values = Vec::with_capacity(times.len());
    let mut r = ivp.w0 - eps;
    values.push(r);
    for i in 1..times.len() {
        r = match rk4_step_scalar(&mut rhs, r, times[i] - times[i - 1]) {
            Ok(v) => v,
            // Stage values overflowed on the way down.
            Err(e) if e.is_overflow() && r < 0.0 => return Ok(Integrated { values, escaped_at: Some(i) }),
            Err(e) => return Err(e.into()),
        };
        if !(r >= floor) {
            return Ok(Integrated { values, escaped_at: Some(i) });
        }
        values.push(r);
    }
    Ok(Integrated { values, escaped_at: None })
}

/// Approximates the minimal solution of `ẇ = −μ(w)`, `w(0) = w0`.
///
/// Integrates `ṙ = −μ(r) − ε_k`, `r(0) = w0 − ε_k` for `ε_k = eps0/2^{k−1}`,
/// `k = 1…n_refine`, in parallel. The family must increase with k up to
/// `10·step²`; otherwise the step is too coarse for the perturbation size.
pub fn minimal_solution(ivp: &ScalarIvp, eps0: f64, n_refine: usize) -> Result<ComparisonTrajectory> {
    minimal_solution_with(ivp, eps0, n_refine, MinimalSolutionOptions::default())
}

pub fn minimal_solution_with(
    ivp: &ScalarIvp,
    eps0: f64,
    n_refine: usize,
    opts: MinimalSolutionOptions,
) -> Result<ComparisonTrajectory> {
    if !(eps0 > 0.0) || n_refine < 2 {
        return Err(Error::InvalidArgument("need eps0 > 0 and n_refine >= 2".into()));
    }
    let times = time_grid(ivp.t_end, ivp.step);
    let epsilons: Vec<f64> = (0..n_refine).map(|k| eps0 * 0.5f64.powi(k as i32)).collect();

    let runs: Vec<Result<Integrated>> = epsilons
        .par_iter()
        .map(|&eps| integrate_perturbed(ivp, &times, eps, opts.floor))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let escape = runs.iter().filter_map(|r| r.escaped_at).min();
    let len = escape.unwrap_or(times.len());
    let blowup_time = escape.map(|i| times[i]);
    let times: Vec<f64> = times[..len].to_vec();
    let trajectories: Vec<Vec<f64>> = runs.into_iter().map(|r| r.values[..len].to_vec()).collect();

    let tol = 10.0 * ivp.step * ivp.step;
    for k in 0..n_refine - 1 {
        for i in 0..len {
            let excess = trajectories[k][i] - trajectories[k + 1][i];
            if excess > tol {
                return Err(Error::NonMonotoneFamily { t: times[i], index: k + 1, excess });
            }
        }
    }

    let n = n_refine;
    let last = &trajectories[n - 1];
    let prev = &trajectories[n - 2];
    let mut estimate = Vec::with_capacity(len);
    let mut err_estimate = Vec::with_capacity(len);
    for i in 0..len {
        let mut e = last[i];
        if opts.extrapolate && n >= 3 {
            e = aitken(trajectories[n - 3][i], prev[i], last[i]).unwrap_or(last[i]);
        }
        if i == 0 {
            e = ivp.w0;
        }
        estimate.push(e);
        err_estimate.push((last[i] - prev[i]).abs().max((e - last[i]).abs()));
    }

    Ok(ComparisonTrajectory {
        epsilons,
        times,
        trajectories,
        estimate,
        err_estimate,
        blowup_time,
        step: ivp.step,
    })
}

/// Limit of a sequence whose differences shrink geometrically.
fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let d1 = b - a;
    let d2 = c - b;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
    if d1.abs() <= 1e-14 * scale || d2.abs() <= 1e-14 * scale {
        return None;
    }
    let q = d2 / d1;
    if !(q > 0.0 && q < 1.0) {
        return None;
    }
    Some(c + d2 * q / (1.0 - q))
}

/// A function sampled on a uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Dimension("times and values must be nonempty and equally long".into()));
        }
        Ok(SampledFunction { times, values })
    }

    pub fn from_fn(times: &[f64], f: impl Fn(f64) -> f64) -> Self {
        SampledFunction { times: times.to_vec(), values: times.iter().map(|&t| f(t)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    /// `eta(t) − estimate(t)`, negative at a violation.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceResult {
    pub holds: bool,
    pub first_violation: Option<Violation>,
    /// Smallest `eta − estimate` over the compared points.
    pub min_margin: f64,
    pub points_compared: usize,
}

fn grid_step(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        None
    } else {
        Some(times[1] - times[0])
    }
}

fn stride(coarse: f64, fine: f64) -> Option<usize> {
    let r = coarse / fine;
    let k = r.round();
    if k >= 1.0 && (r - k).abs() <= 1e-6 * k {
        Some(k as usize)
    } else {
        None
    }
}

/// Checks `eta(t) ≥ estimate(t) − tol(t)` with `tol = abs_tol + err_estimate`
/// on the time points the two grids share.
pub fn dominance_check(
    eta: &SampledFunction,
    traj: &ComparisonTrajectory,
    abs_tol: f64,
) -> Result<DominanceResult> {
    if eta.times.first().copied() != Some(0.0) || traj.times.first().copied() != Some(0.0) {
        return Err(Error::GridMismatch("both grids must start at t = 0".into()));
    }
    let (se, st) = match (grid_step(&eta.times), grid_step(&traj.times)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            // Single-point grids share only t = 0.
            let margin = eta.values[0] - traj.estimate[0];
            let ok = margin >= -(abs_tol + traj.err_estimate[0]);
            return Ok(DominanceResult {
                holds: ok,
                first_violation: (!ok).then_some(Violation { t: 0.0, margin }),
                min_margin: margin,
                points_compared: 1,
            });
        }
    };
    let (eta_stride, traj_stride) = if se >= st {
        (1, stride(se, st))
    } else {
        (stride(st, se).unwrap_or(0), Some(1))
    };
    let (eta_stride, traj_stride) = match (eta_stride, traj_stride) {
        (a, Some(b)) if a >= 1 => (a, b),
        _ => {
            return Err(Error::GridMismatch(format!(
                "grid steps {se} and {st} are not integer multiples of one another"
            )))
        }
    };

    let mut min_margin = f64::INFINITY;
    let mut first = None;
    let mut count = 0;
    let mut i = 0;
    let mut j = 0;
    while i < eta.times.len() && j < traj.times.len() {
        let (te, tt) = (eta.times[i], traj.times[j]);
        if (te - tt).abs() > 1e-9 * (1.0 + tt.abs()) {
            break;
        }
        let margin = eta.values[i] - traj.estimate[j];
        min_margin = min_margin.min(margin);
        if first.is_none() && margin < -(abs_tol + traj.err_estimate[j]) {
            first = Some(Violation { t: tt, margin });
        }
        count += 1;
        i += eta_stride;
        j += traj_stride;
    }
    Ok(DominanceResult {
        holds: first.is_none(),
        first_violation: first,
        min_margin,
        points_compared: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ivp(src: &str, w0: f64, t_end: f64, step: f64) -> ScalarIvp {
        ScalarIvp::new(MuFunction::parse(src).unwrap(), w0, t_end, step).unwrap()
    }

    #[test]
    fn cube_root_example_converges_to_minus_t_cubed() {
        let tr = minimal_solution(&ivp("3*cbrt(w)^2", 0.0, 1.0, 1e-3), 1e-3, 8).unwrap();
        let end = *tr.estimate.last().unwrap();
        assert!((-1.05..=-0.95).contains(&end), "estimate(1) = {end}");
        assert_eq!(tr.estimate[0], 0.0);
        // Every perturbed solution lies below the minimal one, −t³.
        for r in &tr.trajectories {
            for (t, v) in tr.times.iter().zip(r) {
                assert!(*v <= -t.powi(3), "{v} at t = {t}");
            }
        }
    }

    #[test]
    fn equilibrium_and_constant_slope() {
        let tr = minimal_solution(&ivp("w", 0.0, 1.0, 1e-3), 1e-3, 8).unwrap();
        assert!(tr.estimate.iter().all(|v| v.abs() < 1e-6));
        let tr = minimal_solution(&ivp("-1", 0.0, 1.0, 1e-3), 1e-3, 8).unwrap();
        for (t, e) in tr.times.iter().zip(&tr.estimate) {
            assert!((e - t).abs() < 1e-6);
        }
    }

    #[test]
    fn blowup_truncates_grid() {
        // ẇ = −w², w(0) = −1 has solution −1/(1 − t).
        let tr = minimal_solution(&ivp("w^2", -1.0, 2.0, 1e-3), 1e-3, 3).unwrap();
        let tb = tr.blowup_time.expect("finite escape");
        assert!(tb > 0.99 && tb < 1.01, "blowup at {tb}");
        assert!(tr.times.len() < 2001);
    }

    #[test]
    fn dominance_examples() {
        let tr = minimal_solution(&ivp("3*cbrt(w)^2", 0.0, 1.0, 1e-3), 1e-3, 8).unwrap();
        let zero = SampledFunction::from_fn(&tr.times, |_| 0.0);
        assert!(dominance_check(&zero, &tr, 1e-6).unwrap().holds);
        let same = SampledFunction::new(tr.times.clone(), tr.estimate.clone()).unwrap();
        assert!(dominance_check(&same, &tr, 1e-6).unwrap().holds);
        let below = SampledFunction::new(tr.times.clone(), tr.estimate.iter().map(|v| v - 1.0).collect()).unwrap();
        let r = dominance_check(&below, &tr, 1e-6).unwrap();
        assert!(!r.holds);
        assert_eq!(r.first_violation.unwrap().t, 0.0);
    }

    #[test]
    fn dominance_on_coarser_grid_and_mismatch() {
        let tr = minimal_solution(&ivp("-1", 0.0, 1.0, 1e-3), 1e-3, 3).unwrap();
        let coarse_t = time_grid(1.0, 1e-2);
        let eta = SampledFunction::from_fn(&coarse_t, |t| t + 0.1);
        let r = dominance_check(&eta, &tr, 1e-6).unwrap();
        assert!(r.holds);
        assert_eq!(r.points_compared, 101);
        let odd_t = time_grid(1.0, 0.0015);
        let eta = SampledFunction::from_fn(&odd_t, |t| t);
        assert!(matches!(dominance_check(&eta, &tr, 1e-6), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_columns() {
        let tr = minimal_solution(&ivp("w", 0.0, 0.01, 1e-3), 1e-3, 3).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,r_1,r_2,r_3,estimate,err_estimate\n"));
        assert_eq!(text.lines().count(), 12);
    }
}
