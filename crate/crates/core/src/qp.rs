//! Exact least-distance QP `min ‖u − u₀‖²  s.t.  G u ≤ d` by active-set
//! enumeration. Intended for at most 8 variables and 17 rows, where the
//! enumeration is cheap and the result is reproducible bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::farkas_certificate;

pub const MAX_VARS: usize = 8;
pub const MAX_ROWS: usize = 17;
pub const PRIMAL_TOL: f64 = 1e-9;
pub const DUAL_TOL: f64 = -1e-10;
const ZERO_ROW: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpSolution {
    pub u: Vec<f64>,
    /// Rows held with equality by the optimal candidate, ascending.
    pub active_set: Vec<usize>,
    /// One multiplier per row; zero off the active set.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    /// The active rows were linearly dependent and a minimum-norm
    /// multiplier was used.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QpOutcome {
    Solved(QpSolution),
    /// `ray ≥ 0` with `Gᵀray = 0` and `dᵀray = −1` certifies emptiness.
    Infeasible { ray: Vec<f64> },
}

impl QpOutcome {
    pub fn solution(&self) -> Option<&QpSolution> {
        match self {
            QpOutcome::Solved(s) => Some(s),
            QpOutcome::Infeasible { .. } => None,
        }
    }
}

/// Calls `visit` with every strictly increasing subset of `items` of size
/// `k`, in lexicographic order.
fn for_each_combination(items: &[usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut set = vec![0; k];
    loop {
        for (s, &i) in set.iter_mut().zip(&idx) {
            *s = items[i];
        }
        visit(&set);
        let Some(p) = (0..k).rev().find(|&p| idx[p] < n - k + p) else { return };
        idx[p] += 1;
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

struct Candidate {
    u: Vec<f64>,
    lambda: Vec<f64>,
    degenerate: bool,
}

fn solve_active(g: &[Vec<f64>], d: &[f64], u0: &[f64], set: &[usize]) -> Option<Candidate> {
    let m = u0.len();
    let k = set.len();
    if k == 0 {
        return Some(Candidate { u: u0.to_vec(), lambda: Vec::new(), degenerate: false });
    }
    let gs = DMatrix::from_fn(k, m, |i, j| g[set[i]][j]);
    let u0v = DVector::from_column_slice(u0);
    let rhs = &gs * &u0v - DVector::from_fn(k, |i, _| d[set[i]]);
    let normal = &gs * gs.transpose();
    let scale = normal.diagonal().max().max(1e-300);
    let chol = normal.clone().cholesky().filter(|c| {
        let l = c.l_dirty();
        (0..k).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale)
    });
    let (lambda, degenerate) = match chol {
        Some(c) => (c.solve(&rhs), false),
        None => {
            let svd = normal.svd(true, true);
            let smax = svd.singular_values.max();
            (svd.solve(&rhs, 1e-12 * smax.max(1.0)).ok()?, true)
        }
    };
    let u = u0v - gs.transpose() * &lambda;
    if degenerate {
        let res = &gs * &u - DVector::from_fn(k, |i, _| d[set[i]]);
        if res.amax() > PRIMAL_TOL {
            return None;
        }
    }
    Some(Candidate { u: u.iter().copied().collect(), lambda: lambda.iter().copied().collect(), degenerate })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `min ‖u − u0‖²` over `{u : G u ≤ d}`.
///
/// Every subset of at most `m` rows is tried as the active set; a
/// candidate is accepted when it is primal feasible within 1e-9 and its
/// multipliers are at least −1e-10. The least objective wins, with ties
/// going to the lexicographically smallest active set. If no candidate is
/// accepted, emptiness is confirmed with a phase-1 LP.
pub fn least_distance(g: &[Vec<f64>], d: &[f64], u0: &[f64]) -> Result<QpOutcome> {
    let m = u0.len();
    if m == 0 || m > MAX_VARS {
        return Err(Error::Dimension(format!("QP needs 1..={MAX_VARS} variables, got {m}")));
    }
    if g.len() != d.len() || g.len() > MAX_ROWS || g.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension(format!(
            "QP needs at most {MAX_ROWS} rows of length {m} matching d ({} entries)",
            d.len()
        )));
    }
    if g.iter().flatten().chain(d).chain(u0).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite QP data".into()));
    }
    let usable: Vec<usize> = (0..g.len()).filter(|&i| dot(&g[i], &g[i]).sqrt() > ZERO_ROW).collect();

    let mut best: Option<(f64, Vec<usize>, Candidate)> = None;
    for size in 0..=m.min(usable.len()) {
        for_each_combination(&usable, size, &mut |set| {
            let Some(c) = solve_active(g, d, u0, set) else { return };
            if c.lambda.iter().any(|l| *l < DUAL_TOL) {
                return;
            }
            if (0..g.len()).any(|i| dot(&g[i], &c.u) > d[i] + PRIMAL_TOL) {
                return;
            }
            let obj: f64 = c.u.iter().zip(u0).map(|(a, b)| (a - b) * (a - b)).sum();
            let replace = match &best {
                None => true,
                Some((bo, bs, _)) => {
                    let thr = 1e-12 * (1.0 + bo.abs());
                    obj < bo - thr || ((obj - bo).abs() <= thr && set < bs.as_slice())
                }
            };
            if replace {
                best = Some((obj, set.to_vec(), c));
            }
        });
    }

    match best {
        Some((objective, active_set, c)) => {
            let mut multipliers = vec![0.0; g.len()];
            for (&i, l) in active_set.iter().zip(&c.lambda) {
                multipliers[i] = *l;
            }
            let sol = QpSolution { u: c.u, active_set, multipliers, objective, degenerate: c.degenerate };
            debug_assert!(kkt_residual(g, u0, &sol) <= 1e-8, "KKT stationarity violated");
            Ok(QpOutcome::Solved(sol))
        }
        None => match farkas_certificate(g, d) {
            Some(ray) => Ok(QpOutcome::Infeasible { ray }),
            None => Err(Error::Numerical(
                "no active set accepted but the constraint set was not certified empty".into(),
            )),
        },
    }
}

/// `‖(u − u0) + Gᵀλ‖∞`, the stationarity residual of a solution.
pub fn kkt_residual(g: &[Vec<f64>], u0: &[f64], sol: &QpSolution) -> f64 {
    (0..u0.len())
        .map(|j| {
            let s: f64 = g.iter().zip(&sol.multipliers).map(|(row, l)| row[j] * l).sum();
            (sol.u[j] - u0[j] + s).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(&[0, 2, 5, 7], 2, &mut |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 2], vec![0, 5], vec![0, 7], vec![2, 5], vec![2, 7], vec![5, 7]]);
        let mut count = 0;
        for_each_combination(&[1, 2, 3], 0, &mut |s| {
            assert!(s.is_empty());
            count += 1;
        });
        assert_eq!(count, 1);
        for_each_combination(&[1], 2, &mut |_| panic!());
    }

    #[test]
    fn projection_onto_halfplane() {
        // project (2, 2) onto x + y ≤ 2 → (1, 1)
        let out = least_distance(&[vec![1.0, 1.0]], &[2.0], &[2.0, 2.0]).unwrap();
        let s = out.solution().unwrap();
        assert!((s.u[0] - 1.0).abs() < 1e-14 && (s.u[1] - 1.0).abs() < 1e-14);
        assert_eq!(s.active_set, vec![0]);
        assert!((s.objective - 2.0).abs() < 1e-14);
        assert!((s.multipliers[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn corner_and_duplicate_rows() {
        // box [−1, 1]², from (3, 3) → (1, 1); row 2 duplicates row 0
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        let d = [1.0, 1.0, 1.0, 1.0];
        let s = least_distance(&g, &d, &[3.0, 3.0]).unwrap().solution().unwrap().clone();
        assert_eq!(s.u, vec![1.0, 1.0]);
        assert_eq!(s.active_set, vec![0, 1]);
        assert!(kkt_residual(&g, &[3.0, 3.0], &s) < 1e-12);
    }

    #[test]
    fn infeasible_has_ray() {
        let g = vec![vec![1.0], vec![-1.0], vec![-1.0]];
        let d = [1.0, 1.0, -2.0];
        match least_distance(&g, &d, &[0.0]).unwrap() {
            QpOutcome::Infeasible { ray } => {
                let dy: f64 = ray.iter().zip(&d).map(|(a, b)| a * b).sum();
                assert!((dy + 1.0).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn zero_rows_are_feasibility_checks() {
        let g = vec![vec![0.0], vec![1.0]];
        let s = least_distance(&g, &[0.5, 1.0], &[2.0]).unwrap();
        assert_eq!(s.solution().unwrap().u, vec![1.0]);
        assert!(matches!(least_distance(&g, &[-0.5, 1.0], &[2.0]).unwrap(), QpOutcome::Infeasible { .. }));
    }

    #[test]
    fn size_limits() {
        assert!(least_distance(&[], &[], &[0.0; 9]).is_err());
        assert!(least_distance(&vec![vec![1.0]; 18], &[1.0; 18], &[0.0]).is_err());
    }
}
