//! Dense two-phase simplex with Bland's rule, for the handful of tiny LPs
//! the control module needs (support functions, Chebyshev margins, Farkas
//! certificates). Problem sizes are a few dozen variables at most.

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded,
    Infeasible,
}

struct Tableau {
    /// `rows × (cols + 1)`; last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimises `cost·x` over the current basis, with columns `allowed`.
    /// Returns false if unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: usize) -> bool {
        let rhs = self.cols;
        for _ in 0..10_000 {
            // Reduced costs c_j − c_Bᵀ B⁻¹ A_j.
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    rc -= cost[b] * self.a[i][j];
                }
                if rc < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let v = self.a[i][c];
                if v > PIVOT_TOL {
                    let ratio = self.a[i][rhs] / v;
                    leave = match leave {
                        Some((li, lr))
                            if lr < ratio - 1e-15
                                || ((lr - ratio).abs() <= 1e-15 && self.basis[li] < self.basis[i]) =>
                        {
                            Some((li, lr))
                        }
                        _ => Some((i, ratio)),
                    };
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, c);
        }
        true
    }
}

/// Minimises `c·x` subject to `A x = b`, `x ≥ 0`.
pub fn solve_standard(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    // Phase 1 tableau with artificials n..n+m.
    let cols = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; cols + 1];
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = 1.0;
        row[cols] = sign * b[i];
        rows.push(row);
    }
    let mut t = Tableau { a: rows, basis: (n..n + m).collect(), cols };
    let mut cost1 = vec![0.0; cols];
    for v in cost1.iter_mut().skip(n) {
        *v = 1.0;
    }
    t.optimise(&cost1, cols);
    let infeas: f64 = t.basis.iter().enumerate().filter(|(_, &bj)| bj >= n).map(|(i, _)| t.a[i][cols]).sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeas > FEAS_TOL * scale {
        return LpOutcome::Infeasible;
    }
    // Drive artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.a.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.a[i][j].abs() > PIVOT_TOL) {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.a.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(c);
    if !t.optimise(&cost2, n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.a[i][cols].max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value }
}

/// Maximises `c·u` over free `u ∈ Rⁿ` subject to `G u ≤ d`.
pub fn maximize_free(c: &[f64], g: &[Vec<f64>], d: &[f64]) -> LpOutcome {
    let n = c.len();
    let k = g.len();
    // u = u⁺ − u⁻, one slack per row.
    let nv = 2 * n + k;
    let mut cost = vec![0.0; nv];
    for j in 0..n {
        cost[j] = -c[j];
        cost[n + j] = c[j];
    }
    let a: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = vec![0.0; nv];
            for j in 0..n {
                row[j] = g[i][j];
                row[n + j] = -g[i][j];
            }
            row[2 * n + i] = 1.0;
            row
        })
        .collect();
    match solve_standard(&cost, &a, d) {
        LpOutcome::Optimal { x, value } => {
            let u = (0..n).map(|j| x[j] - x[n + j]).collect();
            LpOutcome::Optimal { x: u, value: -value }
        }
        other => other,
    }
}

/// Searches for a Farkas certificate of `{u : G u ≤ d} = ∅`: a vector
/// `y ≥ 0` with `Gᵀy = 0` and `dᵀy = −1`.
pub fn farkas_certificate(g: &[Vec<f64>], d: &[f64]) -> Option<Vec<f64>> {
    let k = g.len();
    let n = g.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..k).map(|i| g[i][j]).collect()).collect();
    a.push(d.to_vec());
    let mut b = vec![0.0; n];
    b.push(-1.0);
    match solve_standard(&vec![0.0; k], &a, &b) {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}
