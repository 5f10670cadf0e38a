//! Upper estimates of the distance from a point to `S = {x : h(x) ≥ 0}`.
//!
//! The estimate ρ̂ is the smallest of three distances, each to a point known
//! to lie in S (up to 1e-12 in h): the nearest sampled grid point of S, the
//! Newton projection onto `h = 0`, and the boundary crossing on the segment
//! towards that grid point. ρ̂ ≥ ρ always holds; on smooth boundaries the
//! projection makes it close to exact.

use crate::error::Result;
use crate::expr::ExprFunction;

const BOUNDARY_TOL: f64 = 1e-12;

/// Projects `x0` onto `h = 0` with the Gauss–Newton iteration
/// `x ← x − h(x)∇h(x)/‖∇h(x)‖²`. Returns the final iterate and `|h|` there.
pub fn newton_project(h: &ExprFunction, x0: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut x = x0.to_vec();
    let (mut hv, mut g) = h.value_and_grad(&x)?;
    for _ in 0..200 {
        let norm2: f64 = g.values.iter().map(|v| v * v).sum();
        if norm2 == 0.0 || hv == 0.0 {
            break;
        }
        let scale = hv / norm2;
        let mut step2 = 0.0;
        for (xi, gi) in x.iter_mut().zip(&g.values) {
            let s = scale * gi;
            *xi -= s;
            step2 += s * s;
        }
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match h.value_and_grad(&x) {
            Ok((v, gr)) => {
                hv = v;
                g = gr;
            }
            // Left the domain of h: keep the best point found so far.
            Err(_) => {
                for (xi, gi) in x.iter_mut().zip(&g.values) {
                    *xi += scale * gi;
                }
                break;
            }
        }
        if step2.sqrt() < 1e-15 * (1.0 + xnorm) {
            break;
        }
    }
    Ok((x, hv.abs()))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Points of a sampled grid that lie in S.
#[derive(Debug, Clone, Default)]
pub struct SetSamples {
    pub points: Vec<Vec<f64>>,
}

impl SetSamples {
    pub fn from_points(h: &ExprFunction, pts: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let mut points = Vec::new();
        for p in pts {
            if h.eval(&p)? >= 0.0 {
                points.push(p);
            }
        }
        Ok(SetSamples { points })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest sample (lowest index on ties) and its distance.
    pub fn nearest(&self, p: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, q) in self.points.iter().enumerate() {
            let d = dist(p, q);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }
}

/// Upper estimate ρ̂(p, S); `f64::INFINITY` if no candidate point in S is found.
pub fn distance_estimate(h: &ExprFunction, p: &[f64], s: &SetSamples) -> Result<f64> {
    let hp = h.eval(p)?;
    if hp >= 0.0 {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    let (proj, res) = newton_project(h, p)?;
    if res <= BOUNDARY_TOL {
        best = best.min(dist(p, &proj));
    }
    if let Some((i, d)) = s.nearest(p) {
        best = best.min(d);
        let q = &s.points[i];
        // Bisect for the crossing on the segment p → q.
        let at = |s: f64| -> Vec<f64> { p.iter().zip(q).map(|(a, b)| a + s * (b - a)).collect() };
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut ok = true;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match h.eval(&at(mid)) {
                Ok(v) if v >= 0.0 => hi = mid,
                Ok(_) => lo = mid,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            best = best.min(dist(p, &at(hi)));
        }
    }
    Ok(best)
}
