//! The tightest comparison function `Γ(w) = inf{L_f h(x) : h(x) = w}`,
//! sampled over a grid with a level band `|h(x) − w| ≤ band`.

use rayon::prelude::*;
use serde::Serialize;

use super::BarrierProblem;
use crate::error::{Error, Result};
use crate::minfunc::{MuCandidate, MuFunction, PiecewiseLinear};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    pub w: Vec<f64>,
    /// `None` marks an empty level band.
    pub gamma: Vec<Option<f64>>,
    /// Grid point attaining each infimum.
    pub argmin: Vec<Option<Vec<f64>>>,
    pub band: f64,
    pub empty_levels: Vec<f64>,
    /// Largest `|ΔΓ|/|Δw|` between adjacent nonempty levels; an empirical
    /// proxy, not a bound on the true Lipschitz constant.
    pub modulus_of_continuity: Option<f64>,
    /// Range of h observed on the grid.
    pub observed_h_range: (f64, f64),
    /// Hypotheses the construction relies on but does not verify.
    pub assumptions: Vec<&'static str>,
}

impl GammaReport {
    /// `−Γ` as a piecewise-linear table over the nonempty levels.
    pub fn neg_gamma(&self) -> Result<PiecewiseLinear> {
        let (w, v): (Vec<f64>, Vec<f64>) = self
            .w
            .iter()
            .zip(&self.gamma)
            .filter_map(|(w, g)| g.map(|g| (*w, -g)))
            .unzip();
        PiecewiseLinear::new(w, v)
    }

    /// A candidate `μ = −Γ` whose zero tolerance absorbs the band error
    /// `2·band·max(1, modulus)`.
    pub fn mu_candidate(&self) -> Result<MuCandidate> {
        let table = self.neg_gamma()?;
        let lo = table.knots().0[0];
        let mut cand = MuCandidate::new(MuFunction::Table(table));
        cand.zero_tol = 2.0 * self.band * self.modulus_of_continuity.unwrap_or(1.0).max(1.0);
        if lo < 0.0 {
            cand.probe_width = (-lo).min(1.0);
        }
        Ok(cand)
    }
}

/// Samples Γ on `w_grid`. Levels whose band contains no grid point are
/// reported as empty rather than failing the construction.
pub fn gamma_construct(prob: &BarrierProblem, w_grid: &[f64], band: f64) -> Result<GammaReport> {
    if !(band > 0.0) {
        return Err(Error::InvalidArgument("band must be positive".into()));
    }
    if w_grid.is_empty() || w_grid.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidArgument("w grid must be nonempty and strictly increasing".into()));
    }
    let evals: Vec<Result<(f64, f64)>> = (0..prob.domain.len())
        .into_par_iter()
        .map(|i| {
            let (h, lfh, _) = prob.lie(&prob.domain.point(i))?;
            Ok((h, lfh))
        })
        .collect();
    let mut samples: Vec<(f64, f64, usize)> = Vec::with_capacity(evals.len());
    for (i, e) in evals.into_iter().enumerate() {
        let (h, lfh) = e?;
        samples.push((h, lfh, i));
    }
    let observed_h_range = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.0), hi.max(s.0)));
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

    let mut gamma = Vec::with_capacity(w_grid.len());
    let mut argmin = Vec::with_capacity(w_grid.len());
    let mut empty_levels = Vec::new();
    for &w in w_grid {
        let start = samples.partition_point(|s| s.0 < w - band);
        let end = samples.partition_point(|s| s.0 <= w + band);
        let best = samples[start..end]
            .iter()
            .fold(None::<(f64, usize)>, |best, s| match best {
                Some((v, i)) if v < s.1 || (v == s.1 && i < s.2) => Some((v, i)),
                _ => Some((s.1, s.2)),
            });
        match best {
            Some((v, i)) => {
                gamma.push(Some(v));
                argmin.push(Some(prob.domain.point(i)));
            }
            None => {
                gamma.push(None);
                argmin.push(None);
                empty_levels.push(w);
            }
        }
    }

    let mut modulus: Option<f64> = None;
    let mut prev: Option<(f64, f64)> = None;
    for (w, g) in w_grid.iter().zip(&gamma) {
        if let Some(g) = g {
            if let Some((pw, pg)) = prev {
                let q = (g - pg).abs() / (w - pw);
                modulus = Some(modulus.map_or(q, |m| m.max(q)));
            }
            prev = Some((*w, *g));
        }
    }

    Ok(GammaReport {
        w: w_grid.to_vec(),
        gamma,
        argmin,
        band,
        empty_levels,
        modulus_of_continuity: modulus,
        observed_h_range,
        assumptions: vec![
            "sublevel band sets {x : |h(x) - w| <= delta} are compact",
            "the observed range of h on the grid stands in for the true range W",
        ],
    })
}
