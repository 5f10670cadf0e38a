//! Sampled certification of the barrier inequality `L_f h(x) ≥ −μ(h(x))`.
//!
//! Certification is always relative to a finite grid over a box: a
//! violation witness is a real counterexample, a "certified" verdict means
//! no grid point violates the inequality and μ was classified minimal.

mod boundary;
mod gamma;
mod time_varying;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use boundary::{
    distance_quotient_check, nagumo_boundary_check, BoundarySample, DistanceQuotientReport,
    NagumoReport, QuotientRow, QuotientTrend, DEFAULT_QUOTIENT_EPS,
};
pub use gamma::{gamma_construct, GammaReport};
pub use time_varying::{check_tmbf, classify_time_varying, TimeMu, TimeVaryingProblem};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::{ExprFunction, VectorExprFunction};
use crate::minfunc::{classify, MinimalityVerdict, MuCandidate, Status};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Autonomous barrier problem `ẋ = f(x)`, `S = {h ≥ 0}`, over a sampled box.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierProblem {
    pub f: VectorExprFunction,
    pub h: ExprFunction,
    pub mu: MuCandidate,
    pub domain: BoxDomain,
}

impl BarrierProblem {
    pub fn new(f: VectorExprFunction, h: ExprFunction, mu: MuCandidate, domain: BoxDomain) -> Result<Self> {
        let n = h.variables().len();
        if f.cols() != 1 || f.rows() != n {
            return Err(Error::Dimension(format!(
                "f must be a {n}-vector to match h's variables, got {}x{}",
                f.rows(),
                f.cols()
            )));
        }
        if f.variables() != h.variables() {
            return Err(Error::Dimension(format!(
                "f and h must share variables, got {:?} and {:?}",
                f.variables(),
                h.variables()
            )));
        }
        if domain.dim() != n {
            return Err(Error::Dimension(format!("box has {} axes, state has {n}", domain.dim())));
        }
        mu.validate()?;
        Ok(BarrierProblem { f, h, mu, domain })
    }

    pub fn states(&self) -> &[String] {
        self.h.variables()
    }

    /// `(h(x), L_f h(x), nondifferentiable)` at `x`.
    pub fn lie(&self, x: &[f64]) -> Result<(f64, f64, bool)> {
        lie_derivative(&self.f, &self.h, x)
    }
}

pub(crate) fn lie_derivative(f: &VectorExprFunction, h: &ExprFunction, x: &[f64]) -> Result<(f64, f64, bool)> {
    let (hv, g) = h.value_and_grad(x)?;
    let fx = f.eval(x)?;
    let mut lfh = 0.0;
    for (gi, fi) in g.values.iter().zip(&fx) {
        lfh += gi * fi;
    }
    Ok((hv, lfh, g.nondifferentiable))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub x: Vec<f64>,
    pub h: f64,
    pub lfh: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Violated { witness: Sample },
    /// The inequality holds on the grid but μ could not be classified.
    CertifiedModuloClassification,
    /// The inequality holds on the grid but μ is not a minimal function,
    /// so nothing follows about invariance.
    MuNotMinimal,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Violated { .. } => "violated",
            Verdict::CertifiedModuloClassification => "certified_modulo_classification",
            Verdict::MuNotMinimal => "mu_not_minimal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum Warning {
    /// h < 0 at every grid point.
    EmptyS,
    /// Grid points where the gradient of h was taken across a kink.
    NondifferentiablePoints { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    #[serde(skip)]
    pub samples: Vec<Sample>,
    pub sample_count: usize,
    pub min_margin: f64,
    pub argmin: Sample,
    pub argmin_index: usize,
    pub verdict: Verdict,
    pub mu_verdict: MinimalityVerdict,
    pub warnings: Vec<Warning>,
    pub tol: f64,
    pub domain: BoxDomain,
    /// Always "sampled box": the verdict covers the grid only.
    pub scope: &'static str,
}

impl CertificationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.samples.first().map(|s| s.x.len()).unwrap_or(0);
        let timed = self.samples.first().is_some_and(|s| s.t.is_some());
        let mut header = Vec::new();
        if timed {
            header.push("t".to_string());
        }
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(["h", "Lfh", "margin"].map(String::from));
        out.write_record(&header)?;
        for s in &self.samples {
            let mut row = Vec::with_capacity(header.len());
            if let Some(t) = s.t {
                row.push(t.to_string());
            }
            row.extend(s.x.iter().map(|v| v.to_string()));
            row.extend([s.h, s.lfh, s.margin].map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reduces sample results to a report. Errors surface in grid order;
/// the minimum margin is taken at the lowest index on ties.
pub(crate) fn assemble(
    results: Vec<Result<(Sample, bool)>>,
    mu_verdict: MinimalityVerdict,
    tol: f64,
    domain: &BoxDomain,
) -> Result<CertificationReport> {
    let mut samples = Vec::with_capacity(results.len());
    let mut kinks = 0;
    for r in results {
        let (s, kink) = r?;
        kinks += kink as usize;
        samples.push(s);
    }
    let mut argmin_index = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.margin < samples[argmin_index].margin {
            argmin_index = i;
        }
    }
    let argmin = samples[argmin_index].clone();
    let min_margin = argmin.margin;
    let mut warnings = Vec::new();
    if samples.iter().all(|s| s.h < 0.0) {
        warnings.push(Warning::EmptyS);
    }
    if kinks > 0 {
        warnings.push(Warning::NondifferentiablePoints { count: kinks });
    }
    let verdict = if min_margin < -tol {
        Verdict::Violated { witness: argmin.clone() }
    } else {
        match mu_verdict.status {
            Status::Minimal(_) => Verdict::Certified,
            Status::Inconclusive => Verdict::CertifiedModuloClassification,
            Status::NotMinimal => Verdict::MuNotMinimal,
        }
    };
    Ok(CertificationReport {
        sample_count: samples.len(),
        samples,
        min_margin,
        argmin,
        argmin_index,
        verdict,
        mu_verdict,
        warnings,
        tol,
        domain: domain.clone(),
        scope: "sampled box",
    })
}

/// Evaluates `margin = L_f h(x) + μ(h(x))` at every point of the full box.
pub fn check_mbf(prob: &BarrierProblem, tol: f64) -> Result<CertificationReport> {
    let mu_verdict = classify(&prob.mu)?;
    check_mbf_with_verdict(prob, tol, mu_verdict)
}

pub(crate) fn check_mbf_with_verdict(
    prob: &BarrierProblem,
    tol: f64,
    mu_verdict: MinimalityVerdict,
) -> Result<CertificationReport> {
    let results: Vec<Result<(Sample, bool)>> = (0..prob.domain.len())
        .into_par_iter()
        .map(|i| {
            let x = prob.domain.point(i);
            let (h, lfh, kink) = prob.lie(&x)?;
            let mu = prob.mu.mu.eval(h)?;
            let margin = lfh + mu;
            Ok((Sample { t: None, x, h, lfh, margin }, kink))
        })
        .collect();
    assemble(results, mu_verdict, tol, &prob.domain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityLevel {
    AsymptoticCertificate,
    StabilityCertificate,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub level: StabilityLevel,
    pub delta: f64,
    pub max_mu: f64,
    pub samples: usize,
    pub caveat: &'static str,
}

pub const STABILITY_CAVEAT: &str = "certificate assumes -beta(rho(x,S)) <= h(x) <= -alpha(rho(x,S)) outside S for class-K alpha, beta; this sandwich condition is not checked";

/// Sign of μ on `[−δ, 0)`: strictly negative gives an asymptotic-stability
/// certificate, nonpositive a stability certificate.
pub fn stability_classify(mu: &MuCandidate, delta: f64) -> Result<StabilityReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let n = 10001;
    let mut max_mu = f64::NEG_INFINITY;
    for j in 0..n - 1 {
        let w = -delta + delta * j as f64 / (n - 1) as f64;
        max_mu = max_mu.max(mu.mu.eval(w)?);
    }
    let level = if max_mu < -mu.zero_tol {
        StabilityLevel::AsymptoticCertificate
    } else if max_mu <= mu.zero_tol {
        StabilityLevel::StabilityCertificate
    } else {
        StabilityLevel::None
    };
    Ok(StabilityReport { level, delta, max_mu, samples: n - 1, caveat: STABILITY_CAVEAT })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(f: &[&str], h: &str, mu: MuCandidate, vars: &[&str], lo: f64, hi: f64, count: usize) -> BarrierProblem {
        let n = vars.len();
        BarrierProblem::new(
            VectorExprFunction::parse_vector(f, vars).unwrap(),
            ExprFunction::parse(h, vars).unwrap(),
            mu,
            BoxDomain::uniform(vec![lo; n], vec![hi; n], count).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn two_dimensional_linear_example() {
        let p = problem(
            &["-x1 + x2", "x1 - x2"],
            "x1*x2",
            MuCandidate::parse("2*w").unwrap().lipschitz(),
            &["x1", "x2"],
            -2.0,
            2.0,
            101,
        );
        let r = check_mbf(&p, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        assert!(r.min_margin >= -1e-9);
        assert_eq!(r.sample_count, 101 * 101);
        // margin = x1² + x2², minimized at the origin.
        assert_eq!(r.argmin.x, vec![0.0, 0.0]);
    }

    #[test]
    fn cube_barrier_needs_minimal_mu() {
        let p = problem(&["-1"], "x^3", MuCandidate::parse("3*cbrt(w)^2").unwrap(), &["x"], -2.0, 2.0, 401);
        let r = check_mbf(&p, DEFAULT_TOL).unwrap();
        assert!(r.min_margin >= -DEFAULT_TOL);
        assert_eq!(r.verdict, Verdict::MuNotMinimal);
    }

    #[test]
    fn growth_example() {
        let p = problem(&["x"], "x", MuCandidate::parse("-w").unwrap(), &["x"], -5.0, 5.0, 101);
        assert_eq!(check_mbf(&p, DEFAULT_TOL).unwrap().verdict, Verdict::Certified);

        let p = problem(&["x"], "x", MuCandidate::parse("w").unwrap(), &["x"], -5.0, 5.0, 101);
        let r = check_mbf(&p, DEFAULT_TOL).unwrap();
        match r.verdict {
            Verdict::Violated { witness } => assert!(witness.x[0] < 0.0),
            v => panic!("expected violation, got {v:?}"),
        }
    }

    #[test]
    fn empty_set_warning() {
        let p = problem(&["0"], "-1 - x^2", MuCandidate::parse("-w").unwrap(), &["x"], -1.0, 1.0, 5);
        let r = check_mbf(&p, DEFAULT_TOL).unwrap();
        assert!(r.warnings.contains(&Warning::EmptyS));
    }

    #[test]
    fn stability_levels() {
        let lvl = |s: &str| stability_classify(&MuCandidate::parse(s).unwrap(), 1.0).unwrap().level;
        assert_eq!(lvl("w"), StabilityLevel::AsymptoticCertificate);
        assert_eq!(lvl("0"), StabilityLevel::StabilityCertificate);
        assert_eq!(lvl("-w"), StabilityLevel::None);
    }

    #[test]
    fn dimension_checks() {
        let vars = ["x1", "x2"];
        let r = BarrierProblem::new(
            VectorExprFunction::parse_vector(&["x1"], &vars).unwrap(),
            ExprFunction::parse("x1", &vars).unwrap(),
            MuCandidate::parse("w").unwrap(),
            BoxDomain::uniform(vec![0.0; 2], vec![1.0; 2], 3).unwrap(),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn csv_header() {
        let p = problem(&["x"], "x", MuCandidate::parse("-w").unwrap(), &["x"], -1.0, 1.0, 3);
        let r = check_mbf(&p, DEFAULT_TOL).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x1,h,Lfh,margin");
        assert_eq!(text.lines().count(), 4);
    }
}
