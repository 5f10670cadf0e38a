//! Classification of comparison functions μ as minimal functions.
//!
//! A continuous μ is minimal when the minimal solution of `ẇ = −μ(w)`,
//! `w(0) = 0`, stays nonnegative. That happens exactly when one of four
//! cases holds near `w = 0⁻`:
//!
//! 1. `μ(0) < 0`;
//! 2. `μ(0) = 0` and `μ ≤ 0` on some `[−ε, 0)`;
//! 3. `μ(0) = 0` and μ takes both signs on every `[−ε, 0)`;
//! 4. `μ(0) = 0`, `μ > 0` on some `[−ε, 0)` and `1/μ` is not integrable there.
//!
//! Any locally Lipschitz μ with `μ(0) ≤ 0` is minimal as well. Except for
//! the sign of `μ(0)`, every test here samples finitely many points, so
//! verdicts carry a confidence label.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::{ExprError, ExprFunction};
use crate::quad::adaptive_simpson;

pub const ZERO_TOL: f64 = 1e-12;
const SWEEP_LEVELS: usize = 20;

/// Piecewise-linear interpolant through `(w[i], v[i])`; evaluating outside
/// `[w[0], w[last]]` is a domain error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    w: Vec<f64>,
    v: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(w: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if w.len() != v.len() || w.len() < 2 {
            return Err(Error::InvalidArgument(
                "table needs at least two (w, value) pairs of equal length".into(),
            ));
        }
        if w.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidArgument("table abscissae must be strictly increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("table values must be finite".into()));
        }
        Ok(PiecewiseLinear { w, v })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.w, &self.v)
    }

    pub fn eval(&self, x: f64) -> std::result::Result<f64, ExprError> {
        let n = self.w.len();
        if !(x >= self.w[0] && x <= self.w[n - 1]) {
            return Err(ExprError::Domain {
                subexpression: "table".into(),
                message: format!(
                    "w = {x} outside tabulated range [{}, {}]",
                    self.w[0],
                    self.w[n - 1]
                ),
            });
        }
        let i = self.w.partition_point(|&wi| wi <= x);
        if i == 0 {
            return Ok(self.v[0]);
        }
        if i >= n {
            return Ok(self.v[n - 1]);
        }
        let (w0, w1) = (self.w[i - 1], self.w[i]);
        if x == w0 {
            return Ok(self.v[i - 1]);
        }
        let s = (x - w0) / (w1 - w0);
        Ok(self.v[i - 1] + s * (self.v[i] - self.v[i - 1]))
    }
}

/// A comparison function given either as an expression in one variable or
/// as a table (used for sampled tightest comparison functions).
#[derive(Debug, Clone, PartialEq)]
pub enum MuFunction {
    Expr(ExprFunction),
    Table(PiecewiseLinear),
}

impl MuFunction {
    /// Parses `source` as an expression in `w`.
    pub fn parse(source: &str) -> Result<Self> {
        Ok(MuFunction::Expr(ExprFunction::parse(source, &["w"])?))
    }

    pub fn eval(&self, w: f64) -> std::result::Result<f64, ExprError> {
        match self {
            MuFunction::Expr(e) => e.eval(&[w]),
            MuFunction::Table(t) => t.eval(w),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            MuFunction::Expr(e) => e.source().to_string(),
            MuFunction::Table(t) => format!("table[{} knots]", t.w.len()),
        }
    }
}

impl From<ExprFunction> for MuFunction {
    fn from(e: ExprFunction) -> Self {
        MuFunction::Expr(e)
    }
}

impl Serialize for MuFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.describe())
    }
}

/// User assertions that override sampled tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeclaredProperties {
    pub locally_lipschitz: bool,
    pub divergent_integral: bool,
    /// Where the assertion comes from; echoed into evidence.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuCandidate {
    pub mu: MuFunction,
    pub declared: DeclaredProperties,
    /// Probe interval is `[−probe_width, 0]`.
    pub probe_width: f64,
    pub sample_count: usize,
    /// Threshold below which |μ| counts as zero.
    pub zero_tol: f64,
}

impl MuCandidate {
    pub fn new(mu: impl Into<MuFunction>) -> Self {
        MuCandidate {
            mu: mu.into(),
            declared: DeclaredProperties::default(),
            probe_width: 1.0,
            sample_count: 10001,
            zero_tol: ZERO_TOL,
        }
    }

    pub fn parse(source: &str) -> Result<Self> {
        Ok(Self::new(MuFunction::parse(source)?))
    }

    pub fn lipschitz(mut self) -> Self {
        self.declared.locally_lipschitz = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.probe_width > 0.0) {
            return Err(Error::InvalidArgument("probe width must be positive".into()));
        }
        if self.sample_count < 3 {
            return Err(Error::InvalidArgument("sample_count must be at least 3".into()));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::InvalidArgument("zero_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalCase {
    Case1,
    Case2,
    Case3,
    Case4,
    Corollary1,
    /// Time-varying μ with μ(t, 0) ≤ 0 and declared unique solutions.
    TimeVaryingUnique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Minimal(MinimalCase),
    NotMinimal,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Exact,
    Sampled,
    Declared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignWitness {
    pub eps: f64,
    pub w_positive: f64,
    pub w_negative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    MuAtZero { mu0: f64 },
    NonpositiveNearZero { mu0: f64, eps: f64, max_sample: f64 },
    SignChanges { mu0: f64, witnesses: Vec<SignWitness> },
    Divergence { mu0: f64, report: DivergenceReport },
    DeclaredLipschitz { mu0: f64, note: Option<String> },
    DeclaredDivergent { mu0: f64, note: Option<String> },
    NotMinimal { mu0: f64, reason: String, divergence: Option<DivergenceReport> },
    Inconclusive { mu0: f64, reason: String },
    TimeVarying { max_mu_at_zero: f64, samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityVerdict {
    pub status: Status,
    pub evidence: Evidence,
    pub confidence: Confidence,
}

impl MinimalityVerdict {
    pub fn is_minimal(&self) -> bool {
        matches!(self.status, Status::Minimal(_))
    }

    pub fn case(&self) -> Option<MinimalCase> {
        match self.status {
            Status::Minimal(c) => Some(c),
            _ => None,
        }
    }

    pub fn status_name(&self) -> &'static str {
        match self.status {
            Status::Minimal(_) => "minimal",
            Status::NotMinimal => "not_minimal",
            Status::Inconclusive => "inconclusive",
        }
    }
}

impl Serialize for MinimalityVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            status: &'static str,
            case: Option<MinimalCase>,
            evidence: &'a Evidence,
            confidence: Confidence,
        }
        Repr {
            status: self.status_name(),
            case: self.case(),
            evidence: &self.evidence,
            confidence: self.confidence,
        }
        .serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceVerdict {
    Divergent,
    Convergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub verdict: DivergenceVerdict,
    pub eps: f64,
    /// `η_j = eps·2^{−j}`, j = 1…len.
    pub etas: Vec<f64>,
    /// `I_j = ∫_{−eps}^{−η_j} dw/μ(w)`.
    pub partial_integrals: Vec<f64>,
    /// For convergent tails: geometric bound on the remaining mass.
    pub tail_bound: Option<f64>,
    /// False if some panel hit the quadrature recursion limit.
    pub quadrature_converged: bool,
}

const PANEL_TOL: f64 = 1e-10;

/// Semi-decides integrability of `1/μ` on `[−eps, 0)`.
///
/// Partial integrals are accumulated panel by panel. The last ten increments
/// decide: all tiny, or shrinking geometrically, means convergent; bounded
/// below and not shrinking fast means divergent (logarithmic or worse).
pub fn divergence_test(mu: &MuFunction, eps: f64, eta_sequence_len: usize) -> Result<DivergenceReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    if eta_sequence_len < 12 {
        return Err(Error::InvalidArgument("eta_sequence_len must be at least 12".into()));
    }
    let mut failure: Option<Error> = None;
    let mut integrand = |w: f64| -> std::result::Result<f64, ()> {
        match mu.eval(w) {
            Ok(v) if v > 0.0 => Ok(1.0 / v),
            Ok(v) => {
                failure = Some(Error::SignViolation { w, value: v });
                Err(())
            }
            Err(e) => {
                failure = Some(e.into());
                Err(())
            }
        }
    };

    let mut etas = Vec::with_capacity(eta_sequence_len);
    let mut partial = Vec::with_capacity(eta_sequence_len);
    let mut acc = 0.0;
    let mut left = -eps;
    let mut converged = true;
    for j in 1..=eta_sequence_len {
        let eta = eps * 0.5f64.powi(j as i32);
        let q = match adaptive_simpson(&mut integrand, left, -eta, PANEL_TOL) {
            Ok(q) => q,
            Err(()) => return Err(failure.take().expect("integrand failure recorded")),
        };
        converged &= q.converged;
        acc += q.value;
        etas.push(eta);
        partial.push(acc);
        left = -eta;
    }

    let tail = &partial[partial.len() - 11..];
    let d: Vec<f64> = tail.windows(2).map(|p| p[1] - p[0]).collect();
    let max_d = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_d = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = d
        .windows(2)
        .map(|p| if p[0] > 0.0 { p[1] / p[0] } else { f64::INFINITY })
        .fold(f64::NEG_INFINITY, f64::max);

    const INCREMENT_FLOOR: f64 = 1e-9;
    let (verdict, tail_bound) = if max_d < INCREMENT_FLOOR {
        (DivergenceVerdict::Convergent, Some(max_d.max(0.0)))
    } else if min_d > 0.0 && max_ratio <= 0.9 {
        let last = d[d.len() - 1];
        (DivergenceVerdict::Convergent, Some(last * max_ratio / (1.0 - max_ratio)))
    } else if min_d > INCREMENT_FLOOR && d[d.len() - 1] / d[0] >= 0.5 {
        (DivergenceVerdict::Divergent, None)
    } else {
        (DivergenceVerdict::Inconclusive, None)
    };

    Ok(DivergenceReport {
        verdict,
        eps,
        etas,
        partial_integrals: partial,
        tail_bound,
        quadrature_converged: converged,
    })
}

struct Sweep {
    eps: f64,
    max_sample: f64,
    has_pos: Option<f64>,
    has_neg: Option<f64>,
    all_nonneg: bool,
}

fn sweep_level(mu: &MuFunction, eps: f64, n: usize, zt: f64) -> Result<Sweep> {
    let mut s = Sweep {
        eps,
        max_sample: f64::NEG_INFINITY,
        has_pos: None,
        has_neg: None,
        all_nonneg: true,
    };
    // n points on [−eps, 0]; the last one (w = 0) is excluded.
    for j in 0..n - 1 {
        let w = -eps + eps * j as f64 / (n - 1) as f64;
        let v = mu.eval(w)?;
        s.max_sample = s.max_sample.max(v);
        if v > zt && s.has_pos.is_none() {
            s.has_pos = Some(w);
        }
        if v < -zt {
            s.all_nonneg = false;
            if s.has_neg.is_none() {
                s.has_neg = Some(w);
            }
        }
    }
    Ok(s)
}

/// Decides which minimality case, if any, applies to `cand`.
///
/// Precedence: declared Lipschitz shortcut, then the sign of μ(0), then
/// cases 2, 3 and 4 on the sweep `ε = k, k/2, …` (20 levels).
pub fn classify(cand: &MuCandidate) -> Result<MinimalityVerdict> {
    cand.validate()?;
    let zt = cand.zero_tol;
    let mu = &cand.mu;
    let mu0 = mu.eval(0.0)?;

    if cand.declared.locally_lipschitz && mu0 <= zt {
        return Ok(MinimalityVerdict {
            status: Status::Minimal(MinimalCase::Corollary1),
            evidence: Evidence::DeclaredLipschitz { mu0, note: cand.declared.note.clone() },
            confidence: Confidence::Declared,
        });
    }
    if mu0 < -zt {
        return Ok(MinimalityVerdict {
            status: Status::Minimal(MinimalCase::Case1),
            evidence: Evidence::MuAtZero { mu0 },
            confidence: Confidence::Exact,
        });
    }
    if mu0 > zt {
        return Ok(MinimalityVerdict {
            status: Status::NotMinimal,
            evidence: Evidence::NotMinimal {
                mu0,
                reason: "mu(0) > 0".into(),
                divergence: None,
            },
            confidence: Confidence::Exact,
        });
    }

    let mut levels = Vec::with_capacity(SWEEP_LEVELS);
    for i in 0..SWEEP_LEVELS {
        let eps = cand.probe_width * 0.5f64.powi(i as i32);
        let s = sweep_level(mu, eps, cand.sample_count, zt)?;
        if s.max_sample <= zt {
            return Ok(MinimalityVerdict {
                status: Status::Minimal(MinimalCase::Case2),
                evidence: Evidence::NonpositiveNearZero { mu0, eps, max_sample: s.max_sample },
                confidence: Confidence::Sampled,
            });
        }
        levels.push(s);
    }

    if levels.iter().all(|s| s.has_pos.is_some() && s.has_neg.is_some()) {
        let witnesses = levels
            .iter()
            .map(|s| SignWitness {
                eps: s.eps,
                w_positive: s.has_pos.unwrap(),
                w_negative: s.has_neg.unwrap(),
            })
            .collect();
        return Ok(MinimalityVerdict {
            status: Status::Minimal(MinimalCase::Case3),
            evidence: Evidence::SignChanges { mu0, witnesses },
            confidence: Confidence::Sampled,
        });
    }

    // Case 4 needs μ ≥ 0 on a whole tail of the sweep.
    let tail_start = (0..SWEEP_LEVELS)
        .rev()
        .take_while(|&i| levels[i].all_nonneg)
        .last();
    let Some(first) = tail_start else {
        return Ok(inconclusive(mu0, "mu takes negative values arbitrarily close to 0 without a sign change on every probe"));
    };

    if cand.declared.divergent_integral {
        return Ok(MinimalityVerdict {
            status: Status::Minimal(MinimalCase::Case4),
            evidence: Evidence::DeclaredDivergent { mu0, note: cand.declared.note.clone() },
            confidence: Confidence::Declared,
        });
    }

    // Start at the widest nonnegative probe and shrink past exact zeros of μ.
    let mut report = None;
    for s in &levels[first..] {
        match divergence_test(mu, s.eps, 40) {
            Ok(r) => {
                report = Some(r);
                break;
            }
            Err(Error::SignViolation { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some(report) = report else {
        return Ok(inconclusive(mu0, "mu vanishes at sampled points on every probe interval"));
    };
    Ok(match report.verdict {
        DivergenceVerdict::Divergent => MinimalityVerdict {
            status: Status::Minimal(MinimalCase::Case4),
            evidence: Evidence::Divergence { mu0, report },
            confidence: Confidence::Sampled,
        },
        DivergenceVerdict::Convergent => MinimalityVerdict {
            status: Status::NotMinimal,
            evidence: Evidence::NotMinimal {
                mu0,
                reason: "mu(0) = 0, mu > 0 just left of 0 and 1/mu is integrable there".into(),
                divergence: Some(report),
            },
            confidence: Confidence::Sampled,
        },
        DivergenceVerdict::Inconclusive => MinimalityVerdict {
            status: Status::Inconclusive,
            evidence: Evidence::Divergence { mu0, report },
            confidence: Confidence::Sampled,
        },
    })
}

fn inconclusive(mu0: f64, reason: &str) -> MinimalityVerdict {
    MinimalityVerdict {
        status: Status::Inconclusive,
        evidence: Evidence::Inconclusive { mu0, reason: reason.into() },
        confidence: Confidence::Sampled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify_src(src: &str) -> MinimalityVerdict {
        classify(&MuCandidate::parse(src).unwrap()).unwrap()
    }

    #[test]
    fn example_one_is_not_minimal() {
        let v = classify_src("3*cbrt(w)^2");
        assert_eq!(v.status, Status::NotMinimal);
        assert_eq!(v.confidence, Confidence::Sampled);
    }

    #[test]
    fn linear_with_lipschitz_declaration() {
        let v = classify(&MuCandidate::parse("2*w").unwrap().lipschitz()).unwrap();
        assert_eq!(v.status, Status::Minimal(MinimalCase::Corollary1));
        assert_eq!(v.confidence, Confidence::Declared);
    }

    #[test]
    fn log_example_is_case_four() {
        let v = classify_src("ifpos(w, -w*ln(w), ifpos(-w, w*ln(-w), 0))");
        assert_eq!(v.status, Status::Minimal(MinimalCase::Case4), "{v:?}");
    }

    #[test]
    fn negative_two_thirds_power_is_case_two() {
        let v = classify_src("-cbrt(w)^2");
        assert_eq!(v.status, Status::Minimal(MinimalCase::Case2));
    }

    #[test]
    fn oscillating_is_case_three() {
        let v = classify_src("ifpos(-w, w*sin(1/w), 0)");
        assert_eq!(v.status, Status::Minimal(MinimalCase::Case3), "{v:?}");
    }

    #[test]
    fn sign_of_mu_at_zero_is_exact() {
        let v = classify_src("w^2 - 0.5");
        assert_eq!(v.status, Status::Minimal(MinimalCase::Case1));
        assert_eq!(v.confidence, Confidence::Exact);
        let v = classify_src("w + 0.5");
        assert_eq!(v.status, Status::NotMinimal);
        assert_eq!(v.confidence, Confidence::Exact);
    }

    #[test]
    fn divergence_examples() {
        let harmonic = divergence_test(&MuFunction::parse("-w").unwrap(), 1.0, 40).unwrap();
        assert_eq!(harmonic.verdict, DivergenceVerdict::Divergent);
        for (eta, i) in harmonic.etas.iter().zip(&harmonic.partial_integrals) {
            assert!((i - (1.0 / eta).ln()).abs() < 1e-8);
        }

        let root = divergence_test(&MuFunction::parse("cbrt(w)^2").unwrap(), 1.0, 40).unwrap();
        assert_eq!(root.verdict, DivergenceVerdict::Convergent);
        for (eta, i) in root.etas.iter().zip(&root.partial_integrals) {
            // Antiderivative 3·cbrt(w).
            let exact = 3.0 * (-eta).cbrt() - 3.0 * (-1f64).cbrt();
            assert!((i - exact).abs() < 1e-7, "{i} vs {exact}");
        }
        assert!(root.tail_bound.unwrap() > 0.0);
    }

    #[test]
    fn sign_violation_reported() {
        let r = divergence_test(&MuFunction::parse("w").unwrap(), 1.0, 20);
        assert!(matches!(r, Err(Error::SignViolation { .. })));
    }

    #[test]
    fn table_interpolation() {
        let t = PiecewiseLinear::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.0, 4.0]).unwrap();
        assert_eq!(t.eval(-0.5).unwrap(), 0.5);
        assert_eq!(t.eval(1.0).unwrap(), 2.0);
        assert_eq!(t.eval(2.0).unwrap(), 4.0);
        assert!(t.eval(2.5).is_err());
    }

    #[test]
    fn verdict_json_shape() {
        let v = classify_src("w^2 - 0.5");
        let j = serde_json::to_value(&v).unwrap();
        assert_eq!(j["status"], "minimal");
        assert_eq!(j["case"], "case1");
        assert_eq!(j["confidence"], "exact");
        assert_eq!(j["evidence"]["kind"], "mu_at_zero");
    }
}
