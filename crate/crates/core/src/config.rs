//! Problem configuration files (JSON) and their translation into the
//! analysis types.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::{BarrierProblem, TimeMu, TimeVaryingProblem, DEFAULT_TOL};
use crate::control::ControlProblem;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::{ExprFunction, VectorExprFunction};
use crate::minfunc::{DeclaredProperties, MuCandidate, MuFunction, PiecewiseLinear, ZERO_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Mbf,
    Tmbf,
    Mcbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Expr(String),
    Table { w: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expressions {
    pub f: Vec<String>,
    pub h: String,
    pub mu: MuSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<String>>>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_nom: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis; a single entry applies to every axis.
    pub grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    pub t_grid: usize,
}

/// Tolerance overrides; unset fields take module defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub certify: Option<f64>,
    pub nagumo_band: Option<f64>,
    pub nagumo: Option<f64>,
    pub invariance: Option<f64>,
    pub mu_zero: Option<f64>,
    pub comparison_eps0: Option<f64>,
    pub comparison_refinements: Option<usize>,
}

/// Every tolerance a run used, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub certify: f64,
    pub nagumo_band: f64,
    pub nagumo: f64,
    pub invariance: f64,
    pub mu_zero: f64,
    pub comparison_eps0: f64,
    pub comparison_refinements: usize,
    pub comparison_abs: f64,
    pub qp_primal: f64,
    pub qp_dual: f64,
    pub strict_interior_slack: f64,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        Tolerances {
            certify: self.certify.unwrap_or(DEFAULT_TOL),
            nagumo_band: self.nagumo_band.unwrap_or(1e-3),
            nagumo: self.nagumo.unwrap_or(DEFAULT_TOL),
            invariance: self.invariance.unwrap_or(crate::sim::DEFAULT_INVARIANCE_TOL),
            mu_zero: self.mu_zero.unwrap_or(ZERO_TOL),
            comparison_eps0: self.comparison_eps0.unwrap_or(1e-3),
            comparison_refinements: self.comparison_refinements.unwrap_or(8),
            comparison_abs: crate::sim::OVERLAY_ABS_TOL,
            qp_primal: crate::qp::PRIMAL_TOL,
            qp_dual: crate::qp::DUAL_TOL,
            strict_interior_slack: crate::control::DEFAULT_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub points: usize,
}

impl Segment {
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.points.max(1);
        (0..n)
            .map(|i| {
                let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                self.from
                    .iter()
                    .zip(&self.to)
                    .map(|(a, b)| if i + 1 == n { *b } else { a + s * (b - a) })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range1 {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Range1 {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| if i + 1 == n { self.to } else { self.from + (self.to - self.from) * i as f64 / (n - 1) as f64 })
            .collect()
    }
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "job", rename_all = "snake_case", deny_unknown_fields)]
pub enum Job {
    Classify,
    Certify,
    Nagumo,
    DistanceQuotient {
        #[serde(default)]
        eps: Option<Vec<f64>>,
        /// Defaults to the projected boundary samples of a Nagumo pass.
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
    },
    Gamma {
        w: Range1,
        band: f64,
    },
    Stability {
        delta: f64,
    },
    QpScan {
        path: Segment,
    },
    Simulate {
        /// Explicit initial states.
        #[serde(default)]
        x0: Option<Vec<Vec<f64>>>,
        /// Number of initial states drawn from the grid points of S.
        #[serde(default)]
        random: Option<usize>,
        #[serde(rename = "T")]
        t_end: f64,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    Compare {
        /// Explicit initial states.
        #[serde(default)]
        x0: Option<Vec<Vec<f64>>>,
        /// Number of initial states drawn from the grid points of S.
        #[serde(default)]
        random: Option<usize>,
        #[serde(rename = "T")]
        t_end: f64,
        #[serde(default = "default_dt")]
        dt: f64,
    },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Classify => "classify",
            Job::Certify => "certify",
            Job::Nagumo => "nagumo",
            Job::DistanceQuotient { .. } => "distance_quotient",
            Job::Gamma { .. } => "gamma",
            Job::Stability { .. } => "stability",
            Job::QpScan { .. } => "qp_scan",
            Job::Simulate { .. } => "simulate",
            Job::Compare { .. } => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub states: Vec<String>,
    pub expressions: Expressions,
    #[serde(default)]
    pub mu_properties: DeclaredProperties,
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    pub jobs: Vec<Job>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// A validated config with every expression parsed.
#[derive(Debug, Clone)]
pub enum Problem {
    Mbf(BarrierProblem),
    Tmbf { problem: TimeVaryingProblem, time: TimeSpec },
    Mcbf(ControlProblem),
}

impl Problem {
    pub fn domain(&self) -> &BoxDomain {
        match self {
            Problem::Mbf(p) => &p.domain,
            Problem::Tmbf { problem, .. } => &problem.domain,
            Problem::Mcbf(p) => &p.domain,
        }
    }

    pub fn h(&self) -> &ExprFunction {
        match self {
            Problem::Mbf(p) => &p.h,
            Problem::Tmbf { problem, .. } => &problem.h,
            Problem::Mcbf(p) => &p.h,
        }
    }
}

pub struct ConfigContext<'a> {
    pub path: &'a str,
}

impl ConfigContext<'_> {
    fn err(&self, field: &str, message: impl std::fmt::Display) -> Error {
        Error::Config { path: format!("{}: {field}", self.path), message: message.to_string() }
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str, path: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            path: format!("{path}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Parses every expression and checks the config is complete for its kind.
    pub fn build(&self, path: &str) -> Result<Problem> {
        let cx = ConfigContext { path };
        if self.jobs.is_empty() {
            return Err(cx.err("jobs", "job list is empty"));
        }
        if self.states.is_empty() {
            return Err(cx.err("states", "at least one state variable is required"));
        }
        let n = self.states.len();
        let mut vars = self.states.clone();
        if self.kind == ProblemKind::Tmbf {
            if vars.iter().any(|v| v == "t") {
                return Err(cx.err("states", "\"t\" is reserved for time in tmbf problems"));
            }
            vars.push("t".into());
        }
        let e = &self.expressions;
        if e.f.len() != n {
            return Err(cx.err("expressions.f", format!("expected {n} components, got {}", e.f.len())));
        }
        let f = VectorExprFunction::parse_vector(&e.f, &vars).map_err(|x| cx.err("expressions.f", x))?;
        let h = ExprFunction::parse(&e.h, &vars).map_err(|x| cx.err("expressions.h", x))?;
        let d = &self.domain;
        let counts = match d.grid.as_slice() {
            [c] => vec![*c; n],
            g => g.to_vec(),
        };
        if d.lo.len() != n || d.hi.len() != n || counts.len() != n {
            return Err(cx.err("domain", format!("lo, hi and grid must have {n} entries")));
        }
        let domain = BoxDomain::new(d.lo.clone(), d.hi.clone(), counts).map_err(|x| cx.err("domain", x))?;
        let tol = self.tolerances.resolve();

        let candidate = |spec: &MuSpec| -> Result<MuCandidate> {
            let mu = match spec {
                MuSpec::Expr(s) => MuFunction::parse(s).map_err(|x| cx.err("expressions.mu", x))?,
                MuSpec::Table { w, v } => MuFunction::Table(
                    PiecewiseLinear::new(w.clone(), v.clone()).map_err(|x| cx.err("expressions.mu", x))?,
                ),
            };
            let mut c = MuCandidate::new(mu);
            c.declared = self.mu_properties.clone();
            c.zero_tol = tol.mu_zero;
            c.validate().map_err(|x| cx.err("tolerances.mu_zero", x))?;
            Ok(c)
        };

        if self.kind != ProblemKind::Mcbf {
            for (name, present) in [("g", e.g.is_some()), ("A", e.a.is_some()), ("b", e.b.is_some()), ("k_nom", e.k_nom.is_some())] {
                if present {
                    return Err(cx.err(&format!("expressions.{name}"), "only valid for kind \"mcbf\""));
                }
            }
        }
        if self.kind != ProblemKind::Tmbf && self.time.is_some() {
            return Err(cx.err("time", "only valid for kind \"tmbf\""));
        }

        match self.kind {
            ProblemKind::Mbf => {
                let mu = candidate(&e.mu)?;
                Ok(Problem::Mbf(BarrierProblem::new(f, h, mu, domain).map_err(|x| cx.err("expressions", x))?))
            }
            ProblemKind::Tmbf => {
                let time = self.time.clone().ok_or_else(|| cx.err("time", "tmbf problems need t_end and t_grid"))?;
                let mu = match &e.mu {
                    MuSpec::Expr(s) => TimeMu::Varying {
                        mu: ExprFunction::parse(s, &["t", "w"]).map_err(|x| cx.err("expressions.mu", x))?,
                        locally_lipschitz: self.mu_properties.locally_lipschitz,
                    },
                    table => TimeMu::Invariant(candidate(table)?),
                };
                let problem = TimeVaryingProblem::new(f, h, mu, domain).map_err(|x| cx.err("expressions", x))?;
                Ok(Problem::Tmbf { problem, time })
            }
            ProblemKind::Mcbf => {
                let mu = candidate(&e.mu)?;
                let g_src = e.g.as_ref().ok_or_else(|| cx.err("expressions.g", "required for mcbf"))?;
                let m = g_src.first().map_or(0, Vec::len);
                if g_src.len() != n || g_src.iter().any(|r| r.len() != m) {
                    return Err(cx.err("expressions.g", format!("expected {n} rows of equal length")));
                }
                let g = VectorExprFunction::parse_matrix(g_src, m, &vars).map_err(|x| cx.err("expressions.g", x))?;
                let (a, b) = match (&e.a, &e.b) {
                    (Some(a), Some(b)) => {
                        if a.iter().any(|r| r.len() != m) {
                            return Err(cx.err("expressions.A", format!("rows must have {m} entries")));
                        }
                        if b.len() != a.len() {
                            return Err(cx.err("expressions.b", format!("expected {} entries", a.len())));
                        }
                        (
                            Some(VectorExprFunction::parse_matrix(a, m, &vars).map_err(|x| cx.err("expressions.A", x))?),
                            Some(VectorExprFunction::parse_vector(b, &vars).map_err(|x| cx.err("expressions.b", x))?),
                        )
                    }
                    (None, None) => (None, None),
                    _ => return Err(cx.err("expressions.A", "A and b must be given together")),
                };
                let k_nom = match &e.k_nom {
                    Some(k) => VectorExprFunction::parse_vector(k, &vars).map_err(|x| cx.err("expressions.k_nom", x))?,
                    None => VectorExprFunction::zeros(m, 1, &vars),
                };
                Ok(Problem::Mcbf(
                    ControlProblem::new(f, g, h, mu, a, b, k_nom, domain).map_err(|x| cx.err("expressions", x))?,
                ))
            }
        }
    }
}
