//! Batch runner behind the `invariant-kit` binary: executes the jobs of a
//! problem config and writes `report.json` plus per-job CSV files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::certify::{
    check_mbf, check_tmbf, classify_time_varying, distance_quotient_check, gamma_construct, nagumo_boundary_check,
    stability_classify, CertificationReport, QuotientTrend, TimeMu, Verdict, DEFAULT_QUOTIENT_EPS,
};
use crate::config::{Job, Problem, ProblemConfig, Tolerances};
use crate::control::{check_mcbf, continuity_scan};
use crate::error::{Error, Result};
use crate::minfunc::{classify, MinimalityVerdict, MuCandidate, Status};
use crate::sim::{comparison_overlay, integrate_batch, invariance_test, sample_in_set, Dynamics, EventKind, Trajectory};

pub const REPORT_SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    /// Advisory output that does not affect the exit code.
    Info,
    Pass,
    Inconclusive,
    Fail,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub index: usize,
    pub job: &'static str,
    pub status: JobStatus,
    pub result: Value,
    /// Files written by the job, relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub tool: Value,
    pub config: String,
    pub seed: u64,
    pub problem: ProblemConfig,
    pub tolerances: Tolerances,
    pub jobs: Vec<JobRecord>,
    pub status: JobStatus,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

pub struct RunOutcome {
    pub exit_code: i32,
    pub report_path: PathBuf,
    pub report: RunReport,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn status_of_minimality(v: &MinimalityVerdict) -> JobStatus {
    match v.status {
        Status::Minimal(_) => JobStatus::Pass,
        Status::NotMinimal => JobStatus::Fail,
        Status::Inconclusive => JobStatus::Inconclusive,
    }
}

fn status_of_verdict(v: &Verdict) -> JobStatus {
    match v {
        Verdict::Certified => JobStatus::Pass,
        Verdict::CertifiedModuloClassification => JobStatus::Inconclusive,
        Verdict::Violated { .. } | Verdict::MuNotMinimal => JobStatus::Fail,
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Numerical(format!("serialisation failed: {e}")))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn wrong_kind(job: &Job, need: &str) -> Error {
    Error::InvalidArgument(format!("job {} needs a problem of kind {need}", job.name()))
}

struct Runner<'a> {
    problem: &'a Problem,
    tol: &'a Tolerances,
    out: &'a Path,
    seed: u64,
}

struct JobOutput {
    status: JobStatus,
    result: Value,
    files: Vec<(String, Vec<u8>)>,
}

impl Runner<'_> {
    fn mu(&self) -> Option<&MuCandidate> {
        match self.problem {
            Problem::Mbf(p) => Some(&p.mu),
            Problem::Mcbf(p) => Some(&p.mu),
            Problem::Tmbf { problem, .. } => match &problem.mu {
                TimeMu::Invariant(c) => Some(c),
                TimeMu::Varying { .. } => None,
            },
        }
    }

    fn initial_states(&self, index: usize, x0: &Option<Vec<Vec<f64>>>, random: Option<usize>) -> Result<Vec<Vec<f64>>> {
        let mut states = x0.clone().unwrap_or_default();
        if let Some(n) = random {
            let seed = self.seed.wrapping_add(index as u64);
            states.extend(sample_in_set(self.problem.h(), self.problem.domain(), n, seed)?);
        }
        if states.is_empty() {
            return Err(Error::InvalidArgument("give x0 and/or random for initial states".into()));
        }
        Ok(states)
    }

    fn trajectories(&self, x0s: &[Vec<f64>], t_end: f64, dt: f64) -> Result<Vec<Trajectory>> {
        let dynamics = match self.problem {
            Problem::Mbf(p) => Dynamics::Autonomous(&p.f),
            Problem::Tmbf { problem, .. } => Dynamics::TimeVarying(&problem.f),
            Problem::Mcbf(p) => Dynamics::ClosedLoop(p),
        };
        integrate_batch(dynamics, self.problem.h(), Some(self.problem.domain()), x0s, t_end, dt)
            .into_iter()
            .collect()
    }

    fn certification(&self, r: &CertificationReport, extra: Option<Value>, name: String) -> Result<JobOutput> {
        let mut result = to_value(r)?;
        if let (Some(Value::Object(extra)), Value::Object(obj)) = (extra, &mut result) {
            obj.extend(extra);
        }
        let csv = csv_bytes(|b| r.write_csv(b))?;
        Ok(JobOutput { status: status_of_verdict(&r.verdict), result, files: vec![(name, csv)] })
    }

    fn run_job(&self, index: usize, job: &Job) -> Result<JobOutput> {
        let tol = self.tol;
        let prefix = format!("{index:02}_{}", job.name());
        match job {
            Job::Classify => {
                let v = match self.problem {
                    Problem::Tmbf { problem, time } => match &problem.mu {
                        TimeMu::Varying { mu, locally_lipschitz } => {
                            classify_time_varying(mu, *locally_lipschitz, time.t_end, time.t_grid)?
                        }
                        TimeMu::Invariant(c) => classify(c)?,
                    },
                    _ => classify(self.mu().expect("autonomous problems carry a candidate"))?,
                };
                Ok(JobOutput { status: status_of_minimality(&v), result: to_value(&v)?, files: vec![] })
            }
            Job::Certify => match self.problem {
                Problem::Mbf(p) => self.certification(&check_mbf(p, tol.certify)?, None, format!("{prefix}.csv")),
                Problem::Tmbf { problem, time } => self.certification(
                    &check_tmbf(problem, time.t_end, time.t_grid, tol.certify)?,
                    None,
                    format!("{prefix}.csv"),
                ),
                Problem::Mcbf(p) => {
                    let r = check_mcbf(p, tol.certify)?;
                    let extra = json!({
                        "unbounded_points": r.unbounded_points,
                        "empty_input_set_points": r.empty_input_set_points,
                        "strict_interior_failures": r.strict_interior_failures,
                        "first_strict_interior_failure": r.first_strict_interior_failure,
                        "compact_inputs_assumption": r.compact_inputs_assumption,
                    });
                    self.certification(&r.certification, Some(extra), format!("{prefix}.csv"))
                }
            },
            Job::Nagumo => {
                let Problem::Mbf(p) = self.problem else { return Err(wrong_kind(job, "mbf")) };
                let r = nagumo_boundary_check(p, tol.nagumo_band, tol.nagumo)?;
                let status = match (r.pass, r.regular) {
                    (false, _) => JobStatus::Fail,
                    (true, true) => JobStatus::Pass,
                    (true, false) => JobStatus::Inconclusive,
                };
                let csv = csv_bytes(|b| {
                    let mut w = csv::Writer::from_writer(b);
                    let n = p.states().len();
                    let mut header: Vec<String> = (1..=n).map(|i| format!("grid_x{i}")).collect();
                    header.extend((1..=n).map(|i| format!("x{i}")));
                    header.extend(["h", "Lfh", "grad_norm"].map(String::from));
                    w.write_record(&header)?;
                    for s in &r.samples {
                        let mut rec: Vec<String> = s.grid_x.iter().chain(&s.x).map(|v| v.to_string()).collect();
                        rec.extend([s.h, s.lfh, s.grad_norm].map(|v| v.to_string()));
                        w.write_record(&rec)?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
                let mut result = to_value(&r)?;
                if let Value::Object(o) = &mut result {
                    o.remove("samples");
                    o.insert("sample_count".into(), json!(r.samples.len()));
                }
                Ok(JobOutput { status, result, files: vec![(format!("{prefix}.csv"), csv)] })
            }
            Job::DistanceQuotient { eps, points } => {
                let Problem::Mbf(p) = self.problem else { return Err(wrong_kind(job, "mbf")) };
                let eps = eps.clone().unwrap_or_else(|| DEFAULT_QUOTIENT_EPS.to_vec());
                let pts = match points {
                    Some(p) => p.clone(),
                    None => nagumo_boundary_check(p, tol.nagumo_band, tol.nagumo)?
                        .samples
                        .into_iter()
                        .map(|s| s.x)
                        .collect(),
                };
                let r = distance_quotient_check(p, &eps, &pts)?;
                let status = if r.all_to_zero {
                    JobStatus::Pass
                } else if r.rows.iter().any(|row| row.trend == QuotientTrend::BoundedAway) {
                    JobStatus::Fail
                } else {
                    JobStatus::Inconclusive
                };
                let csv = csv_bytes(|b| {
                    let mut w = csv::Writer::from_writer(b);
                    let n = p.states().len();
                    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
                    header.extend(eps.iter().map(|e| format!("q_{e}")));
                    header.push("trend".into());
                    w.write_record(&header)?;
                    for row in &r.rows {
                        let mut rec: Vec<String> = row.x.iter().chain(&row.quotients).map(|v| v.to_string()).collect();
                        rec.push(to_value(&row.trend)?.as_str().unwrap_or_default().to_string());
                        w.write_record(&rec)?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
                let to_zero = r.rows.iter().filter(|row| row.trend == QuotientTrend::ToZero).count();
                let bounded = r.rows.iter().filter(|row| row.trend == QuotientTrend::BoundedAway).count();
                let result = json!({
                    "eps": r.eps,
                    "points": r.rows.len(),
                    "all_to_zero": r.all_to_zero,
                    "to_zero": to_zero,
                    "bounded_away": bounded,
                    "unclear": r.rows.len() - to_zero - bounded,
                });
                Ok(JobOutput { status, result, files: vec![(format!("{prefix}.csv"), csv)] })
            }
            Job::Gamma { w, band } => {
                let Problem::Mbf(p) = self.problem else { return Err(wrong_kind(job, "mbf")) };
                let r = gamma_construct(p, &w.values(), *band)?;
                let classification = match r.mu_candidate() {
                    Ok(c) => Some(classify(&c)?),
                    Err(_) => None,
                };
                let csv = csv_bytes(|b| {
                    let mut wr = csv::Writer::from_writer(b);
                    let n = p.states().len();
                    let mut header = vec!["w".to_string(), "gamma".to_string()];
                    header.extend((1..=n).map(|i| format!("argmin_x{i}")));
                    wr.write_record(&header)?;
                    for ((wv, g), a) in r.w.iter().zip(&r.gamma).zip(&r.argmin) {
                        let mut rec = vec![wv.to_string(), g.map_or(String::new(), |g| g.to_string())];
                        match a {
                            Some(a) => rec.extend(a.iter().map(|v| v.to_string())),
                            None => rec.extend((0..n).map(|_| String::new())),
                        }
                        wr.write_record(&rec)?;
                    }
                    wr.flush()?;
                    Ok(())
                })?;
                let mut result = to_value(&r)?;
                if let Value::Object(o) = &mut result {
                    o.remove("argmin");
                    o.insert("neg_gamma_classification".into(), to_value(&classification)?);
                }
                Ok(JobOutput { status: JobStatus::Info, result, files: vec![(format!("{prefix}.csv"), csv)] })
            }
            Job::Stability { delta } => {
                let mu = self.mu().ok_or_else(|| wrong_kind(job, "mbf, mcbf or tmbf with a time-invariant mu"))?;
                let r = stability_classify(mu, *delta)?;
                Ok(JobOutput { status: JobStatus::Info, result: to_value(&r)?, files: vec![] })
            }
            Job::QpScan { path } => {
                let Problem::Mcbf(p) = self.problem else { return Err(wrong_kind(job, "mcbf")) };
                let r = continuity_scan(p, &path.points())?;
                let status = if r.infeasible.is_empty() { JobStatus::Pass } else { JobStatus::Fail };
                let csv = csv_bytes(|b| r.write_csv(b))?;
                Ok(JobOutput { status, result: to_value(&r)?, files: vec![(format!("{prefix}.csv"), csv)] })
            }
            Job::Simulate { x0, random, t_end, dt } => {
                let x0s = self.initial_states(index, x0, *random)?;
                let trajs = self.trajectories(&x0s, *t_end, *dt)?;
                let mut runs = Vec::with_capacity(trajs.len());
                let mut files = Vec::with_capacity(trajs.len());
                let mut all_ok = true;
                for (k, (x0, tr)) in x0s.iter().zip(&trajs).enumerate() {
                    let inv = invariance_test(tr, tol.invariance);
                    let aborted = tr.events.iter().any(|e| !matches!(e.kind, EventKind::DomainExit));
                    all_ok &= inv.invariant && !aborted;
                    runs.push(json!({
                        "x0": x0,
                        "invariance": inv,
                        "exit_time": tr.exit_time,
                        "events": tr.events,
                        "final_time": tr.times.last(),
                        "final_state": tr.last_state(),
                    }));
                    files.push((format!("{prefix}_{k:03}.csv"), csv_bytes(|b| tr.write_csv(b))?));
                }
                let passed = runs.iter().filter(|r| r["invariance"]["invariant"] == json!(true)).count();
                let status = if all_ok { JobStatus::Pass } else { JobStatus::Fail };
                let result = json!({ "T": t_end, "dt": dt, "runs": runs, "invariant_runs": passed });
                Ok(JobOutput { status, result, files })
            }
            Job::Compare { x0, random, t_end, dt } => {
                let mu = self.mu().ok_or_else(|| wrong_kind(job, "mbf, mcbf or tmbf with a time-invariant mu"))?;
                let x0s = self.initial_states(index, x0, *random)?;
                let trajs = self.trajectories(&x0s, *t_end, *dt)?;
                let mut runs = Vec::with_capacity(trajs.len());
                let mut files = Vec::with_capacity(trajs.len());
                let mut holds = 0;
                for (k, (x0, tr)) in x0s.iter().zip(&trajs).enumerate() {
                    let r = comparison_overlay(tr, mu, tol.comparison_eps0, tol.comparison_refinements)?;
                    holds += r.dominance.holds as usize;
                    if let Some(cmp) = &r.comparison {
                        let csv = csv_bytes(|b| {
                            let mut w = csv::Writer::from_writer(b);
                            w.write_record(["t", "h", "w_estimate", "err_estimate"])?;
                            for (i, t) in cmp.times.iter().enumerate() {
                                let Some(h) = tr.h_values.get(i) else { break };
                                w.write_record([t, h, &cmp.estimate[i], &cmp.err_estimate[i]].map(|v| v.to_string()))?;
                            }
                            w.flush()?;
                            Ok(())
                        })?;
                        files.push((format!("{prefix}_{k:03}.csv"), csv));
                    }
                    runs.push(json!({ "x0": x0, "overlay": r }));
                }
                let status = if holds == runs.len() { JobStatus::Pass } else { JobStatus::Fail };
                let result = json!({ "T": t_end, "dt": dt, "runs": runs, "dominance_holds": holds });
                Ok(JobOutput { status, result, files })
            }
        }
    }
}

fn exit_code(status: JobStatus) -> i32 {
    match status {
        JobStatus::Info | JobStatus::Pass => EXIT_OK,
        JobStatus::Fail => EXIT_FAIL,
        JobStatus::Inconclusive => EXIT_INCONCLUSIVE,
        JobStatus::Error => EXIT_ERROR,
    }
}

/// Loads a config, runs its jobs in order and writes the report bundle.
/// Errors loading the config or writing output are returned; errors
/// inside a job are recorded in the report and end the run with exit
/// code 3.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let path_str = config_path.display().to_string();
    let cfg = ProblemConfig::load(config_path)?;
    let problem = cfg.build(&path_str)?;
    let tol = cfg.tolerances.resolve();
    let out = match (&opts.out_dir, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => config_path.parent().unwrap_or(Path::new(".")).join(o),
        (None, None) => {
            let stem = config_path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            PathBuf::from(format!("{stem}_out"))
        }
    };
    fs::create_dir_all(&out)?;

    let runner = Runner { problem: &problem, tol: &tol, out: &out, seed: opts.seed };
    let mut jobs = Vec::with_capacity(cfg.jobs.len());
    for (index, job) in cfg.jobs.iter().enumerate() {
        match runner.run_job(index, job) {
            Ok(o) => {
                let mut outputs = Vec::with_capacity(o.files.len());
                for (name, bytes) in o.files {
                    write_atomic(runner.out, &name, &bytes)?;
                    outputs.push(name);
                }
                jobs.push(JobRecord { index, job: job.name(), status: o.status, result: o.result, outputs });
            }
            Err(e) => {
                jobs.push(JobRecord {
                    index,
                    job: job.name(),
                    status: JobStatus::Error,
                    result: json!({ "error": format!("job {index} ({}): {e}", job.name()) }),
                    outputs: vec![],
                });
                break;
            }
        }
    }
    let status = jobs.iter().map(|j| j.status).max().unwrap_or(JobStatus::Info);
    let report = RunReport {
        schema: REPORT_SCHEMA,
        tool: json!({ "name": "invariant-kit", "version": env!("CARGO_PKG_VERSION") }),
        config: config_path.file_name().map_or(path_str.clone(), |s| s.to_string_lossy().into_owned()),
        seed: opts.seed,
        problem: cfg,
        tolerances: tol,
        jobs,
        status,
        exit_code: exit_code(status),
    };
    let mut text = serde_json::to_string_pretty(&to_value(&report)?)
        .map_err(|e| Error::Numerical(format!("serialisation failed: {e}")))?;
    text.push('\n');
    write_atomic(&out, "report.json", text.as_bytes())?;
    Ok(RunOutcome { exit_code: report.exit_code, report_path: out.join("report.json"), report })
}

/// One-shot classification used by `invariant-kit check-mu`.
pub fn check_mu(source: &str, declared_lipschitz: bool, declared_divergent: bool) -> Result<(i32, String)> {
    let mut cand = MuCandidate::parse(source)?;
    cand.declared.locally_lipschitz = declared_lipschitz;
    cand.declared.divergent_integral = declared_divergent;
    let v = classify(&cand)?;
    let text = serde_json::to_string_pretty(&to_value(&v)?).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((exit_code(status_of_minimality(&v)), text))
}
