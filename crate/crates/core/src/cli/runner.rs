//! Executes scenario tasks in order and assembles the report.

use std::cell::OnceCell;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::report::{Check, ErrorInfo, Report, RunStatus, TaskReport, TaskStatus, REPORT_SCHEMA};
use super::scenario::{Expect, PathSpec, Scenario, TaskOp, Tolerances};
use crate::asymptotics::{self, LimitOptions};
use crate::channels;
use crate::error::{Error, Result};
use crate::kernels::{self, gram, KolmogorovFactor, PDKernel, PointId};
use crate::linalg;
use crate::matrix::{inner, C64};
use crate::model::{self, LiftSet};
use crate::randomdyn::{self, PathSample};
use crate::rn;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub timing: bool,
    /// `key=value` tolerance overrides applied on top of the scenario's.
    pub tol_overrides: Vec<String>,
}

/// A CSV series produced by a task.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub series: Vec<SeriesFile>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }
}

struct Ctx<'a> {
    s: &'a Scenario,
    tol: Tolerances,
    kf: OnceCell<Result<KolmogorovFactor>>,
    lifts: OnceCell<Result<LiftSet>>,
}

struct Output {
    result: Value,
    checks: Vec<Check>,
    series: Option<String>,
}

impl Output {
    fn new(result: impl Serialize) -> Result<Self> {
        let result = serde_json::to_value(result).map_err(|e| Error::Numerical(format!("result encoding: {e}")))?;
        Ok(Self { result, checks: Vec::new(), series: None })
    }

    fn check(mut self, c: Check) -> Self {
        self.checks.push(c);
        self
    }
}

impl<'a> Ctx<'a> {
    fn kf(&self) -> Result<&KolmogorovFactor> {
        self.kf.get_or_init(|| kernels::kolmogorov(&self.s.kernel, self.tol.rank)).as_ref().map_err(Clone::clone)
    }

    fn lifts(&self) -> Result<&LiftSet> {
        self.lifts
            .get_or_init(|| LiftSet::new(self.kf()?, &self.s.maps, self.tol.admissibility))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn kernel2(&self) -> Result<&PDKernel> {
        self.s.kernel2.as_ref().ok_or_else(|| Error::Invalid("scenario has no kernel2".into()))
    }

    fn point(&self, p: &PointId) -> Result<usize> {
        self.s.kernel.point_index(&p.0)
    }

    fn gram_scale(&self) -> f64 {
        linalg::op_norm(&gram(&self.s.kernel)).max(1.0)
    }

    fn limit_options(&self, max_iter: Option<usize>) -> LimitOptions {
        LimitOptions {
            conv_tol: self.tol.conv,
            max_iter: max_iter.unwrap_or(self.tol.max_iter),
            cert_tol: self.tol.cert,
        }
    }

    fn path(&self, spec: &PathSpec) -> Result<PathSample> {
        let seed = spec.seed.unwrap_or(self.s.seed);
        match (&spec.labels, &spec.model) {
            (Some(labels), _) => Ok(PathSample { seed, labels: labels.clone() }),
            (None, Some(model)) => randomdyn::sample_path(model, spec.n.unwrap_or(0), seed),
            (None, None) => Err(Error::Invalid("path needs `labels` or `model`".into())),
        }
    }

    fn execute(&self, op: &TaskOp) -> Result<Output> {
        let s = self.s;
        let k = &s.kernel;
        let tol = &self.tol;
        match op {
            TaskOp::Validate => Output::new(kernels::validate(k, tol.psd)?),
            TaskOp::Kolmogorov => {
                let kf = self.kf()?;
                Output::new(json!({
                    "rank": kf.rank(),
                    "source_dims": kf.source_dims(),
                    "rank_tol_used": kf.rank_tol_used(),
                    "reconstruction_residual": kf.reconstruction_residual(),
                    "w_star_w": kf.gram(),
                }))
            }
            TaskOp::Iterate { word } => {
                let kw = channels::iterate_kernel(k, word, &s.maps)?;
                let psd = linalg::psd_check(&gram(&kw), tol.psd)?;
                Ok(Output::new(&kw)?.check(Check::with_detail(
                    "iterated_kernel_psd",
                    psd.is_psd,
                    format!("min eig {:e}", psd.min_eig),
                )))
            }
            TaskOp::Realize { word } => {
                let kf = self.kf()?;
                let cg = model::compressed_gram(self.lifts()?, word)?;
                let realized = model::realize_all(kf, &cg)?;
                let direct = channels::iterate_kernel(k, word, &s.maps)?;
                let residual = realized.max_block_distance(&direct)?;
                let model_norm = linalg::op_norm(&cg.a_w).sqrt();
                Ok(Output::new(json!({
                    "word": word,
                    "a_w": cg.a_w,
                    "model_norm": model_norm,
                    "oracle_residual": residual,
                    "kernel": realized,
                }))?
                .check(Check::at_most(
                    "oracle_equivalence",
                    residual,
                    tol.oracle * self.gram_scale(),
                )))
            }
            TaskOp::Certify => Output::new(model::certify(self.lifts()?, tol.cert)),
            TaskOp::Limit { label, max_iter } => {
                let kf = self.kf()?;
                let lf = self.lifts()?.get(label)?;
                let r = asymptotics::limit_kernel(lf, kf, &self.limit_options(*max_iter))?;
                let harmonic = asymptotics::harmonic_check(&r.kbar, lf.map())?;
                let mut csv = String::from("n,step_residual,op_norm,projection_defect\n");
                for st in &r.series {
                    let _ = writeln!(csv, "{},{:e},{:e},{:e}", st.n, st.step_residual, st.norm, st.projection_defect);
                }
                let mut out = Output::new(json!({
                    "d_inf": r.d_inf,
                    "iterations": r.iterations,
                    "step_residual": r.step_residual,
                    "projection_defect": r.projection_defect,
                    "monotonicity_min_eig": r.monotonicity_min_eig,
                    "harmonic_defect": harmonic,
                    "kbar": r.kbar,
                }))?
                .check(Check::with_detail(
                    "monotone",
                    r.monotonicity_min_eig >= -1e-10,
                    format!("{:e}", r.monotonicity_min_eig),
                ))
                .check(Check::at_most("projection_defect", r.projection_defect, 1e-6))
                .check(Check::at_most("harmonic", harmonic, 1e-8 * self.gram_scale()));
                out.series = Some(csv);
                Ok(out)
            }
            TaskOp::Stein { label, n_max } => {
                let phi = s.maps.get(label)?;
                let r = asymptotics::stein(k, phi, *n_max, &self.limit_options(None))?;
                let telescoping = r.max_telescoping_residual();
                let mut out = Output::new(json!({
                    "q_kernel": r.q_kernel,
                    "q_psd": r.q_psd,
                    "q_min_eig": r.q_min_eig,
                    "telescoping_residuals": r.telescoping_residuals,
                    "increments_psd": r.increments_psd,
                    "increment_min_eigs": r.increment_min_eigs,
                    "final_partial_sum": r.partial_sums.last(),
                    "certificate": r.certificate,
                    "limit_error": r.limit_error.as_ref().map(ErrorInfo::from),
                    "certified": r.certified.as_ref().map(|c| json!({
                        "kbar": c.kbar,
                        "limit_gaps": c.limit_gaps,
                        "gaps_monotone": c.gaps_monotone,
                    })),
                }))?
                .check(Check::at_most("telescoping", telescoping, 1e-10));
                if let Some(e) = &r.limit_error {
                    out = out.check(Check::with_detail("limit_converged", false, e.to_string()));
                }
                if let Some(c) = &r.certified {
                    let all_psd = r.increments_psd.iter().all(|p| *p);
                    out = out
                        .check(Check::new("increments_psd", all_psd))
                        .check(Check::new("gaps_monotone", c.gaps_monotone));
                }
                Ok(out)
            }
            TaskOp::Maximality { label, candidate } => {
                let kf = self.kf()?;
                let lf = self.lifts()?.get(label)?;
                let limit = asymptotics::limit_kernel(lf, kf, &self.limit_options(None))?;
                let r = asymptotics::maximality_check(candidate, k, &limit.kbar, lf.map(), tol.psd)?;
                Ok(Output::new(&r)?.check(Check::new("dominated_by_limit", r.holds)))
            }
            TaskOp::DecayBound { word } => {
                let r = asymptotics::decay_bound_check(k, &s.maps, word)?;
                Ok(Output::new(&r)?.check(Check::new("decay_bound", r.holds)))
            }
            TaskOp::SpectralRadius { label, n_max } => {
                Output::new(asymptotics::spectral_radius_estimate(self.lifts()?.get(label)?, *n_max)?)
            }
            TaskOp::ScalarLift { x, a, y, b } => {
                let (xi, yi) = (self.point(x)?, self.point(y)?);
                let v = kernels::scalar_lift(self.kf()?, xi, a, yi, b)?;
                let block = inner(a, &k.block(xi, yi).mul_vec(b));
                let diff = (v - block).norm();
                Ok(Output::new(json!({ "value": [v.re, v.im], "block_value": [block.re, block.im] }))?
                    .check(Check::at_most("matches_block", diff, tol.oracle * self.gram_scale())))
            }
            TaskOp::Dominates => {
                let r = kernels::dominates(k, self.kernel2()?, tol.psd)?;
                Output::new(json!({ "dominated": r.is_psd, "min_eig": r.min_eig }))
            }
            TaskOp::ModelInner { w, x, a, v, y, b } => {
                let (xi, yi) = (self.point(x)?, self.point(y)?);
                let value = model::model_inner(self.kf()?, &s.maps, w, xi, a, v, yi, b, tol.max_strings)?;
                let direct = if w == v {
                    let kw = channels::iterate_kernel(k, w, &s.maps)?;
                    inner(a, &kw.block(xi, yi).mul_vec(b))
                } else {
                    C64::new(0.0, 0.0)
                };
                let diff = (value - direct).norm();
                Ok(Output::new(json!({ "value": [value.re, value.im], "direct": [direct.re, direct.im] }))?
                    .check(Check::at_most("matches_direct", diff, tol.oracle * self.gram_scale())))
            }
            TaskOp::Rn => Output::new(rn::rn_derivative(self.kf()?, self.kernel2()?, tol.rn)?),
            TaskOp::RnIterated { word } => {
                Output::new(rn::rn_iterated(k, self.kf()?, self.lifts()?, word, &s.maps, tol.rn)?)
            }
            TaskOp::CrossModel { word } => {
                let k1 = self.kernel2()?;
                Output::new(rn::cross_model(k1, k, self.kf()?, self.lifts()?, word, &s.maps, tol.rn)?)
            }
            TaskOp::Lyapunov { model: m, n, trials, mode, seed } => {
                let seed = seed.unwrap_or(s.seed);
                let lifts = self.lifts()?;
                let runs = randomdyn::lyapunov_trials(m, lifts, *n, *trials, seed, *mode)?;
                let est = randomdyn::summarize_trials(m, lifts, *n, seed, *mode, &runs)?;
                let mut csv = String::from("trial,k,X_k,X_k_over_k\n");
                for (t, run) in runs.iter().enumerate() {
                    for (kk, x) in run.x.iter().enumerate().skip(1) {
                        let _ = writeln!(csv, "{t},{kk},{x:e},{:e}", x / kk as f64);
                    }
                }
                let bound_ok = est.minus_infinity || est.lambda_hat <= est.model_bound + 1e-9;
                let inf_ok = est.minus_infinity || est.lambda_inf_hat <= est.lambda_hat + 1e-12;
                let mut out =
                    Output::new(&est)?.check(Check::new("inf_over_horizons", inf_ok)).check(Check::with_detail(
                        "model_norm_bound",
                        bound_ok,
                        format!("{:e} ≤ {:e}", est.lambda_hat, est.model_bound),
                    ));
                out.series = Some(csv);
                Ok(out)
            }
            TaskOp::GrowthCheck { path, x, a, y, b } => {
                let p = self.path(path)?;
                let r =
                    randomdyn::growth_check(self.kf()?, self.lifts()?, k, &p, self.point(x)?, a, self.point(y)?, b)?;
                let mut csv = String::from("k,lhs,rhs,log_margin,running_exponent,model_exponent\n");
                for row in &r.rows {
                    let _ = writeln!(
                        csv,
                        "{},{:e},{:e},{:e},{:e},{:e}",
                        row.k, row.lhs, row.rhs, row.log_margin, row.running_exponent, row.model_exponent
                    );
                }
                let mut out =
                    Output::new(json!({ "path": p, "report": r }))?.check(Check::new("growth_bound", r.holds));
                out.series = Some(csv);
                Ok(out)
            }
            TaskOp::UniformBound { path } => {
                let p = self.path(path)?;
                let r = randomdyn::uniform_bound_check(k, &s.maps, &p)?;
                Ok(Output::new(json!({ "path": p, "report": r }))?.check(Check::new("uniform_bound", r.holds)))
            }
            TaskOp::ProbeRegression { label, alpha, word, expect_violation } => {
                let phi = s.maps.get(label)?;
                let mut violation = false;
                let mut result = serde_json::Map::new();
                if let Some(alpha) = alpha {
                    let scale = self.gram_scale();
                    let p = model::premise_check(k, phi, alpha, 1e-9 * scale)?;
                    violation |= !p.holds;
                    result.insert("premise".into(), serde_json::to_value(&p).unwrap_or(Value::Null));
                }
                if let Some(w) = word {
                    let kw = channels::iterate_kernel(k, w, &s.maps)?;
                    let d = kernels::dominates(k, &kw, tol.psd)?;
                    violation |= !d.is_psd;
                    result
                        .insert("domination".into(), json!({ "word": w, "dominated": d.is_psd, "min_eig": d.min_eig }));
                }
                result.insert("violation".into(), Value::Bool(violation));
                Ok(Output::new(Value::Object(result))?
                    .check(Check::new("violation_reproduced", violation == *expect_violation)))
            }
        }
    }
}

/// Compares `actual` with `expected`: numbers within `tol`, everything else exactly.
fn values_match(actual: &Value, expected: &Value, tol: f64) -> bool {
    match (actual, expected) {
        (Value::Number(a), Value::Number(e)) => match (a.as_f64(), e.as_f64()) {
            (Some(a), Some(e)) => (a - e).abs() <= tol,
            _ => false,
        },
        (Value::Array(a), Value::Array(e)) => {
            a.len() == e.len() && a.iter().zip(e).all(|(x, y)| values_match(x, y, tol))
        }
        (Value::Object(a), Value::Object(e)) => {
            e.iter().all(|(key, ev)| a.get(key).is_some_and(|av| values_match(av, ev, tol)))
        }
        _ => actual == expected,
    }
}

fn expectation_checks(expect: &Expect, result: &Value) -> Vec<Check> {
    expect
        .values
        .iter()
        .map(|ev| {
            let name = format!("expect:{}", ev.pointer);
            match result.pointer(&ev.pointer) {
                Some(actual) => Check::with_detail(
                    name,
                    values_match(actual, &ev.value, expect.tol),
                    format!("got {actual}, expected {}", ev.value),
                ),
                None => Check::with_detail(name, false, "pointer not found in result"),
            }
        })
        .collect()
}

/// Runs every task of `s` in order.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> RunOutcome {
    let mut tol = s.tolerances;
    for o in &opts.tol_overrides {
        if let Err(e) = tol.set(o) {
            return RunOutcome { report: Report::invalid(&e), series: Vec::new() };
        }
    }
    let ctx = Ctx { s, tol, kf: OnceCell::new(), lifts: OnceCell::new() };
    let certificate =
        ctx.lifts().ok().map(|l| serde_json::to_value(model::certify(l, tol.cert)).unwrap_or(Value::Null));

    let mut tasks = Vec::with_capacity(s.tasks.len());
    let mut series = Vec::new();
    let mut timing = Vec::new();
    for (index, task) in s.tasks.iter().enumerate() {
        let started = Instant::now();
        let outcome = ctx.execute(&task.op);
        timing.push(started.elapsed().as_secs_f64() * 1e3);
        let op = task.op.name().to_owned();
        let expected_error = task.expect.as_ref().and_then(|e| e.error.clone());
        let report = match (outcome, expected_error) {
            (Err(e), Some(code)) if e.code() == code => TaskReport {
                index,
                op,
                status: TaskStatus::ExpectedError,
                result: None,
                error: Some(ErrorInfo::from(&e)),
                checks: vec![Check::new(format!("expected_error:{code}"), true)],
            },
            (Err(e), _) => TaskReport {
                index,
                op,
                status: TaskStatus::Error,
                result: None,
                error: Some(ErrorInfo::from(&e)),
                checks: Vec::new(),
            },
            (Ok(out), expected_error) => {
                let mut checks = out.checks;
                if let Some(code) = expected_error {
                    checks.push(Check::with_detail(format!("expected_error:{code}"), false, "task succeeded"));
                }
                if let Some(expect) = &task.expect {
                    checks.extend(expectation_checks(expect, &out.result));
                }
                if let Some(csv) = out.series {
                    series.push(SeriesFile { name: format!("{index:02}_{}.csv", op.replace('-', "_")), contents: csv });
                }
                let status = if checks.iter().all(|c| c.passed) { TaskStatus::Ok } else { TaskStatus::AssertionFailed };
                TaskReport { index, op, status, result: Some(out.result), error: None, checks }
            }
        };
        tasks.push(report);
    }
    let status = if tasks.iter().any(|t| t.status == TaskStatus::Error) {
        RunStatus::TaskError
    } else if tasks.iter().any(|t| t.status == TaskStatus::AssertionFailed) {
        RunStatus::AssertionFailed
    } else {
        RunStatus::Ok
    };
    let report = Report {
        schema: REPORT_SCHEMA.to_owned(),
        scenario: s.name.clone(),
        seed: s.seed,
        status,
        exit_code: status.exit_code(),
        error: None,
        tolerances: serde_json::to_value(tol).ok(),
        certificate,
        tasks,
        timing: opts.timing.then_some(timing),
    };
    RunOutcome { report, series }
}

/// Parses and runs a scenario document; parse failures give an `invalid` report.
pub fn run_scenario_json(text: &str, opts: &RunOptions) -> RunOutcome {
    match Scenario::from_json(text) {
        Ok(s) => run_scenario(&s, opts),
        Err(e) => RunOutcome { report: Report::invalid(&e), series: Vec::new() },
    }
}
