//! Noise-level sweeps and CSV reports.
//!
//! A sweep runs every configured method on every `(delta, seed)` pair of a
//! single problem. Seeds only drive the noise generator; all solvers are
//! deterministic, so a config reproduces its report exactly apart from the
//! `wall_ms` column. Cells run in parallel and are merged back in config
//! order. A failing cell becomes a row with a non-`ok` status.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsm::{solve_dsm, DsmStop, DsmTrajectory, EpsilonSchedule};
use crate::error::{Error, Result};
use crate::landweber::{solve_landweber, IterationTrace, StopRule, DEFAULT_MAX_ITERATIONS, DEFAULT_STEP};
use crate::problems::{add_noise, make_problem, NoisyData, Problem, ProblemKind, Truth, DEFAULT_TRUNC_TOL};
use crate::quasisol::{solve_quasi, BallCompactum};
use crate::solution::{Method, RegularizedSolution};
use crate::variational::{solve_tikhonov, AlphaRule};

pub const REPORT_HEADER: [&str; 11] = [
    "method",
    "n",
    "delta",
    "seed",
    "param_name",
    "param_value",
    "residual",
    "error",
    "steps_or_time",
    "wall_ms",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub truth: Truth,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let truth = self.truth;
        make_problem(self.kind, self.n, move |x| truth.eval(x))
    }
}

fn default_trunc_tol() -> f64 {
    DEFAULT_TRUNC_TOL
}

fn default_mu() -> f64 {
    DEFAULT_STEP
}

fn default_n_max() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_landweber_stop() -> StopRule {
    StopRule::Discrepancy { c: 1.5 }
}

/// One method with its parameter-choice settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodSpec {
    Tikhonov {
        #[serde(default)]
        rule: AlphaRule,
    },
    Quasi {
        radius: f64,
        #[serde(default = "default_trunc_tol")]
        trunc_tol: f64,
    },
    Landweber {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_landweber_stop")]
        stop: StopRule,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    Dsm {
        #[serde(default)]
        schedule: EpsilonSchedule,
        #[serde(default)]
        stop: DsmStop,
    },
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Tikhonov { .. } => Method::Tikhonov,
            MethodSpec::Quasi { .. } => Method::Quasi,
            MethodSpec::Landweber { .. } => Method::Landweber,
            MethodSpec::Dsm { .. } => Method::Dsm,
        }
    }

    fn param_name(&self) -> &'static str {
        match self {
            MethodSpec::Tikhonov { .. } => "alpha",
            MethodSpec::Quasi { .. } => "lambda",
            MethodSpec::Landweber { .. } => "n",
            MethodSpec::Dsm { .. } => "t_delta",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodSpec::Tikhonov { rule } => rule.validate(),
            MethodSpec::Quasi { radius, trunc_tol } => {
                BallCompactum::new(*radius)?;
                if !(*trunc_tol > 0.0 && *trunc_tol < 1.0) {
                    return Err(Error::invalid(format!("trunc_tol must lie in (0, 1), got {trunc_tol}")));
                }
                Ok(())
            }
            MethodSpec::Landweber { mu, stop, n_max } => {
                stop.validate()?;
                if !(*mu > 0.0) {
                    return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
                }
                if *n_max == 0 {
                    return Err(Error::invalid("n_max must be >= 1"));
                }
                Ok(())
            }
            MethodSpec::Dsm { schedule, stop } => {
                schedule.validate()?;
                stop.validate()
            }
        }
    }
}

/// Per-run diagnostics that some methods produce.
#[derive(Debug, Clone)]
pub enum Trace {
    Landweber(IterationTrace),
    Dsm(DsmTrajectory),
}

/// Runs one method on one noisy data set. The problem's exact solution is
/// used for the error column and for oracle stopping.
pub fn run_method(problem: &Problem, noisy: &NoisyData, spec: &MethodSpec) -> Result<(RegularizedSolution, Option<Trace>)> {
    spec.validate()?;
    let op = problem.op();
    let truth = Some(problem.truth());
    match *spec {
        MethodSpec::Tikhonov { rule } => Ok((solve_tikhonov(op, noisy, rule, truth)?, None)),
        MethodSpec::Quasi { radius, trunc_tol } => {
            let ball = BallCompactum::new(radius)?;
            Ok((solve_quasi(op, noisy, &ball, trunc_tol, truth)?, None))
        }
        MethodSpec::Landweber { mu, stop, n_max } => {
            let (sol, trace) = solve_landweber(op, noisy, mu, n_max, stop, truth)?;
            Ok((sol, Some(Trace::Landweber(trace))))
        }
        MethodSpec::Dsm { schedule, stop } => {
            let (sol, traj) = solve_dsm(op, noisy, &schedule, stop, truth)?;
            Ok((sol, Some(Trace::Dsm(traj))))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: ProblemSpec,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.problem.n == 0 {
            return Err(Error::Config("problem n must be >= 1".into()));
        }
        if self.deltas.is_empty() {
            return Err(Error::Config("at least one delta is required".into()));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::Config(format!("deltas must be > 0, got {d}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        for m in &self.methods {
            m.validate().map_err(cfg)?;
        }
        Ok(())
    }

    /// Number of cells, one per `(method, delta, seed)`.
    pub fn cells(&self) -> usize {
        self.methods.len() * self.deltas.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub param_name: String,
    pub param_value: f64,
    pub residual: f64,
    /// `-1` when the exact solution is unavailable.
    pub error: f64,
    pub steps_or_time: f64,
    pub wall_ms: f64,
    pub status: String,
}

impl ReportRow {
    pub fn from_solution(sol: &RegularizedSolution, n: usize, delta: f64, seed: u64, wall_ms: f64) -> Self {
        ReportRow {
            method: sol.method.to_string(),
            n,
            delta,
            seed,
            param_name: sol.param_name.to_string(),
            param_value: sol.param_value,
            residual: sol.residual,
            error: sol.error.unwrap_or(-1.0),
            steps_or_time: sol.steps_or_time,
            wall_ms,
            status: sol.status.as_str().to_string(),
        }
    }

    fn failed(spec: &MethodSpec, n: usize, delta: f64, seed: u64, wall_ms: f64, err: &Error) -> Self {
        ReportRow {
            method: spec.method().to_string(),
            n,
            delta,
            seed,
            param_name: spec.param_name().to_string(),
            param_value: f64::NAN,
            residual: f64::NAN,
            error: f64::NAN,
            steps_or_time: f64::NAN,
            wall_ms,
            status: err.status().to_string(),
        }
    }

    fn fields(&self) -> [String; 11] {
        [
            self.method.clone(),
            self.n.to_string(),
            format_sig(self.delta),
            self.seed.to_string(),
            self.param_name.clone(),
            format_sig(self.param_value),
            format_sig(self.residual),
            format_sig(self.error),
            format_sig(self.steps_or_time),
            format_sig(self.wall_ms),
            self.status.clone(),
        ]
    }
}

/// Runs every cell of the sweep. Config problems surface as
/// [`Error::Config`] before anything runs; per-cell failures become rows.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let problem = config.problem.build().map_err(|e| Error::Config(e.to_string()))?;
    let n = config.problem.n;
    let cells: Vec<(MethodSpec, f64, u64)> = config
        .methods
        .iter()
        .flat_map(|m| {
            config
                .deltas
                .iter()
                .flat_map(move |&d| config.seeds.iter().map(move |&s| (*m, d, s)))
        })
        .collect();
    let rows = cells
        .par_iter()
        .map(|(spec, delta, seed)| {
            let start = Instant::now();
            let outcome = add_noise(&problem, *delta, *seed).and_then(|noisy| run_method(&problem, &noisy, spec));
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok((sol, _)) => ReportRow::from_solution(&sol, n, *delta, *seed, wall_ms),
                Err(e) => ReportRow::failed(spec, n, *delta, *seed, wall_ms, &e),
            }
        })
        .collect();
    Ok(rows)
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped,
/// exponent notation outside `[1e-5, 1e12)`.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

pub fn write_report_to<W: Write>(rows: &[ReportRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_report_to(rows, file).map_err(csv_err(path))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader
        .deserialize()
        .map(|r| r.map_err(csv_err(path)))
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_else(|| "-1".into())
}

/// Columns `n,residual,error`; error is `-1` without an exact solution.
pub fn write_landweber_trace(trace: &IterationTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["n", "residual", "error"]).map_err(csv_err(path))?;
    for (n, r) in trace.residuals.iter().enumerate() {
        let e = trace.errors.as_ref().map(|e| e[n]);
        w.write_record([n.to_string(), format_sig(*r), opt(e)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Columns `t,epsilon,residual,error`.
pub fn write_dsm_trace(traj: &DsmTrajectory, errors: Option<&[f64]>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["t", "epsilon", "residual", "error"]).map_err(csv_err(path))?;
    for k in 0..traj.times.len() {
        let r = traj.residuals.as_ref().map(|r| r[k]);
        let e = errors.map(|e| e[k]);
        w.write_record([format_sig(traj.times[k]), format_sig(traj.epsilons[k]), opt(r), opt(e)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct SelfTestResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> SelfTestResult {
    match f() {
        Ok((passed, detail)) => SelfTestResult { name, passed, detail },
        Err(e) => SelfTestResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Quick invariant checks on small benchmark instances.
pub fn selftest() -> Vec<SelfTestResult> {
    use crate::dsm::{dsm_stop_discrepancy, dsm_stop_root, Schedule};
    use crate::landweber::landweber_run;
    use crate::linops::{build_fredholm_operator, build_integration_operator, dirichlet_green_kernel, DiscreteOperator};
    use crate::problems::hadamard_instability_table;
    use crate::quasisol::quasi_solution;
    use crate::variational::{morozov_alpha, tikhonov_solve};
    use nalgebra::DMatrix;

    let scalar = |a: f64| DiscreteOperator::from_matrix(DMatrix::from_element(1, 1, a));
    let one = DVector::from_element(1, 1.0);

    vec![
        check("adjoint identity", || {
            let op = build_integration_operator(32)?;
            let g = op.grid();
            let u = g.sample(|x| (7.0 * x).sin());
            let v = g.sample(|x| x * x - 0.3);
            let gap = (g.inner(&op.apply(&u), &v) - g.inner(&u, &op.adjoint(&v))).abs();
            Ok((gap <= 1e-12 * g.norm(&u) * g.norm(&v), format!("gap {gap:e}")))
        }),
        check("resolvent and smoothing bounds", || {
            let op = build_fredholm_operator(dirichlet_green_kernel, 64)?;
            let sp = op.spectral()?;
            let ok = (-12..=0).all(|k| {
                let a = 10f64.powi(k);
                sp.resolvent_norm(a) <= 1.0 / a * (1.0 + 1e-12)
                    && sp.smoothing_norm(a) <= 1.0 / (2.0 * a.sqrt()) * (1.0 + 1e-12)
            });
            Ok((ok, "alpha, eps in 1e-12..1".into()))
        }),
        check("tikhonov filter factors", || {
            let op = build_integration_operator(32)?;
            let f = op.grid().sample(|x| x.exp());
            let alpha = 1e-3;
            let u = tikhonov_solve(&op, &f, alpha)?;
            let sp = op.spectral()?;
            let oracle = sp.synthesize(&sp.data_coefficients(&f), |s| s / (s * s + alpha));
            let rel = (&u - &oracle).norm() / oracle.norm();
            Ok((rel <= 1e-10, format!("relative gap {rel:e}")))
        }),
        check("morozov scalar root", || {
            let root = morozov_alpha(&scalar(1.0)?, &one, 0.1, 2.0)?;
            Ok(((root.alpha - 0.25).abs() <= 1e-10, format!("alpha {}", root.alpha)))
        }),
        check("quasi-solution scalar KKT", || {
            let q = quasi_solution(&scalar(1.0)?, &(&one * 2.0), &BallCompactum::new(1.0)?, 1e-12)?;
            let ok = (q.u[0] - 1.0).abs() <= 1e-10 && (q.lambda - 1.0).abs() <= 1e-10;
            Ok((ok, format!("u {} lambda {}", q.u[0], q.lambda)))
        }),
        check("landweber scalar contraction", || {
            let p = Problem::from_operator(&scalar(1.0)?, one.clone(), "scalar")?;
            let noisy = add_noise(&p, 0.0, 0)?;
            let out = landweber_run(p.op(), &noisy, 0.5, 30, StopRule::Fixed { n: 30 }, Some(p.truth()))?;
            let errs = out.trace.errors.unwrap_or_default();
            let worst = errs
                .iter()
                .enumerate()
                .map(|(n, e)| (e - 0.5f64.powi(n as i32)).abs())
                .fold(0.0, f64::max);
            Ok((worst <= 1e-12, format!("max deviation {worst:e}")))
        }),
        check("dsm stopping rules", || {
            let s = EpsilonSchedule::default();
            let root = dsm_stop_root(&s, 0.01, 0.5)?;
            let disc = dsm_stop_discrepancy(&scalar(1.0)?, &one, 0.1, 1.0, &s)?;
            let ok = (root.t - 159_999.0).abs() <= 1e-10 * 159_999.0
                && (2.0 * s.epsilon(root.t).sqrt() - 0.1).abs() <= 1e-11
                && (disc.t - 80.0).abs() <= 1e-8 * 80.0;
            Ok((ok, format!("root {} discrepancy {}", root.t, disc.t)))
        }),
        check("noise exactness", || {
            let p = ProblemSpec {
                kind: ProblemKind::Fredholm,
                n: 32,
                truth: Truth::Hat,
            }
            .build()?;
            let noisy = add_noise(&p, 1e-3, 42)?;
            let achieved = p.op().grid().distance(noisy.f_delta(), p.data());
            Ok(((achieved - 1e-3).abs() <= 1e-15, format!("achieved {achieved:e}")))
        }),
        check("hadamard instability", || {
            let rows = hadamard_instability_table(10, 1.0)?;
            let v = rows[9].solution_max;
            Ok(((v - 10f64.sinh() / 1e3).abs() <= 1e-9, format!("max|u(.,1)| at n=10: {v}")))
        }),
    ]
}
