use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use illposed::dsm::{DsmStop, EpsilonSchedule};
use illposed::harness::{
    format_sig, read_report, run_method, run_sweep, selftest, write_dsm_trace, write_landweber_trace, write_report,
    write_report_to, MethodSpec, ProblemSpec, ReportRow, SweepConfig, Trace,
};
use illposed::landweber::{StopRule, DEFAULT_MAX_ITERATIONS, DEFAULT_STEP};
use illposed::problems::{
    add_noise, differentiation_error_bound, differentiation_step, hadamard_instability_table, stable_differentiate,
    DEFAULT_TRUNC_TOL,
};
use illposed::variational::AlphaRule;
use illposed::{Method, ProblemKind, Truth};

#[derive(Parser)]
#[command(name = "illposed", version, about = "Regularized solvers for linear ill-posed problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one noisy problem and print a single report row.
    Solve(SolveArgs),
    /// Run a JSON-configured noise-level sweep and write a CSV report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `output` field of the config; `-` writes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stable differentiation of sin(x) with worst-case noise over a delta grid.
    Diff {
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4, 1e-5])]
        deltas: Vec<f64>,
        /// Bound on |f''|.
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Number of evaluation points spread over [h, 1 - h].
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Table showing that Cauchy data for the Laplace equation does not control the solution.
    LaplaceDemo {
        #[arg(long)]
        nmax: u32,
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long, default_value = "fredholm")]
    problem: ProblemKind,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value = "hat")]
    truth: Truth,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    method: Method,
    /// Tikhonov parameter rule: apriori:<p>, morozov:<C> or fixed:<alpha>.
    #[arg(long)]
    rule: Option<AlphaRule>,
    /// Ball radius for the quasi-solution.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TRUNC_TOL)]
    trunc_tol: f64,
    /// Landweber step size.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    mu: f64,
    /// Landweber: discrepancy:<C>, oracle or fixed:<n>. DSM: root:<b>, discrepancy:<C> or time:<t>.
    #[arg(long)]
    stop: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    nmax: usize,
    /// DSM schedule, e.g. c0=1,c1=1,p=0.5.
    #[arg(long)]
    schedule: Option<EpsilonSchedule>,
    /// CSV trace of the run (Landweber and DSM only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl SolveArgs {
    fn method_spec(&self) -> anyhow::Result<MethodSpec> {
        let spec = match self.method {
            Method::Tikhonov => MethodSpec::Tikhonov {
                rule: self.rule.unwrap_or_default(),
            },
            Method::Quasi => MethodSpec::Quasi {
                radius: self.radius.context("--radius is required for the quasi method")?,
                trunc_tol: self.trunc_tol,
            },
            Method::Landweber => MethodSpec::Landweber {
                mu: self.mu,
                stop: match &self.stop {
                    Some(s) => s.parse()?,
                    None => StopRule::Discrepancy { c: 1.5 },
                },
                n_max: self.nmax,
            },
            Method::Dsm => MethodSpec::Dsm {
                schedule: self.schedule.unwrap_or_default(),
                stop: match &self.stop {
                    Some(s) => s.parse()?,
                    None => DsmStop::default(),
                },
            },
        };
        Ok(spec)
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let spec = args.method_spec()?;
    let problem = ProblemSpec {
        kind: args.problem,
        n: args.n,
        truth: args.truth,
    }
    .build()?;
    let noisy = add_noise(&problem, args.delta, args.seed)?;
    let start = std::time::Instant::now();
    let (sol, trace) = run_method(&problem, &noisy, &spec)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = &args.trace {
        match trace {
            Some(Trace::Landweber(t)) => write_landweber_trace(&t, path)?,
            Some(Trace::Dsm(traj)) => {
                let traj = traj.with_residuals(problem.op(), noisy.f_delta());
                let errors = traj.errors(problem.op(), problem.truth());
                write_dsm_trace(&traj, Some(&errors), path)?
            }
            None => bail!("--trace is only available for landweber and dsm"),
        }
    }
    let row = ReportRow::from_solution(&sol, args.n, args.delta, args.seed, wall_ms);
    write_report_to(&[row], io::stdout().lock())?;
    Ok(())
}

fn sweep(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<()> {
    let mut cfg = SweepConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let rows = run_sweep(&cfg)?;
    match out.or(cfg.output.clone()) {
        Some(path) if path.as_os_str() != "-" => {
            write_report(&rows, &path)?;
            // sanity check that the file parses back
            let back = read_report(&path)?;
            eprintln!("wrote {} rows to {}", back.len(), path.display());
        }
        _ => write_report_to(&rows, io::stdout().lock())?,
    }
    Ok(())
}

/// Noise of size `delta` whose sign flips between `x - h` and `x + h` for
/// every `x`, the worst case for a central difference of step `h`.
fn adversarial_noise(delta: f64, h: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| {
        let c = (std::f64::consts::PI * t / (2.0 * h)).cos();
        if c >= 0.0 {
            delta
        } else {
            -delta
        }
    }
}

fn diff(deltas: Vec<f64>, m: f64, points: usize) -> anyhow::Result<()> {
    if points < 2 {
        bail!("--points must be >= 2");
    }
    let mut out = io::stdout().lock();
    writeln!(out, "delta,h,max_error,bound,error_over_sqrt_delta")?;
    for delta in deltas {
        let h = differentiation_step(delta, m);
        if 2.0 * h >= 1.0 {
            bail!("delta {delta} gives step {h}, too large for [0, 1]");
        }
        let xs: Vec<f64> = (0..points)
            .map(|i| (h + (1.0 - 2.0 * h) * i as f64 / (points - 1) as f64).min(1.0 - h))
            .collect();
        let noise = adversarial_noise(delta, h);
        let approx = stable_differentiate(|x| x.sin() + noise(x), delta, m, &xs)?;
        let max_error = xs
            .iter()
            .zip(&approx)
            .map(|(x, d)| (d - x.cos()).abs())
            .fold(0.0, f64::max);
        writeln!(
            out,
            "{},{},{},{},{}",
            format_sig(delta),
            format_sig(h),
            format_sig(max_error),
            format_sig(differentiation_error_bound(delta, m)),
            format_sig(max_error / delta.sqrt())
        )?;
    }
    Ok(())
}

fn laplace_demo(nmax: u32, y: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    let rows = hadamard_instability_table(nmax, y)?;
    let mut text = String::from("n,data_sup,derivative_sup,c1_size,solution_max,alt_data_sup,alt_derivative_sup,alt_solution_max\n");
    for r in &rows {
        let cols = [
            r.data_sup,
            r.derivative_sup,
            r.c1_size(),
            r.solution_max,
            r.alt_data_sup,
            r.alt_derivative_sup,
            r.alt_solution_max,
        ];
        text.push_str(&r.n.to_string());
        for c in cols {
            text.push(',');
            text.push_str(&format_sig(c));
        }
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_selftest() -> anyhow::Result<bool> {
    let results = selftest();
    let mut out = io::stdout().lock();
    for r in &results {
        writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => solve(args).map(|_| true),
        Command::Sweep { config, out, seed } => sweep(config, out, seed).map(|_| true),
        Command::Diff { deltas, m, points } => diff(deltas, m, points).map(|_| true),
        Command::LaplaceDemo { nmax, y, out } => laplace_demo(nmax, y, out).map(|_| true),
        Command::Selftest => run_selftest(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
