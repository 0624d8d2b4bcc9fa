//! Test problems, noise injection and two stand-alone demonstrations of
//! ill-posedness: stable numerical differentiation and Hadamard's example for
//! the Cauchy problem of the Laplace equation.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{build_fredholm_operator, build_integration_operator, dirichlet_green_kernel, DiscreteOperator};

/// Relative cutoff below which singular directions count as null space.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// `Au(x) = int_0^x u`; recovering `u` is differentiation of the data.
    Differentiation,
    /// First-kind Fredholm equation with the Dirichlet Green's function kernel.
    Fredholm,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "differentiation" => Ok(ProblemKind::Differentiation),
            "fredholm" => Ok(ProblemKind::Fredholm),
            other => Err(Error::invalid(format!("unknown problem kind `{other}`"))),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Differentiation => "differentiation",
            ProblemKind::Fredholm => "fredholm",
        })
    }
}

/// Named exact solutions addressable from configs and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    /// `u(x) = 1`
    One,
    /// `u(x) = cos(pi x)`
    Cospi,
    /// `u(x) = sqrt(2) sin(pi x)`, the first eigenfunction of the Fredholm kernel.
    Sin1,
    /// Piecewise-linear peak `1 - |2x - 1|`.
    Hat,
}

impl Truth {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Truth::One => 1.0,
            Truth::Cospi => (PI * x).cos(),
            Truth::Sin1 => SQRT_2 * (PI * x).sin(),
            Truth::Hat => 1.0 - (2.0 * x - 1.0).abs(),
        }
    }
}

impl FromStr for Truth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Truth::One),
            "cospi" => Ok(Truth::Cospi),
            "sin1" => Ok(Truth::Sin1),
            "hat" => Ok(Truth::Hat),
            other => Err(Error::invalid(format!("unknown truth function `{other}`"))),
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::One => "one",
            Truth::Cospi => "cospi",
            Truth::Sin1 => "sin1",
            Truth::Hat => "hat",
        })
    }
}

/// An operator scaled to `||A|| = 1`, a minimal-norm exact solution and the
/// exact data `f = Ay`.
#[derive(Debug, Clone)]
pub struct Problem {
    op: DiscreteOperator,
    scale: f64,
    truth: DVector<f64>,
    data: DVector<f64>,
    label: String,
}

impl Problem {
    /// Scales `op` to unit norm and projects `truth` onto the orthogonal
    /// complement of the numerical null space.
    pub fn from_operator(op: &DiscreteOperator, truth: DVector<f64>, label: impl Into<String>) -> Result<Self> {
        if truth.len() != op.dim() {
            return Err(Error::invalid(format!(
                "truth has length {}, operator has dimension {}",
                truth.len(),
                op.dim()
            )));
        }
        if truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("truth has non-finite samples"));
        }
        let (op, scale) = op.scale_to_unit()?;
        let sp = op.spectral()?;
        let rank = sp.numerical_rank(DEFAULT_TRUNC_TOL);
        let truth = if rank < op.dim() {
            let c = sp.solution_coefficients(&truth);
            let kept = DVector::from_fn(c.len(), |j, _| if j < rank { c[j] } else { 0.0 });
            sp.synthesize(&kept, |_| 1.0)
        } else {
            truth
        };
        let data = op.apply(&truth);
        Ok(Problem {
            op,
            scale,
            truth,
            data,
            label: label.into(),
        })
    }

    pub fn op(&self) -> &DiscreteOperator {
        &self.op
    }

    /// `s_1` of the operator before scaling.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn truth(&self) -> &DVector<f64> {
        &self.truth
    }

    /// Exact data for the scaled operator.
    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// Exact data for the operator as originally built, `s_1 * f`.
    pub fn unscaled_data(&self) -> DVector<f64> {
        &self.data * self.scale
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Weighted distance from `u` to the exact solution.
    pub fn error(&self, u: &DVector<f64>) -> f64 {
        self.op.grid().distance(u, &self.truth)
    }
}

pub fn make_problem(kind: ProblemKind, n: usize, truth: impl Fn(f64) -> f64) -> Result<Problem> {
    let op = match kind {
        ProblemKind::Differentiation => build_integration_operator(n)?,
        ProblemKind::Fredholm => build_fredholm_operator(dirichlet_green_kernel, n)?,
    };
    let samples = op.grid().sample(truth);
    Problem::from_operator(&op, samples, format!("{kind}(n={n})"))
}

/// Noisy right-hand side with exactly achieved noise level.
#[derive(Debug, Clone)]
pub struct NoisyData {
    f_delta: DVector<f64>,
    delta: f64,
    seed: u64,
    q_delta: DVector<f64>,
}

impl NoisyData {
    pub fn f_delta(&self) -> &DVector<f64> {
        &self.f_delta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `A* f_delta`.
    pub fn q_delta(&self) -> &DVector<f64> {
        &self.q_delta
    }
}

/// `f_delta = f + delta * e / ||e||_h` with a seeded Gaussian direction `e`.
pub fn add_noise(problem: &Problem, delta: f64, seed: u64) -> Result<NoisyData> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("noise level must be >= 0, got {delta}")));
    }
    let f = problem.data();
    let f_delta = if delta == 0.0 {
        f.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = DVector::from_fn(f.len(), |_, _| StandardNormal.sample(&mut rng));
        let norm = problem.op().grid().norm(&e);
        f + e * (delta / norm)
    };
    let q_delta = problem.op().adjoint(&f_delta);
    Ok(NoisyData {
        f_delta,
        delta,
        seed,
        q_delta,
    })
}

/// Truncated-SVD pseudo-inverse, keeping s-values above `trunc_tol * s_1`.
pub fn minimal_norm_solution(op: &DiscreteOperator, f: &DVector<f64>, trunc_tol: f64) -> Result<DVector<f64>> {
    if !(trunc_tol > 0.0 && trunc_tol < 1.0) {
        return Err(Error::invalid(format!("truncation tolerance must lie in (0, 1), got {trunc_tol}")));
    }
    let sp = op.spectral()?;
    if sp.norm() <= 0.0 {
        return Err(Error::DegenerateOperator(sp.norm()));
    }
    let cutoff = trunc_tol * sp.norm();
    let c = sp.data_coefficients(f);
    Ok(sp.synthesize(&c, |s| if s > cutoff { 1.0 / s } else { 0.0 }))
}

/// Step `h(delta) = sqrt(2 delta / M)` balancing truncation and noise error.
pub fn differentiation_step(delta: f64, second_derivative_bound: f64) -> f64 {
    (2.0 * delta / second_derivative_bound).sqrt()
}

/// Guaranteed error `M h / 2 + delta / h = sqrt(2 M delta)` at the balanced step.
pub fn differentiation_error_bound(delta: f64, second_derivative_bound: f64) -> f64 {
    (2.0 * second_derivative_bound * delta).sqrt()
}

/// Central difference of noisy samples at the noise-adapted step size.
///
/// `f_delta` must satisfy `|f_delta - f| <= delta` pointwise and
/// `second_derivative_bound >= sup |f''|`.
pub fn stable_differentiate(
    f_delta: impl Fn(f64) -> f64,
    delta: f64,
    second_derivative_bound: f64,
    eval_points: &[f64],
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    if !(second_derivative_bound > 0.0) {
        return Err(Error::invalid(format!("M must be > 0, got {second_derivative_bound}")));
    }
    let h = differentiation_step(delta, second_derivative_bound);
    eval_points
        .iter()
        .map(|&x| {
            if !(x >= h && x <= 1.0 - h) {
                return Err(Error::OutOfDomain { point: x, step: h });
            }
            Ok((f_delta(x + h) - f_delta(x - h)) / (2.0 * h))
        })
        .collect()
}

/// `u(x, y) = (A_n / n) sin(n x) sinh(n y)` solves `u_xx + u_yy = 0` with
/// `u(x, 0) = 0`, `u_y(x, 0) = A_n sin(n x)`.
pub fn laplace_cauchy_solution(n: u32, amplitude: f64, x: f64, y: f64) -> f64 {
    let n = n as f64;
    amplitude / n * (n * x).sin() * (n * y).sinh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HadamardRow {
    pub n: u32,
    /// `sup |phi|` with `A_n = 1/n^2`.
    pub data_sup: f64,
    /// `sup |phi'|` with `A_n = 1/n^2`.
    pub derivative_sup: f64,
    /// `max_x |u(x, y_eval)|` with `A_n = 1/n^2`.
    pub solution_max: f64,
    /// Same three columns with `A_n = 1/n`.
    pub alt_data_sup: f64,
    pub alt_derivative_sup: f64,
    pub alt_solution_max: f64,
}

impl HadamardRow {
    /// `sup |phi| + sup |phi'|`
    pub fn c1_size(&self) -> f64 {
        self.data_sup + self.derivative_sup
    }
}

pub fn hadamard_instability_table(n_max: u32, y_eval: f64) -> Result<Vec<HadamardRow>> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be >= 1"));
    }
    if !(y_eval > 0.0) {
        return Err(Error::invalid(format!("y must be > 0, got {y_eval}")));
    }
    let row = |n: u32| {
        let nf = n as f64;
        // sin(nx) peaks at x = pi / (2n); cos(nx) at x = 0.
        let peak = PI / (2.0 * nf);
        let columns = |amplitude: f64| {
            (
                (amplitude * (nf * peak).sin()).abs(),
                (amplitude * nf * (nf * 0.0).cos()).abs(),
                laplace_cauchy_solution(n, amplitude, peak, y_eval).abs(),
            )
        };
        let (data_sup, derivative_sup, solution_max) = columns(1.0 / (nf * nf));
        let (alt_data_sup, alt_derivative_sup, alt_solution_max) = columns(1.0 / nf);
        HadamardRow {
            n,
            data_sup,
            derivative_sup,
            solution_max,
            alt_data_sup,
            alt_derivative_sup,
            alt_solution_max,
        }
    };
    Ok((1..=n_max).map(row).collect())
}
