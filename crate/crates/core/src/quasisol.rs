//! Quasi-solutions: least-squares fits restricted to a norm ball.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{DiscreteOperator, Grid};
use crate::problems::{minimal_norm_solution, NoisyData};
use crate::roots::bisect_log10;
use crate::solution::{Method, RegularizedSolution, Status};

const LAMBDA_LOG10_MIN: f64 = -14.0;
const LAMBDA_LOG10_MAX: f64 = 6.0;
// Tighter than needed for the norm constraint, so the multiplier itself is
// accurate as well.
const NORM_REL_TOL: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;

/// The closed ball `{u : ||u||_h <= R}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallCompactum {
    radius: f64,
}

impl BallCompactum {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(BallCompactum { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, grid: &Grid, u: &DVector<f64>) -> bool {
        grid.norm(u) <= self.radius
    }
}

/// Metric projection `v * min(1, R / ||v||_h)`.
pub fn project_onto_ball(ball: &BallCompactum, grid: &Grid, v: &DVector<f64>) -> DVector<f64> {
    let norm = grid.norm(v);
    if norm <= ball.radius {
        v.clone()
    } else {
        v * (ball.radius / norm)
    }
}

#[derive(Debug, Clone)]
pub struct QuasiSolution {
    pub u: DVector<f64>,
    /// Lagrange multiplier of the norm constraint; zero when inactive.
    pub lambda: f64,
    /// `||Au - f_delta||_h`, the distance from `f_delta` to `A(K)`.
    pub residual: f64,
    pub active: bool,
    pub iterations: usize,
}

/// Minimizes `||Au - f_delta||_h` over the ball.
///
/// If the truncated-SVD least-squares solution lies in the ball it is the
/// answer. Otherwise the constraint is active and the minimizer is
/// `(B + lambda)^{-1} A* f_delta` with `lambda > 0` fixed by `||u||_h = R`;
/// that norm is strictly decreasing in `lambda`.
pub fn quasi_solution(
    op: &DiscreteOperator,
    f_delta: &DVector<f64>,
    ball: &BallCompactum,
    trunc_tol: f64,
) -> Result<QuasiSolution> {
    let radius = ball.radius();
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("ball radius must be > 0, got {radius}")));
    }
    let grid = op.grid();
    let u_ls = minimal_norm_solution(op, f_delta, trunc_tol)?;
    if grid.norm(&u_ls) <= radius {
        let residual = op.residual_norm(&u_ls, f_delta);
        return Ok(QuasiSolution {
            u: u_ls,
            lambda: 0.0,
            residual,
            active: false,
            iterations: 0,
        });
    }

    let sp = op.spectral()?;
    let c = sp.data_coefficients(f_delta);
    let constrained_norm = |lambda: f64| -> f64 {
        sp.s_values()
            .iter()
            .zip(c.iter())
            .map(|(s, c)| (s / (s * s + lambda) * c).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let floor_norm = constrained_norm(10f64.powf(LAMBDA_LOG10_MIN));
    if floor_norm < radius {
        return Err(Error::Numerical(format!(
            "constraint active but ||u(1e-14)|| = {floor_norm:e} < R = {radius:e}"
        )));
    }
    // bisection expects a nondecreasing function
    let root = bisect_log10(
        |lambda| Ok(-constrained_norm(lambda)),
        -radius,
        LAMBDA_LOG10_MIN,
        LAMBDA_LOG10_MAX,
        NORM_REL_TOL,
        MAX_BISECTIONS,
    )?;
    let u = op.resolvent_solve(root.x, &op.adjoint(f_delta))?;
    let residual = op.residual_norm(&u, f_delta);
    Ok(QuasiSolution {
        u,
        lambda: root.x,
        residual,
        active: true,
        iterations: root.iterations,
    })
}

pub fn solve_quasi(
    op: &DiscreteOperator,
    noisy: &NoisyData,
    ball: &BallCompactum,
    trunc_tol: f64,
    truth: Option<&DVector<f64>>,
) -> Result<RegularizedSolution> {
    let q = quasi_solution(op, noisy.f_delta(), ball, trunc_tol)?;
    let error = truth.map(|y| op.grid().distance(&q.u, y));
    Ok(RegularizedSolution {
        method: Method::Quasi,
        param_name: "lambda",
        param_value: q.lambda,
        residual: q.residual,
        error,
        steps_or_time: q.iterations as f64,
        status: Status::Ok,
        u: q.u,
    })
}
