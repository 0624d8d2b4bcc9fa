//! Landweber iteration `u_{n+1} = u_n - mu (B u_n - q_delta)`, `u_0 = 0`.
//!
//! With noisy data the true error first decreases and then grows again; the
//! iteration count is the regularization parameter.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::DiscreteOperator;
use crate::problems::NoisyData;
use crate::solution::{Method, RegularizedSolution, Status};

pub const DEFAULT_STEP: f64 = 0.9;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StopRule {
    /// First `n` with `||A u_n - f_delta|| <= C delta`.
    Discrepancy { c: f64 },
    /// Iterate with the smallest true error. Needs the exact solution, so it
    /// is only meaningful in experiments.
    Oracle,
    Fixed { n: usize },
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StopRule::Discrepancy { c } if !(c > 1.0) => {
                Err(Error::invalid(format!("discrepancy constant must be > 1, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for StopRule {
    type Err = Error;

    /// `discrepancy:<C>`, `oracle` or `fixed:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad stopping rule `{s}`"));
        let rule = match s.split_once(':') {
            None if s == "oracle" => StopRule::Oracle,
            None if s == "discrepancy" => StopRule::Discrepancy { c: 1.5 },
            Some(("discrepancy", c)) => StopRule::Discrepancy {
                c: c.trim().parse().map_err(|_| bad())?,
            },
            Some(("fixed", n)) => StopRule::Fixed {
                n: n.trim().parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopRule::Discrepancy { c } => write!(f, "discrepancy:{c}"),
            StopRule::Oracle => f.write_str("oracle"),
            StopRule::Fixed { n } => write!(f, "fixed:{n}"),
        }
    }
}

/// Per-step residuals (and true errors, when the exact solution is known),
/// indexed by iteration number starting at `u_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub residuals: Vec<f64>,
    pub errors: Option<Vec<f64>>,
    pub stop_index: usize,
    pub mu: f64,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    /// Index and value of the smallest recorded true error.
    pub fn min_error(&self) -> Option<(usize, f64)> {
        self.errors.as_ref().and_then(|e| {
            e.iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
        })
    }
}

#[derive(Debug, Clone)]
pub struct LandweberOutcome {
    pub u: DVector<f64>,
    pub trace: IterationTrace,
    pub status: Status,
}

/// Runs the iteration from `u_0 = 0`.
///
/// `truth` is required for [`StopRule::Oracle`] and, when given, fills the
/// error column of the trace for every rule. If the discrepancy level is
/// never reached within `n_max` steps, the last (smallest-residual) iterate
/// is returned with [`Status::BudgetExhausted`].
pub fn landweber_run(
    op: &DiscreteOperator,
    noisy: &NoisyData,
    mu: f64,
    n_max: usize,
    stop: StopRule,
    truth: Option<&DVector<f64>>,
) -> Result<LandweberOutcome> {
    stop.validate()?;
    let norm_b = op.norm()?.powi(2);
    let limit = 1.0 / norm_b;
    if !(mu > 0.0 && mu < limit) {
        return Err(Error::InvalidStep { mu, limit });
    }
    if n_max == 0 {
        return Err(Error::invalid("iteration budget must be >= 1"));
    }
    if matches!(stop, StopRule::Oracle) && truth.is_none() {
        return Err(Error::invalid("oracle stopping needs the exact solution"));
    }
    let budget = match stop {
        StopRule::Fixed { n } => n,
        _ => n_max,
    };
    let grid = op.grid();
    let f = noisy.f_delta();
    let threshold = match stop {
        StopRule::Discrepancy { c } => Some(c * noisy.delta()),
        _ => None,
    };

    let mut u = DVector::zeros(op.dim());
    let mut residuals = Vec::with_capacity(budget.min(1 << 20) + 1);
    let mut errors = truth.map(|_| Vec::with_capacity(budget.min(1 << 20) + 1));
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    let mut reached = threshold.is_none();
    let mut n = 0;
    loop {
        let r = op.apply(&u) - f;
        let residual = grid.norm(&r);
        residuals.push(residual);
        if let (Some(errs), Some(y)) = (errors.as_mut(), truth) {
            let e = grid.distance(&u, y);
            errs.push(e);
            if matches!(stop, StopRule::Oracle) && best.as_ref().is_none_or(|b| e < b.1) {
                best = Some((n, e, u.clone()));
            }
        }
        if let Some(level) = threshold {
            if residual <= level {
                reached = true;
                break;
            }
        }
        if n == budget {
            break;
        }
        // B u - q_delta = A*(A u - f_delta)
        u -= op.adjoint(&r) * mu;
        n += 1;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite Landweber iterate at n = {n}")));
        }
    }

    let (stop_index, u) = match best {
        Some((k, _, u_best)) => (k, u_best),
        None => (n, u),
    };
    Ok(LandweberOutcome {
        u,
        trace: IterationTrace {
            residuals,
            errors,
            stop_index,
            mu,
        },
        status: if reached { Status::Ok } else { Status::BudgetExhausted },
    })
}

/// Minimizes `||gamma_n|| + n mu delta` over `n >= 1` (over `n = 0` only if
/// the sequence has a single entry). Ties resolve to the larger `n`.
pub fn theoretical_stop_bound(exact_errors: &[f64], mu: f64, delta: f64) -> Result<(usize, f64)> {
    if exact_errors.is_empty() {
        return Err(Error::invalid("exact-error sequence is empty"));
    }
    let start = if exact_errors.len() > 1 { 1 } else { 0 };
    let mut best = (start, f64::INFINITY);
    for (n, e) in exact_errors.iter().enumerate().skip(start) {
        let bound = e + n as f64 * mu * delta;
        if bound <= best.1 {
            best = (n, bound);
        }
    }
    Ok(best)
}

pub fn solve_landweber(
    op: &DiscreteOperator,
    noisy: &NoisyData,
    mu: f64,
    n_max: usize,
    stop: StopRule,
    truth: Option<&DVector<f64>>,
) -> Result<(RegularizedSolution, IterationTrace)> {
    let out = landweber_run(op, noisy, mu, n_max, stop, truth)?;
    let residual = op.residual_norm(&out.u, noisy.f_delta());
    let error = truth.map(|y| op.grid().distance(&out.u, y));
    let steps = out.trace.stop_index as f64;
    Ok((
        RegularizedSolution {
            method: Method::Landweber,
            u: out.u,
            param_name: "n",
            param_value: steps,
            residual,
            error,
            steps_or_time: steps,
            status: out.status,
        },
        out.trace,
    ))
}

impl TryFrom<String> for StopRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StopRule> for String {
    fn from(r: StopRule) -> String {
        r.to_string()
    }
}
