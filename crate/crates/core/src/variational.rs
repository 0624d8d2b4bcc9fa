//! Tikhonov regularization with a-priori and discrepancy-principle parameter
//! choice.
//!
//! The regularized solution minimizes `||Au - f_delta||^2 + alpha ||u||^2`
//! and solves the normal equation `(A*A + alpha) u = A* f_delta`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{DiscreteOperator, SpectralData};
use crate::problems::NoisyData;
use crate::roots::bisect_log10;
use crate::solution::{Method, RegularizedSolution, Status};

pub const DEFAULT_APRIORI_EXPONENT: f64 = 2.0 / 3.0;
pub const DEFAULT_DISCREPANCY_C: f64 = 1.5;

/// Search window for parameter roots, in `log10`.
pub(crate) const ALPHA_LOG10_MIN: f64 = -14.0;
pub(crate) const ALPHA_LOG10_MAX: f64 = 4.0;
const MOROZOV_REL_TOL: f64 = 1e-10;
const MOROZOV_MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlphaRule {
    /// `alpha = delta^exponent`, `exponent` in `(0, 1)`.
    Apriori { exponent: f64 },
    /// Root of `||A u_alpha - f_delta|| = C delta`, `C > 1`.
    Morozov { c: f64 },
    Fixed { alpha: f64 },
}

impl AlphaRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaRule::Apriori { exponent } if !(exponent > 0.0 && exponent < 1.0) => Err(Error::invalid(format!(
                "a-priori exponent must lie in (0, 1), got {exponent}"
            ))),
            AlphaRule::Morozov { c } if !(c > 1.0) => {
                Err(Error::invalid(format!("discrepancy constant must be > 1, got {c}")))
            }
            AlphaRule::Fixed { alpha } if !(alpha > 0.0) => {
                Err(Error::invalid(format!("alpha must be > 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::Apriori {
            exponent: DEFAULT_APRIORI_EXPONENT,
        }
    }
}

impl FromStr for AlphaRule {
    type Err = Error;

    /// `apriori:<p>`, `morozov:<C>` or `fixed:<alpha>`; a bare name takes
    /// the default value.
    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = match s.split_once(':') {
            Some((n, v)) => (n, Some(v)),
            None => (s, None),
        };
        let parse = |v: Option<&str>, default: Option<f64>| -> Result<f64> {
            match v {
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number `{v}` in rule `{s}`"))),
                None => default.ok_or_else(|| Error::invalid(format!("rule `{s}` needs a value"))),
            }
        };
        let rule = match name {
            "apriori" => AlphaRule::Apriori {
                exponent: parse(value, Some(DEFAULT_APRIORI_EXPONENT))?,
            },
            "morozov" => AlphaRule::Morozov {
                c: parse(value, Some(DEFAULT_DISCREPANCY_C))?,
            },
            "fixed" => AlphaRule::Fixed {
                alpha: parse(value, None)?,
            },
            other => return Err(Error::invalid(format!("unknown alpha rule `{other}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaRule::Apriori { exponent } => write!(f, "apriori:{exponent}"),
            AlphaRule::Morozov { c } => write!(f, "morozov:{c}"),
            AlphaRule::Fixed { alpha } => write!(f, "fixed:{alpha}"),
        }
    }
}

/// `u = (A*A + alpha)^{-1} A* f_delta`.
pub fn tikhonov_solve(op: &DiscreteOperator, f_delta: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
    }
    op.resolvent_solve(alpha, &op.adjoint(f_delta))
}

/// Tikhonov functional `||Au - f||_h^2 + alpha ||u||_h^2`.
pub fn tikhonov_functional(op: &DiscreteOperator, f: &DVector<f64>, alpha: f64, u: &DVector<f64>) -> f64 {
    let g = op.grid();
    op.residual_norm(u, f).powi(2) + alpha * g.norm(u).powi(2)
}

pub fn apriori_alpha(delta: f64, exponent: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    AlphaRule::Apriori { exponent }.validate()?;
    Ok(delta.powf(exponent))
}

/// `||A (B + alpha)^{-1} A* f - f||_h` evaluated from the singular system:
/// each data coefficient is damped by `alpha / (s_j^2 + alpha)`, and the part
/// of `f` outside the range of `A` passes through unchanged.
pub fn spectral_residual(sp: &SpectralData, f: &DVector<f64>, alpha: f64, h: f64) -> f64 {
    let c = sp.data_coefficients(f);
    let outside = f - sp.synthesize_data(&c);
    let damped: f64 = sp
        .s_values()
        .iter()
        .zip(c.iter())
        .map(|(s, c)| (alpha / (s * s + alpha) * c).powi(2))
        .sum();
    (damped + h * outside.norm_squared()).sqrt()
}

/// Shared precondition and floor check for discrepancy-type rules.
pub(crate) fn discrepancy_target(
    op: &DiscreteOperator,
    f_delta: &DVector<f64>,
    delta: f64,
    c: f64,
) -> Result<f64> {
    let target = c * delta;
    let data_norm = op.grid().norm(f_delta);
    if data_norm <= target {
        return Err(Error::NoiseDominatesData {
            data_norm,
            threshold: target,
        });
    }
    let sp = op.spectral()?;
    let floor = spectral_residual(sp, f_delta, 10f64.powf(ALPHA_LOG10_MIN), op.grid().step());
    if floor > target {
        return Err(Error::NoRoot { floor, target });
    }
    Ok(target)
}

/// Root of the discrepancy equation in `alpha`, with the residual of the
/// actual solve and the number of bisections used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorozovRoot {
    pub alpha: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Discrepancy principle: the unique `alpha` with `||A u_alpha - f_delta|| = C delta`.
///
/// The residual is nondecreasing in `alpha`, so bisection on `log10 alpha`
/// over `[-14, 4]` always converges.
pub fn morozov_alpha(op: &DiscreteOperator, f_delta: &DVector<f64>, delta: f64, c: f64) -> Result<MorozovRoot> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    AlphaRule::Morozov { c }.validate()?;
    let target = discrepancy_target(op, f_delta, delta, c)?;
    let sp = op.spectral()?;
    let h = op.grid().step();
    let root = bisect_log10(
        |alpha| Ok(spectral_residual(sp, f_delta, alpha, h)),
        target,
        ALPHA_LOG10_MIN,
        ALPHA_LOG10_MAX,
        MOROZOV_REL_TOL,
        MOROZOV_MAX_BISECTIONS,
    )?;
    let u = tikhonov_solve(op, f_delta, root.x)?;
    Ok(MorozovRoot {
        alpha: root.x,
        residual: op.residual_norm(&u, f_delta),
        iterations: root.iterations,
    })
}

/// Chooses `alpha` by `rule` and solves.
pub fn solve_tikhonov(
    op: &DiscreteOperator,
    noisy: &NoisyData,
    rule: AlphaRule,
    truth: Option<&DVector<f64>>,
) -> Result<RegularizedSolution> {
    rule.validate()?;
    let (alpha, iterations) = match rule {
        AlphaRule::Apriori { exponent } => (apriori_alpha(noisy.delta(), exponent)?, 0),
        AlphaRule::Morozov { c } => {
            let root = morozov_alpha(op, noisy.f_delta(), noisy.delta(), c)?;
            (root.alpha, root.iterations)
        }
        AlphaRule::Fixed { alpha } => (alpha, 0),
    };
    let u = op.resolvent_solve(alpha, noisy.q_delta())?;
    let residual = op.residual_norm(&u, noisy.f_delta());
    let error = truth.map(|y| op.grid().distance(&u, y));
    Ok(RegularizedSolution {
        method: Method::Tikhonov,
        u,
        param_name: "alpha",
        param_value: alpha,
        residual,
        error,
        steps_or_time: iterations as f64,
        status: Status::Ok,
    })
}

impl TryFrom<String> for AlphaRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AlphaRule> for String {
    fn from(r: AlphaRule) -> String {
        r.to_string()
    }
}
