use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tikhonov,
    Quasi,
    Landweber,
    Dsm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tikhonov => "tikhonov",
            Method::Quasi => "quasi",
            Method::Landweber => "landweber",
            Method::Dsm => "dsm",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tikhonov" => Ok(Method::Tikhonov),
            "quasi" => Ok(Method::Quasi),
            "landweber" => Ok(Method::Landweber),
            "dsm" => Ok(Method::Dsm),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// Outcome of a run that produced a usable iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// The stopping rule was not met within the iteration budget; the
    /// solution is the best iterate seen.
    BudgetExhausted,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::BudgetExhausted => "budget-exhausted",
        }
    }
}

/// A regularized approximation together with the parameter that produced it.
#[derive(Debug, Clone)]
pub struct RegularizedSolution {
    pub method: Method,
    pub u: DVector<f64>,
    /// `alpha`, `lambda`, `n` or `t_delta`.
    pub param_name: &'static str,
    pub param_value: f64,
    /// `||Au - f_delta||_h`
    pub residual: f64,
    /// `||u - y||_h` when the exact solution is known.
    pub error: Option<f64>,
    /// Iterations, root-finder steps or stopping time.
    pub steps_or_time: f64,
    pub status: Status,
}
