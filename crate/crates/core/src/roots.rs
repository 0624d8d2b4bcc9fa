//! Bisection in `log10` of a positive parameter.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LogRoot {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Finds `x` in `[10^lo_exp, 10^hi_exp]` with `g(x) = target` for a
/// nondecreasing `g`. The caller has already checked `g(10^lo_exp) <= target`.
///
/// Stops when `|g(x) - target| <= rel_tol * |target|`, when the bracket can
/// no longer shrink in floating point, or after `max_iter` halvings.
pub(crate) fn bisect_log10(
    g: impl Fn(f64) -> Result<f64>,
    target: f64,
    lo_exp: f64,
    hi_exp: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<LogRoot> {
    let hi_value = g(10f64.powf(hi_exp))?;
    if hi_value < target {
        return Err(Error::Numerical(format!(
            "target {target:e} not bracketed: value at 1e{hi_exp} is {hi_value:e}"
        )));
    }
    let (mut lo, mut hi) = (lo_exp, hi_exp);
    let mut best = LogRoot {
        x: 10f64.powf(hi_exp),
        value: hi_value,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let x = 10f64.powf(mid);
        let value = g(x)?;
        if (value - target).abs() < (best.value - target).abs() {
            best = LogRoot { x, value, iterations: it };
        }
        best.iterations = it;
        if (value - target).abs() <= rel_tol * target.abs() {
            return Ok(LogRoot { x, value, iterations: it });
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
