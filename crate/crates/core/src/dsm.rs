//! Dynamical systems method for linear problems.
//!
//! The Cauchy problem
//!
//! ```text
//! u'(t) = -u(t) + (B + eps(t))^{-1} q_delta,    u(0) = u_0,
//! ```
//!
//! with `B = A*A`, `q_delta = A* f_delta` and a positive `eps(t)` decaying to
//! zero with divergent integral, converges to the minimal-norm solution as
//! `t -> infinity` for exact data. With noisy data the trajectory is stopped
//! at a finite `t_delta`, and the gap to the exact-data trajectory obeys
//! `||u_delta(t) - u(t)|| <= delta / (2 sqrt(eps(t)))`.
//!
//! Time stepping is exponential: the linear part `-u` is integrated exactly
//! and the forcing is frozen at the step midpoint,
//!
//! ```text
//! u(t + dt) = e^{-dt} u(t) + (1 - e^{-dt}) (B + eps(t + dt/2))^{-1} q_delta.
//! ```
//!
//! Steps of any length are stable, so the time grid grows geometrically.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::DiscreteOperator;
use crate::problems::NoisyData;
use crate::roots::bisect_log10;
use crate::solution::{Method, RegularizedSolution, Status};
use crate::variational::{discrepancy_target, spectral_residual, ALPHA_LOG10_MAX, ALPHA_LOG10_MIN};

pub const FIRST_STEP: f64 = 0.1;
pub const STEP_RATIO: f64 = 1.2;
pub const DEFAULT_STOP_EXPONENT: f64 = 0.5;

/// A positive regularization schedule `eps(t)`, nonincreasing on `[0, inf)`.
pub trait Schedule {
    fn epsilon(&self, t: f64) -> f64;

    /// Smallest `t >= 0` with `eps(t) <= target`, found by bisection. `None`
    /// if the schedule never gets that low.
    fn time_for_epsilon(&self, target: f64) -> Option<f64> {
        if self.epsilon(0.0) <= target {
            return Some(0.0);
        }
        let mut hi = 1.0;
        while self.epsilon(hi) > target {
            hi *= 2.0;
            if !hi.is_finite() || hi > 1e300 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.epsilon(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }
}

/// `eps(t) = c1 / (c0 + t)^p` with `c0, c1 > 0` and `p` in `(0, 1)`: strictly
/// decreasing to zero with `int_0^inf eps = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EpsilonSchedule {
    pub c0: f64,
    pub c1: f64,
    pub p: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            c0: 1.0,
            c1: 1.0,
            p: 0.5,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(c0: f64, c1: f64, p: f64) -> Result<Self> {
        let s = EpsilonSchedule { c0, c1, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::invalid(format!("schedule c0 must be > 0, got {}", self.c0)));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid(format!("schedule c1 must be > 0, got {}", self.c1)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid(format!("schedule exponent p must lie in (0, 1), got {}", self.p)));
        }
        Ok(())
    }
}

impl Schedule for EpsilonSchedule {
    fn epsilon(&self, t: f64) -> f64 {
        self.c1 / (self.c0 + t).powf(self.p)
    }

    fn time_for_epsilon(&self, target: f64) -> Option<f64> {
        if !(target > 0.0) {
            return None;
        }
        Some(((self.c1 / target).powf(1.0 / self.p) - self.c0).max(0.0))
    }
}

impl FromStr for EpsilonSchedule {
    type Err = Error;

    /// `c0=<v>,c1=<v>,p=<v>`; omitted keys keep their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut sched = EpsilonSchedule::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad schedule entry `{part}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad number in schedule entry `{part}`")))?;
            match key.trim() {
                "c0" => sched.c0 = value,
                "c1" => sched.c1 = value,
                "p" => sched.p = value,
                other => return Err(Error::invalid(format!("unknown schedule key `{other}`"))),
            }
        }
        sched.validate()?;
        Ok(sched)
    }
}

impl fmt::Display for EpsilonSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c0={},c1={},p={}", self.c0, self.c1, self.p)
    }
}

/// Constant `eps`. Zero is allowed when `B` itself is invertible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenSchedule(pub f64);

impl Schedule for FrozenSchedule {
    fn epsilon(&self, _t: f64) -> f64 {
        self.0
    }
}

/// Geometric grid from 0: first step [`FIRST_STEP`], each following step
/// [`STEP_RATIO`] times longer. Steps are shortened to land exactly on every
/// checkpoint in `(0, t_end)` and on `t_end`.
pub fn time_grid(t_end: f64, checkpoints: &[f64]) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("t_end must be > 0, got {t_end}")));
    }
    let mut stops: Vec<f64> = checkpoints.iter().copied().filter(|&c| c > 0.0 && c < t_end).collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut times = vec![0.0];
    let mut t = 0.0;
    let mut step = FIRST_STEP;
    for stop in stops {
        while t < stop {
            let next = t + step;
            step *= STEP_RATIO;
            t = if next >= stop { stop } else { next };
            times.push(t);
        }
    }
    Ok(times)
}

/// Recorded DSM solution on a time grid.
#[derive(Debug, Clone)]
pub struct DsmTrajectory {
    pub times: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `||A u(t_k) - f_delta||_h`, filled by [`DsmTrajectory::with_residuals`].
    pub residuals: Option<Vec<f64>>,
    pub stop_time: Option<f64>,
    pub step_policy: String,
}

impl DsmTrajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// State at a grid time, matched to within relative roundoff.
    pub fn state_at(&self, t: f64) -> Option<&DVector<f64>> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|k| &self.states[k])
    }

    pub fn with_residuals(mut self, op: &DiscreteOperator, f_delta: &DVector<f64>) -> Self {
        self.residuals = Some(self.states.iter().map(|u| op.residual_norm(u, f_delta)).collect());
        self
    }

    pub fn errors(&self, op: &DiscreteOperator, truth: &DVector<f64>) -> Vec<f64> {
        self.states.iter().map(|u| op.grid().distance(u, truth)).collect()
    }
}

/// Integrates on the default geometric grid up to `t_end`.
pub fn dsm_evolve<S: Schedule>(
    op: &DiscreteOperator,
    q_delta: &DVector<f64>,
    schedule: &S,
    t_end: f64,
    u0: &DVector<f64>,
) -> Result<DsmTrajectory> {
    dsm_evolve_on(op, q_delta, schedule, &time_grid(t_end, &[])?, u0)
}

/// Integrates on an explicit, strictly increasing time grid starting at 0.
pub fn dsm_evolve_on<S: Schedule>(
    op: &DiscreteOperator,
    q_delta: &DVector<f64>,
    schedule: &S,
    times: &[f64],
    u0: &DVector<f64>,
) -> Result<DsmTrajectory> {
    if times.first() != Some(&0.0) {
        return Err(Error::invalid("time grid must start at 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    if u0.len() != op.dim() || q_delta.len() != op.dim() {
        return Err(Error::invalid("initial state and data must match the operator dimension"));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut epsilons = Vec::with_capacity(times.len());
    let mut u = u0.clone();
    states.push(u.clone());
    epsilons.push(schedule.epsilon(0.0));
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let mid_eps = schedule.epsilon(w[0] + 0.5 * dt);
        let forcing = op.shifted_solve(mid_eps, q_delta).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("{msg} at t = {}", w[0])),
            other => other,
        })?;
        let decay = (-dt).exp();
        u = u * decay + forcing * (-(-dt).exp_m1());
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite DSM state at t = {}", w[1])));
        }
        states.push(u.clone());
        epsilons.push(schedule.epsilon(w[1]));
    }
    Ok(DsmTrajectory {
        times: times.to_vec(),
        epsilons,
        states,
        residuals: None,
        stop_time: None,
        step_policy: format!("exponential-midpoint, geometric first={FIRST_STEP} ratio={STEP_RATIO}"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopTime {
    pub t: f64,
    /// `eps(t)` at the stopping time.
    pub epsilon: f64,
    /// The target was already met at `t = 0`.
    pub at_boundary: bool,
}

/// Root of `2 sqrt(eps(t)) = delta^b`.
pub fn dsm_stop_root(schedule: &EpsilonSchedule, delta: f64, b: f64) -> Result<StopTime> {
    schedule.validate()?;
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::invalid(format!("stopping exponent b must lie in (0, 1), got {b}")));
    }
    let target = delta.powf(2.0 * b) / 4.0;
    stop_for_epsilon(schedule, target)
}

fn stop_for_epsilon(schedule: &EpsilonSchedule, target: f64) -> Result<StopTime> {
    if target >= schedule.epsilon(0.0) {
        return Ok(StopTime {
            t: 0.0,
            epsilon: schedule.epsilon(0.0),
            at_boundary: true,
        });
    }
    let t = schedule
        .time_for_epsilon(target)
        .ok_or_else(|| Error::Numerical(format!("schedule never reaches eps = {target:e}")))?;
    Ok(StopTime {
        t,
        epsilon: target,
        at_boundary: false,
    })
}

/// Discrepancy principle for the DSM: `eps` with
/// `||A (B + eps)^{-1} A* f_delta - f_delta|| = C delta`, mapped to a time
/// through the schedule.
pub fn dsm_stop_discrepancy(
    op: &DiscreteOperator,
    f_delta: &DVector<f64>,
    delta: f64,
    c: f64,
    schedule: &EpsilonSchedule,
) -> Result<StopTime> {
    schedule.validate()?;
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    if !(c >= 1.0) {
        return Err(Error::invalid(format!("discrepancy constant must be >= 1, got {c}")));
    }
    let target = discrepancy_target(op, f_delta, delta, c)?;
    let sp = op.spectral()?;
    let h = op.grid().step();
    let root = bisect_log10(
        |eps| Ok(spectral_residual(sp, f_delta, eps, h)),
        target,
        ALPHA_LOG10_MIN,
        ALPHA_LOG10_MAX,
        1e-14,
        200,
    )?;
    stop_for_epsilon(schedule, root.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DsmStop {
    /// `2 sqrt(eps(t)) = delta^b`
    Root { b: f64 },
    Discrepancy { c: f64 },
    Time { t: f64 },
}

impl Default for DsmStop {
    fn default() -> Self {
        DsmStop::Root {
            b: DEFAULT_STOP_EXPONENT,
        }
    }
}

impl DsmStop {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DsmStop::Root { b } if !(b > 0.0 && b < 1.0) => {
                Err(Error::invalid(format!("stopping exponent b must lie in (0, 1), got {b}")))
            }
            DsmStop::Discrepancy { c } if !(c >= 1.0) => {
                Err(Error::invalid(format!("discrepancy constant must be >= 1, got {c}")))
            }
            DsmStop::Time { t } if !(t >= 0.0 && t.is_finite()) => {
                Err(Error::invalid(format!("stopping time must be >= 0, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for DsmStop {
    type Err = Error;

    /// `root:<b>`, `discrepancy:<C>` or `time:<t>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad DSM stopping rule `{s}`"));
        let (name, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        let stop = match name {
            "root" => DsmStop::Root { b: value },
            "discrepancy" => DsmStop::Discrepancy { c: value },
            "time" => DsmStop::Time { t: value },
            _ => return Err(bad()),
        };
        stop.validate()?;
        Ok(stop)
    }
}

impl fmt::Display for DsmStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DsmStop::Root { b } => write!(f, "root:{b}"),
            DsmStop::Discrepancy { c } => write!(f, "discrepancy:{c}"),
            DsmStop::Time { t } => write!(f, "time:{t}"),
        }
    }
}

/// Picks `t_delta` by `stop`, integrates from `u_0 = 0` up to it and returns
/// the stopped state together with the trajectory.
pub fn solve_dsm(
    op: &DiscreteOperator,
    noisy: &NoisyData,
    schedule: &EpsilonSchedule,
    stop: DsmStop,
    truth: Option<&DVector<f64>>,
) -> Result<(RegularizedSolution, DsmTrajectory)> {
    stop.validate()?;
    let t_stop = match stop {
        DsmStop::Root { b } => dsm_stop_root(schedule, noisy.delta(), b)?.t,
        DsmStop::Discrepancy { c } => dsm_stop_discrepancy(op, noisy.f_delta(), noisy.delta(), c, schedule)?.t,
        DsmStop::Time { t } => t,
    };
    let u0 = DVector::zeros(op.dim());
    let mut trajectory = if t_stop > 0.0 {
        dsm_evolve(op, noisy.q_delta(), schedule, t_stop, &u0)?
    } else {
        dsm_evolve_on(op, noisy.q_delta(), schedule, &[0.0], &u0)?
    };
    trajectory.stop_time = Some(t_stop);
    let trajectory = trajectory.with_residuals(op, noisy.f_delta());
    let u = trajectory.final_state().clone();
    let residual = op.residual_norm(&u, noisy.f_delta());
    let error = truth.map(|y| op.grid().distance(&u, y));
    Ok((
        RegularizedSolution {
            method: Method::Dsm,
            u,
            param_name: "t_delta",
            param_value: t_stop,
            residual,
            error,
            steps_or_time: t_stop,
            status: Status::Ok,
        },
        trajectory,
    ))
}

impl TryFrom<String> for DsmStop {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DsmStop> for String {
    fn from(r: DsmStop) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for EpsilonSchedule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EpsilonSchedule> for String {
    fn from(s: EpsilonSchedule) -> String {
        s.to_string()
    }
}
