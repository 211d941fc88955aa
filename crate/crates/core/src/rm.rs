//! Deterministic root-finding iteration used as a limit-set oracle.
//!
//! Given a computable mean field f and deterministic schedules delta_t
//! (nonnegative, summing to infinity, vanishing) and gamma_t (vanishing),
//! the iteration
//!
//! ```text
//! theta_t = theta_{t-1} - delta_t f(theta_{t-1}) + delta_t gamma_t
//! ```
//!
//! settles on zeros of f. Run against the spectral mean field it predicts
//! where the stochastic recursion's iterates must accumulate, without
//! simulating any data.

use crate::error::{Error, Result};

/// Guard beyond which the iteration is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Deterministic step-size and perturbation schedules with the starting
/// point and starting index.
pub struct RmSchedule<D, G>
where
    D: Fn(u64) -> f64,
    G: Fn(u64) -> f64,
{
    /// t -> delta_t >= 0.
    pub delta: D,
    /// t -> gamma_t.
    pub gamma: G,
    pub theta0: f64,
    pub t0: u64,
}

impl<D, G> RmSchedule<D, G>
where
    D: Fn(u64) -> f64,
    G: Fn(u64) -> f64,
{
    pub fn new(delta: D, gamma: G, theta0: f64, t0: u64) -> Self {
        RmSchedule {
            delta,
            gamma,
            theta0,
            t0,
        }
    }
}

/// Unperturbed schedule with steps c / t from t0 = 1.
pub fn harmonic_schedule(
    gain: f64,
    theta0: f64,
) -> RmSchedule<impl Fn(u64) -> f64, impl Fn(u64) -> f64> {
    RmSchedule::new(move |t| gain / t as f64, |_| 0.0, theta0, 1)
}

/// Run the iteration for `steps` updates; returns
/// [theta_{t0}, theta_{t0+1}, ..., theta_{t0+steps}] (length steps + 1).
pub fn rm_iterate<F, D, G>(
    field: F,
    schedule: &RmSchedule<D, G>,
    steps: u64,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(u64) -> f64,
    G: Fn(u64) -> f64,
{
    if steps < 1 {
        return Err(Error::InvalidConfig {
            reason: "rm iteration needs at least one step".to_string(),
        });
    }
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut theta = schedule.theta0;
    out.push(theta);
    for k in 1..=steps {
        let t = schedule.t0 + k;
        let d = (schedule.delta)(t);
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("delta_{t} = {d} is negative or non-finite"),
            });
        }
        let g = (schedule.gamma)(t);
        theta = theta - d * field(theta)? + d * g;
        if !theta.is_finite() || theta.abs() > DIVERGENCE_GUARD {
            return Err(Error::IterateDiverged {
                step: t,
                value: theta,
            });
        }
        out.push(theta);
    }
    Ok(out)
}
