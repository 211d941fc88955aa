//! Trapezoidal quadrature for even, 2*pi-periodic integrands.
//!
//! Every population functional in this crate is an integral over [-pi, pi]
//! of an even, analytic, 2*pi-periodic function, for which the equally
//! spaced trapezoid rule converges geometrically. Evenness halves the work:
//! we integrate over [0, pi] and double. Node counts double until all
//! integrands in a batch stabilize, so a single pass can evaluate several
//! functionals on shared nodes -- which in turn makes algebraic identities
//! between them hold to rounding rather than to quadrature tolerance.
//!
//! Convergence is declared relative to max(|integral|, integral of |f|),
//! so integrands that are genuinely zero (or nearly cancel) are handled
//! without demanding exact equality of successive estimates.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Node-doubling schedule for the trapezoid rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Panels over [0, pi] for the first estimate. Must be >= 16 and even.
    pub initial_nodes: usize,
    /// Relative change threshold across one doubling.
    pub rel_tol: f64,
    /// Maximum number of doublings before giving up.
    pub max_doublings: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            initial_nodes: 4096,
            rel_tol: 1e-10,
            max_doublings: 8,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.initial_nodes < 16 || self.initial_nodes % 2 != 0 {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "initial_nodes = {} must be an even integer >= 16",
                    self.initial_nodes
                ),
            });
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("rel_tol = {} must be > 0", self.rel_tol),
            });
        }
        Ok(())
    }
}

/// Integrate K even periodic integrands over [-pi, pi] on shared nodes.
///
/// `eval(omega)` returns all K integrand values at one frequency; it is
/// called only for omega in [0, pi]. Returns the K integrals once one
/// doubling changes every component by less than
/// rel_tol * max(|integral|, L1 estimate).
pub fn integrate_even<const K: usize>(
    eval: impl Fn(f64) -> [f64; K],
    spec: &QuadratureSpec,
) -> Result<[f64; K]> {
    spec.validate()?;
    let mut n = spec.initial_nodes;
    let mut h = PI / n as f64;

    // First trapezoid pass over [0, pi].
    let mut sums = [0.0_f64; K];
    let mut abs_sums = [0.0_f64; K];
    {
        let ends0 = eval(0.0);
        let ends1 = eval(PI);
        for k in 0..K {
            sums[k] = 0.5 * (ends0[k] + ends1[k]);
            abs_sums[k] = 0.5 * (ends0[k].abs() + ends1[k].abs());
        }
        for i in 1..n {
            let v = eval(i as f64 * h);
            for k in 0..K {
                sums[k] += v[k];
                abs_sums[k] += v[k].abs();
            }
        }
    }
    let mut estimate: [f64; K] = std::array::from_fn(|k| 2.0 * h * sums[k]);
    let mut l1: [f64; K] = std::array::from_fn(|k| 2.0 * h * abs_sums[k]);

    let mut worst_change = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        // Midpoint refinement: new nodes at odd multiples of h/2.
        let mut mid = [0.0_f64; K];
        let mut mid_abs = [0.0_f64; K];
        for i in 0..n {
            let v = eval((i as f64 + 0.5) * h);
            for k in 0..K {
                mid[k] += v[k];
                mid_abs[k] += v[k].abs();
            }
        }
        n *= 2;
        h *= 0.5;
        let mut converged = true;
        worst_change = 0.0;
        for k in 0..K {
            sums[k] += mid[k];
            abs_sums[k] += mid_abs[k];
            let next = 2.0 * h * sums[k];
            let next_l1 = 2.0 * h * abs_sums[k];
            let change = (next - estimate[k]).abs();
            let scale = next.abs().max(next_l1).max(f64::MIN_POSITIVE);
            if change > spec.rel_tol * scale {
                converged = false;
            }
            worst_change = worst_change.max(change / scale);
            estimate[k] = next;
            l1[k] = next_l1;
        }
        if converged {
            return Ok(estimate);
        }
    }
    Err(Error::QuadratureNoConvergence {
        last_change: worst_change,
        tol: spec.rel_tol,
        doublings: spec.max_doublings,
    })
}
