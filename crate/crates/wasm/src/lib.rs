//! Browser bindings for the interactive estimator demo.
//!
//! The page exposes three operations: simulate a path and run the
//! recursion on it, trace the deterministic mean field over a theta grid,
//! and solve that field's zero set. All numerical work lives in [`ops`]
//! as plain functions over plain types, so the whole crate is testable on
//! the host; the `wasm_bindgen` exports below are one-line shims.
//!
//! Build the browser bundle with the `wasm32-unknown-unknown` target and
//! `wasm-bindgen --target web` (see the repository README); the static
//! page in `demo/` loads the generated module directly, no framework.

use wasm_bindgen::prelude::*;

pub mod ops {
    use ma1lab_core::estimator::{self, MonitorConfig};
    use ma1lab_core::model::SpectralModel;
    use ma1lab_core::residue;
    use ma1lab_core::sim::{self, InnovationLaw, InnovationSpec};
    use ma1lab_core::QuadratureSpec;

    /// Theta range the demo plots and searches. Narrower than the
    /// estimator's own domain so every residue evaluation stays far from
    /// the unit-circle blowup and renders smoothly.
    pub const THETA_SPAN: f64 = 0.95;

    /// Longest path the page may request; keeps the worst case around a
    /// few million recursion steps, still instant in compiled wasm.
    pub const MAX_T_LEN: u32 = 200_000;

    const BURN_IN: usize = 200;
    const SCAN_POINTS: usize = 1201;
    const BISECTIONS: usize = 90;

    /// Fallback quadrature for near-coincident poles; plotting accuracy
    /// only, never on the hot path.
    fn demo_quad() -> QuadratureSpec {
        QuadratureSpec {
            initial_nodes: 1024,
            rel_tol: 1e-8,
            max_doublings: 8,
        }
    }

    /// Data-generating processes offered by the page: `kind` 0 is MA(1)
    /// with the given coefficient (the recursion's own family), `kind` 1
    /// is AR(1) (misspecified, so each beta picks its own limit).
    pub fn demo_model(kind: u32, coeff: f64) -> Result<SpectralModel, String> {
        if !(coeff.is_finite() && coeff.abs() <= 0.9) {
            return Err(format!("coefficient {coeff} outside [-0.9, 0.9]"));
        }
        let model = match kind {
            0 => SpectralModel::Arma {
                ar: vec![],
                ma: vec![coeff],
                sigma2: 1.0,
            },
            1 => SpectralModel::Arma {
                ar: vec![coeff],
                ma: vec![],
                sigma2: 1.0,
            },
            _ => return Err(format!("unknown process kind {kind}; use 0 (MA) or 1 (AR)")),
        };
        model.validate().map_err(|e| e.to_string())?;
        Ok(model)
    }

    fn check_beta(beta: f64) -> Result<(), String> {
        if (0.0..=1.0).contains(&beta) {
            Ok(())
        } else {
            Err(format!("beta {beta} outside [0, 1]"))
        }
    }

    /// Uniform innovations with unit variance, matching the demo models'
    /// sigma2 = 1.
    fn innovations(seed: u32) -> InnovationSpec {
        InnovationSpec {
            law: InnovationLaw::Uniform {
                half_width: 3f64.sqrt(),
            },
            seed: seed as u64,
        }
    }

    /// Simulate one path and run the recursion at `beta` over it.
    /// Returns `[y_1, theta_1, y_2, theta_2, ...]`, interleaved so the
    /// page needs a single transferable buffer per redraw.
    pub fn estimate_demo(
        kind: u32,
        coeff: f64,
        beta: f64,
        seed: u32,
        t_len: u32,
    ) -> Result<Vec<f64>, String> {
        check_beta(beta)?;
        if !(10..=MAX_T_LEN).contains(&t_len) {
            return Err(format!("t_len {t_len} outside [10, {MAX_T_LEN}]"));
        }
        let model = demo_model(kind, coeff)?;
        let path = sim::simulate(&model, &innovations(seed), t_len as usize, BURN_IN)
            .map_err(|e| e.to_string())?;
        let traj = estimator::run(&path.y, beta, &MonitorConfig::default())
            .map_err(|e| e.to_string())?;
        let mut out = Vec::with_capacity(2 * path.y.len());
        for (y, state) in path.y.iter().zip(&traj.states) {
            out.push(*y);
            out.push(state.theta);
        }
        Ok(out)
    }

    fn field(model: &SpectralModel, theta: f64, beta: f64) -> Result<f64, String> {
        residue::f_residue_with(model, theta, beta, &demo_quad())
            .map(|e| e.value)
            .map_err(|e| e.to_string())
    }

    /// Mean-field values on `points` evenly spaced thetas covering
    /// [-THETA_SPAN, THETA_SPAN]. The page rebuilds the same grid, so
    /// only the ordinates cross the boundary.
    pub fn field_curve(
        kind: u32,
        coeff: f64,
        beta: f64,
        points: u32,
    ) -> Result<Vec<f64>, String> {
        check_beta(beta)?;
        if !(2..=100_000).contains(&points) {
            return Err(format!("points {points} outside [2, 100000]"));
        }
        let model = demo_model(kind, coeff)?;
        let n = points as usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let theta = grid_theta(i, n);
            out.push(field(&model, theta, beta)?);
        }
        Ok(out)
    }

    /// Abscissa of the `i`-th of `n` grid points; shared by
    /// [`field_curve`] and the page's axis code.
    pub fn grid_theta(i: usize, n: usize) -> f64 {
        -THETA_SPAN + 2.0 * THETA_SPAN * (i as f64) / ((n - 1) as f64)
    }

    /// Zeros of the mean field inside [-THETA_SPAN, THETA_SPAN]: a sign
    /// scan over a fine grid followed by bisection on each bracket. These
    /// are the recursion's candidate limit points at this beta.
    pub fn zero_points(kind: u32, coeff: f64, beta: f64) -> Result<Vec<f64>, String> {
        check_beta(beta)?;
        let model = demo_model(kind, coeff)?;
        let mut roots = Vec::new();
        let mut prev_theta = grid_theta(0, SCAN_POINTS);
        let mut prev = field(&model, prev_theta, beta)?;
        for i in 1..SCAN_POINTS {
            let theta = grid_theta(i, SCAN_POINTS);
            let cur = field(&model, theta, beta)?;
            if prev == 0.0 {
                push_root(&mut roots, prev_theta);
            } else if prev * cur < 0.0 {
                let (mut lo, mut hi) = (prev_theta, theta);
                let mut f_lo = prev;
                for _ in 0..BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    let f_mid = field(&model, mid, beta)?;
                    if f_mid == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if f_lo * f_mid < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        f_lo = f_mid;
                    }
                }
                push_root(&mut roots, 0.5 * (lo + hi));
            }
            prev_theta = theta;
            prev = cur;
        }
        if prev == 0.0 {
            push_root(&mut roots, prev_theta);
        }
        Ok(roots)
    }

    fn push_root(roots: &mut Vec<f64>, theta: f64) {
        // The scan is left to right, so duplicates can only be adjacent.
        if roots.last().is_none_or(|r| (r - theta).abs() > 1e-9) {
            roots.push(theta);
        }
    }
}

#[wasm_bindgen]
pub fn estimate_demo(
    kind: u32,
    coeff: f64,
    beta: f64,
    seed: u32,
    t_len: u32,
) -> Result<Vec<f64>, String> {
    ops::estimate_demo(kind, coeff, beta, seed, t_len)
}

#[wasm_bindgen]
pub fn field_curve(kind: u32, coeff: f64, beta: f64, points: u32) -> Result<Vec<f64>, String> {
    ops::field_curve(kind, coeff, beta, points)
}

#[wasm_bindgen]
pub fn zero_points(kind: u32, coeff: f64, beta: f64) -> Result<Vec<f64>, String> {
    ops::zero_points(kind, coeff, beta)
}

#[wasm_bindgen]
pub fn theta_span() -> f64 {
    ops::THETA_SPAN
}
