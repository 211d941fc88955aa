//! Zero sets of the mean field and the loss-minimizer subset.
//!
//! The mean field theta -> f(theta, beta) blows up with opposite signs at
//! the ends of (-1, 1), so every sign change on a fine grid brackets a root
//! and at least one root always exists. Roots of even multiplicity do not
//! produce sign changes; grid points where |f| is tiny without a change are
//! surfaced as suspects instead of being promoted to roots.
//!
//! The minimizer set is the subset of the beta = 1 zero set at which the
//! prediction loss is locally minimal (grid second-difference test) and
//! attains the global grid minimum of the loss within the root tolerance.

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::quadrature::QuadratureSpec;
use crate::spectral::{self, MomentTable};

/// Default scan resolution over the theta interval.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Default residual tolerance for accepted roots.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// Distance kept from the +-1 boundary, where the field diverges.
pub const GRID_MARGIN: f64 = 1e-4;

/// One bracketed root of the mean field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    /// Bisection limit; |f(theta, beta)| < root tolerance.
    pub theta: f64,
    /// Final bracket with opposite field signs at the endpoints.
    pub bracket: (f64, f64),
    /// |f(theta, beta)| at acceptance.
    pub residual: f64,
}

/// All bracketed roots of theta -> f(theta, beta), sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub beta: f64,
    pub grid_points: usize,
    pub roots: Vec<Root>,
    /// Grid thetas where |f| < 100 x root tolerance without a sign change:
    /// candidate tangential zeros, reported but never counted as roots.
    pub suspects: Vec<f64>,
}

impl ZeroSet {
    /// Root locations only.
    pub fn thetas(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.theta).collect()
    }

    /// Distance from `theta` to the nearest root (infinite when empty).
    pub fn distance_to(&self, theta: f64) -> f64 {
        self.roots
            .iter()
            .map(|r| (r.theta - theta).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Roots of theta -> f(theta, beta) over [-1 + margin, 1 - margin] at the
/// default grid resolution and tolerance.
pub fn find_zero_set(model: &SpectralModel, beta: f64) -> Result<ZeroSet> {
    find_zero_set_with(
        model,
        beta,
        DEFAULT_GRID_POINTS,
        DEFAULT_ROOT_TOL,
        &QuadratureSpec::default(),
    )
}

/// As [`find_zero_set`] with explicit grid resolution, root tolerance, and
/// quadrature control.
pub fn find_zero_set_with(
    model: &SpectralModel,
    beta: f64,
    grid_points: usize,
    root_tol: f64,
    quad: &QuadratureSpec,
) -> Result<ZeroSet> {
    validate(grid_points, root_tol)?;
    model.validate()?;
    spectral::check_beta(beta)?;
    let table = MomentTable::build(model, beta, quad)?;
    let eval = |theta: f64| -> Result<f64> { Ok(table.eval(theta)?.f) };
    scan(beta, grid_points, root_tol, &eval)
}

/// Subset of the beta = 1 zero set at which the loss is locally minimal and
/// attains the global grid minimum (within `root_tol` on loss values).
pub fn find_minimizers(model: &SpectralModel) -> Result<ZeroSet> {
    find_minimizers_with(
        model,
        DEFAULT_GRID_POINTS,
        DEFAULT_ROOT_TOL,
        &QuadratureSpec::default(),
    )
}

/// As [`find_minimizers`] with explicit controls.
pub fn find_minimizers_with(
    model: &SpectralModel,
    grid_points: usize,
    root_tol: f64,
    quad: &QuadratureSpec,
) -> Result<ZeroSet> {
    let stationary = find_zero_set_with(model, 1.0, grid_points, root_tol, quad)?;
    let thetas = grid(grid_points);
    let mut losses = Vec::with_capacity(thetas.len());
    for &t in &thetas {
        losses.push(spectral::loss_with(model, t, quad)?);
    }
    let grid_min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let step = thetas[1] - thetas[0];

    let mut roots = Vec::new();
    for root in &stationary.roots {
        let i = (((root.theta - thetas[0]) / step).round() as usize).clamp(1, thetas.len() - 2);
        let local_min = losses[i] <= losses[i - 1] && losses[i] <= losses[i + 1];
        let convex = losses[i + 1] - 2.0 * losses[i] + losses[i - 1] >= 0.0;
        if !(local_min && convex) {
            continue;
        }
        let at_root = spectral::loss_with(model, root.theta, quad)?;
        if at_root <= grid_min + root_tol {
            roots.push(*root);
        }
    }
    Ok(ZeroSet {
        beta: 1.0,
        grid_points,
        roots,
        suspects: stationary.suspects,
    })
}

fn validate(grid_points: usize, root_tol: f64) -> Result<()> {
    if grid_points < 3 {
        return Err(Error::InvalidConfig {
            reason: format!("grid_points must be at least 3, got {grid_points}"),
        });
    }
    if !(root_tol.is_finite() && root_tol > 0.0) {
        return Err(Error::InvalidConfig {
            reason: format!("root_tol must be positive, got {root_tol}"),
        });
    }
    Ok(())
}

fn grid(grid_points: usize) -> Vec<f64> {
    let lo = -1.0 + GRID_MARGIN;
    let hi = 1.0 - GRID_MARGIN;
    let step = (hi - lo) / (grid_points - 1) as f64;
    (0..grid_points).map(|i| lo + step * i as f64).collect()
}

fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn scan(
    beta: f64,
    grid_points: usize,
    root_tol: f64,
    eval: &dyn Fn(f64) -> Result<f64>,
) -> Result<ZeroSet> {
    let thetas = grid(grid_points);
    let mut values = Vec::with_capacity(thetas.len());
    for &t in &thetas {
        values.push(eval(t)?);
    }

    let mut roots: Vec<Root> = Vec::new();
    let mut bracketed = vec![false; thetas.len()];
    for i in 0..thetas.len() {
        // An exact zero on the grid (possible only by float coincidence)
        // is a root in its own right; claim the surrounding cell.
        if values[i] == 0.0 {
            let lo = if i > 0 { thetas[i - 1] } else { thetas[i] };
            let hi = if i + 1 < thetas.len() {
                thetas[i + 1]
            } else {
                thetas[i]
            };
            roots.push(Root {
                theta: thetas[i],
                bracket: (lo, hi),
                residual: 0.0,
            });
            bracketed[i] = true;
            continue;
        }
        if i + 1 < thetas.len()
            && values[i + 1] != 0.0
            && sign(values[i]) * sign(values[i + 1]) == -1
        {
            roots.push(bisect(
                thetas[i],
                thetas[i + 1],
                values[i],
                values[i + 1],
                root_tol,
                eval,
            )?);
            bracketed[i] = true;
            bracketed[i + 1] = true;
        }
    }
    if roots.is_empty() {
        return Err(Error::NoSignChange { beta });
    }
    roots.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());

    let suspects = thetas
        .iter()
        .zip(values.iter())
        .enumerate()
        .filter(|&(i, (_, &v))| !bracketed[i] && v != 0.0 && v.abs() < 100.0 * root_tol)
        .map(|(_, (&t, _))| t)
        .collect();

    Ok(ZeroSet {
        beta,
        grid_points,
        roots,
        suspects,
    })
}

fn bisect(
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    fb: f64,
    root_tol: f64,
    eval: &dyn Fn(f64) -> Result<f64>,
) -> Result<Root> {
    debug_assert!(sign(fa) * sign(fb) == -1);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = eval(mid)?;
        if fm.abs() < root_tol {
            return Ok(Root {
                theta: mid,
                bracket: (a, b),
                residual: fm.abs(),
            });
        }
        if sign(fm) == sign(fa) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if b - a <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    Err(Error::RootFinding {
        reason: format!(
            "bisection exhausted the bracket [{a}, {b}] without reaching |f| < {root_tol}"
        ),
    })
}
