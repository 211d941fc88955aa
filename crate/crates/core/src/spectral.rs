//! Population functionals of the data spectrum.
//!
//! For a data spectral density g_y and a candidate MA(1) coefficient theta,
//! the quantities of interest are integrals over [-pi, pi]:
//!
//! ```text
//!   loss      L(theta)          = int g_y(w) / |1 + theta e^{iw}|^2 dw
//!   mean field f(theta, beta)   = -int (cos w + beta theta) W(w) dw
//!   second moment Phi           =  int W(w) dw
//!   cross moment Z              =  int (cos w + (1 + beta) theta) W(w) dw
//!   with W(w) = g_y(w) / (|1 + theta e^{iw}|^2 |1 + beta theta e^{iw}|^2)
//! ```
//!
//! f is the expected driving term of the recursive estimator: its zeros are
//! the possible limits, and L'(theta) = 2 f(theta, 1) ties the beta = 1
//! zeros to the loss minimizers. The three W-integrals satisfy the exact
//! pointwise identity Z = theta * Phi - f, which `moments` preserves to
//! rounding by evaluating all three on shared quadrature nodes.
//!
//! `MomentTable` interpolates Phi and Z in theta by a Chebyshev expansion so
//! that trajectory-length sweeps (10^5 evaluations and more) cost a few
//! hundred flops per point instead of a quadrature pass each.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::quadrature::{integrate_even, QuadratureSpec};

/// Functionals accept |theta| up to this limit; integrands develop poles on
/// |theta| = 1 and values inside the margin are still fully resolvable.
pub const THETA_LIMIT: f64 = 1.0 - 1e-6;

/// Interpolation covers [-TABLE_RADIUS, TABLE_RADIUS]; outside (rare:
/// unmonitored excursions), evaluation falls back to direct quadrature.
pub const TABLE_RADIUS: f64 = 0.995;

/// Certified pointwise bounds 0 < m <= g_y <= M from a grid scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBounds {
    pub m: f64,
    pub big_m: f64,
}

/// The three shared-node W-integrals at one (theta, beta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// E[phi_t^2], the regressor second moment.
    pub phi2: f64,
    /// E[z_t phi_{t-1}], the cross moment.
    pub zphi: f64,
    /// Mean field f(theta, beta).
    pub f: f64,
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega.abs() <= PI) {
        return Err(Error::OmegaOutOfDomain { omega });
    }
    Ok(())
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta.abs() <= THETA_LIMIT) {
        return Err(Error::ThetaOutOfDomain {
            theta,
            limit: THETA_LIMIT,
        });
    }
    Ok(())
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && (0.0..=1.0).contains(&beta)) {
        return Err(Error::BetaOutOfDomain { beta });
    }
    Ok(())
}

/// Precompiled density evaluator; validity of the model is the caller's
/// responsibility (config loading and constructors validate once).
enum DensityEval {
    White {
        c: f64,
    },
    Arma {
        // Ascending polynomial coefficients; scale = sigma2 / 2 pi.
        ma: Vec<f64>,
        ar: Vec<f64>,
        c: f64,
    },
    Bloomfield {
        cepstral: Vec<f64>,
        c: f64,
    },
}

impl DensityEval {
    fn new(model: &SpectralModel) -> Self {
        let c = model.sigma2() / (2.0 * PI);
        match model {
            SpectralModel::WhiteNoise { .. } => DensityEval::White { c },
            SpectralModel::Arma { .. } => DensityEval::Arma {
                ma: model.ma_poly(),
                ar: model.ar_poly(),
                c,
            },
            SpectralModel::Bloomfield { cepstral, .. } => DensityEval::Bloomfield {
                cepstral: cepstral.clone(),
                c,
            },
        }
    }

    /// g_y at the frequency whose cosine/sine are given.
    fn eval(&self, cos_w: f64, sin_w: f64) -> f64 {
        match self {
            DensityEval::White { c } => *c,
            DensityEval::Arma { ma, ar, c } => {
                let num = norm_sqr_at(ma, cos_w, sin_w);
                let den = norm_sqr_at(ar, cos_w, sin_w);
                c * num / den
            }
            DensityEval::Bloomfield { cepstral, c } => {
                // cos(m w) by the Chebyshev recurrence on cos w.
                let mut sum = 0.0;
                let mut cos_prev = 1.0;
                let mut cos_cur = cos_w;
                for &coef in cepstral.iter() {
                    sum += coef * cos_cur;
                    let next = 2.0 * cos_w * cos_cur - cos_prev;
                    cos_prev = cos_cur;
                    cos_cur = next;
                }
                c * (2.0 * sum).exp()
            }
        }
    }
}

/// |p(e^{iw})|^2 for a real polynomial, via complex Horner.
fn norm_sqr_at(p: &[f64], cos_w: f64, sin_w: f64) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for &coef in p.iter().rev() {
        let nre = re * cos_w - im * sin_w + coef;
        let nim = re * sin_w + im * cos_w;
        re = nre;
        im = nim;
    }
    re * re + im * im
}

/// |1 + t e^{iw}|^2 as a sum of squares; no cancellation for |t| near 1.
#[inline]
fn one_plus_sq(t: f64, cos_w: f64, sin_w: f64) -> f64 {
    let re = 1.0 + t * cos_w;
    let im = t * sin_w;
    re * re + im * im
}

/// Spectral density g_y(omega). Symmetric in omega by construction.
pub fn density(model: &SpectralModel, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let (sin_w, cos_w) = omega.sin_cos();
    // Evenness exactly: |sin| enters only squared or through cos recurrences,
    // but make it explicit so density(w) == density(-w) bitwise.
    Ok(DensityEval::new(model).eval(cos_w, sin_w.abs()))
}

/// Autocovariance gamma_j = int cos(j w) g_y(w) dw.
pub fn autocovariance(model: &SpectralModel, lag: u32) -> Result<f64> {
    autocovariance_with(model, lag, &QuadratureSpec::default())
}

pub fn autocovariance_with(
    model: &SpectralModel,
    lag: u32,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let g = DensityEval::new(model);
    let j = lag as f64;
    let [v] = integrate_even(
        |w| {
            let (s, c) = w.sin_cos();
            [(j * w).cos() * g.eval(c, s)]
        },
        spec,
    )?;
    Ok(v)
}

/// One-step prediction-error loss L(theta).
pub fn loss(model: &SpectralModel, theta: f64) -> Result<f64> {
    loss_with(model, theta, &QuadratureSpec::default())
}

pub fn loss_with(model: &SpectralModel, theta: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_theta(theta)?;
    let g = DensityEval::new(model);
    let [v] = integrate_even(
        |w| {
            let (s, c) = w.sin_cos();
            [g.eval(c, s) / one_plus_sq(theta, c, s)]
        },
        spec,
    )?;
    Ok(v)
}

/// All three W-integrals on shared nodes; the identity
/// zphi = theta * phi2 - f then holds to accumulation rounding.
pub fn moments(model: &SpectralModel, theta: f64, beta: f64) -> Result<Moments> {
    moments_with(model, theta, beta, &QuadratureSpec::default())
}

pub fn moments_with(
    model: &SpectralModel,
    theta: f64,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<Moments> {
    check_theta(theta)?;
    check_beta(beta)?;
    let g = DensityEval::new(model);
    let bt = beta * theta;
    let f_shift = bt;
    let z_shift = (1.0 + beta) * theta;
    let [phi2, zphi, f] = integrate_even(
        |w| {
            let (s, c) = w.sin_cos();
            let weight = g.eval(c, s) / (one_plus_sq(theta, c, s) * one_plus_sq(bt, c, s));
            [
                weight,
                (c + z_shift) * weight,
                -(c + f_shift) * weight,
            ]
        },
        spec,
    )?;
    Ok(Moments { phi2, zphi, f })
}

/// Mean field f(theta, beta); zeros are the estimator's possible limits.
pub fn f_value(model: &SpectralModel, theta: f64, beta: f64) -> Result<f64> {
    f_value_with(model, theta, beta, &QuadratureSpec::default())
}

pub fn f_value_with(
    model: &SpectralModel,
    theta: f64,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(moments_with(model, theta, beta, spec)?.f)
}

/// Stationary regressor second moment E[phi_t(theta)^2].
pub fn phi_second_moment(model: &SpectralModel, theta: f64, beta: f64) -> Result<f64> {
    Ok(moments(model, theta, beta)?.phi2)
}

pub fn phi_second_moment_with(
    model: &SpectralModel,
    theta: f64,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(moments_with(model, theta, beta, spec)?.phi2)
}

/// Stationary cross moment E[z_t(theta) phi_{t-1}(theta)].
pub fn z_phi_cross_moment(model: &SpectralModel, theta: f64, beta: f64) -> Result<f64> {
    Ok(moments(model, theta, beta)?.zphi)
}

pub fn z_phi_cross_moment_with(
    model: &SpectralModel,
    theta: f64,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(moments_with(model, theta, beta, spec)?.zphi)
}

/// Loss derivative L'(theta) = 2 f(theta, 1).
pub fn loss_derivative(model: &SpectralModel, theta: f64) -> Result<f64> {
    Ok(2.0 * f_value(model, theta, 1.0)?)
}

pub fn loss_derivative_with(
    model: &SpectralModel,
    theta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(2.0 * f_value_with(model, theta, 1.0, spec)?)
}

/// Certified density bounds via a dense grid scan (8x the quadrature's
/// initial node count) with 1% slack on each side.
pub fn certified_density_bounds(
    model: &SpectralModel,
    spec: &QuadratureSpec,
) -> Result<DensityBounds> {
    spec.validate()?;
    let g = DensityEval::new(model);
    let n = 8 * spec.initial_nodes;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for k in 0..=n {
        let w = PI * k as f64 / n as f64;
        let (s, c) = w.sin_cos();
        let v = g.eval(c, s);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidModel {
            reason: format!("density scan produced bounds [{lo}, {hi}]"),
        });
    }
    Ok(DensityBounds {
        m: 0.99 * lo,
        big_m: 1.01 * hi,
    })
}

// ---------------------------------------------------------------------------
// Chebyshev interpolation of Phi and Z in theta at fixed beta
// ---------------------------------------------------------------------------

/// Chebyshev interpolants of Phi(theta) and Z(theta) at fixed beta over
/// [-TABLE_RADIUS, TABLE_RADIUS].
///
/// Phi and Z blow up like (1 - |theta|)^{-3} at the boundary, so they are
/// interpolated in the boundary-weighted form Phi * (1 - theta^2)^3, which
/// stays O(1) across the whole interval (for rational spectra the weight
/// cancels the boundary poles exactly). That keeps the expansion's rounding
/// noise at machine scale instead of eps * max|Phi|; build-time accuracy is
/// validated in the test suite against direct quadrature. Evaluations
/// return f derived as theta * Phi - Z, the same float every time a theta
/// repeats -- the decomposition identities downstream rely on that
/// determinism.
#[derive(Debug, Clone)]
pub struct MomentTable {
    beta: f64,
    model: SpectralModel,
    quad: QuadratureSpec,
    /// Chebyshev coefficients of (1-theta^2)^3 Phi at theta = TABLE_RADIUS x.
    phi_coeffs: Vec<f64>,
    /// Same for Z.
    z_coeffs: Vec<f64>,
}

/// Boundary weight (1 - theta^2)^3 shared by table build and evaluation.
#[inline]
fn boundary_weight(theta: f64) -> f64 {
    let u = 1.0 - theta * theta;
    u * u * u
}

/// Interpolation degree (nodes = DEGREE + 1 Chebyshev-Lobatto points).
const TABLE_DEGREE: usize = 512;

impl MomentTable {
    /// Sample Phi and Z at Chebyshev-Lobatto nodes and form the expansions.
    pub fn build(model: &SpectralModel, beta: f64, quad: &QuadratureSpec) -> Result<Self> {
        check_beta(beta)?;
        quad.validate()?;
        let n = TABLE_DEGREE;
        // Node quadrature can start coarse; doubling still certifies each
        // value to rel_tol. Mild thetas then converge after one doubling.
        let node_quad = QuadratureSpec {
            initial_nodes: 256,
            rel_tol: quad.rel_tol,
            max_doublings: 14,
        };
        let mut phi_vals = vec![0.0; n + 1];
        let mut z_vals = vec![0.0; n + 1];
        for k in 0..=n {
            let x = (PI * k as f64 / n as f64).cos();
            let theta = TABLE_RADIUS * x;
            let m = moments_with(model, theta, beta, &node_quad)?;
            let w = boundary_weight(theta);
            phi_vals[k] = w * m.phi2;
            z_vals[k] = w * m.zphi;
        }
        let phi_coeffs = lobatto_coefficients(&phi_vals);
        let z_coeffs = lobatto_coefficients(&z_vals);
        Ok(MomentTable {
            beta,
            model: model.clone(),
            quad: *quad,
            phi_coeffs: trim_coefficients(phi_coeffs),
            z_coeffs: trim_coefficients(z_coeffs),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    /// Phi, Z, and f = theta * Phi - Z at one theta. Inside the table
    /// radius this is two Clenshaw recurrences; outside it falls back to a
    /// direct quadrature pass (and still derives f the same way).
    pub fn eval(&self, theta: f64) -> Result<Moments> {
        check_theta(theta)?;
        let (phi2, zphi) = if theta.abs() <= TABLE_RADIUS {
            let x = theta / TABLE_RADIUS;
            let w = boundary_weight(theta);
            (
                clenshaw(&self.phi_coeffs, x) / w,
                clenshaw(&self.z_coeffs, x) / w,
            )
        } else {
            let m = moments_with(&self.model, theta, self.beta, &self.quad)?;
            (m.phi2, m.zphi)
        };
        Ok(Moments {
            phi2,
            zphi,
            f: theta * phi2 - zphi,
        })
    }
}

/// Chebyshev coefficients of the interpolant through Lobatto samples
/// v[k] = f(cos(pi k / N)), normalized so plain Clenshaw evaluates it.
fn lobatto_coefficients(v: &[f64]) -> Vec<f64> {
    let n = v.len() - 1;
    let mut coeffs = vec![0.0; n + 1];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.5 * (v[0] + if j % 2 == 0 { v[n] } else { -v[n] });
        for (k, &vk) in v.iter().enumerate().skip(1).take(n - 1) {
            acc += vk * (PI * (j * k) as f64 / n as f64).cos();
        }
        *c = 2.0 * acc / n as f64;
    }
    // Halve the endpoints of the '' sum so coeffs feed plain Clenshaw.
    coeffs[0] *= 0.5;
    coeffs[n] *= 0.5;
    coeffs
}

/// Drop trailing coefficients below rounding relevance (keeps >= 8).
fn trim_coefficients(mut c: Vec<f64>) -> Vec<f64> {
    let scale = c.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let cut = 1e-15 * scale;
    while c.len() > 8 && c.last().is_some_and(|x| x.abs() < cut) {
        c.pop();
    }
    c
}

/// Clenshaw evaluation of sum_j c_j T_j(x).
fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    let two_x = 2.0 * x;
    for &cj in c.iter().skip(1).rev() {
        let b0 = two_x * b1 - b2 + cj;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}
