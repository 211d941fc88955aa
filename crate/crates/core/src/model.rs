//! Data-generating process descriptions and their linear representations.
//!
//! A model fixes the spectral density g_y of the observed series. Three
//! families are supported:
//!
//! ```text
//!   Arma        g_y(w) = (s2/2pi) |eta(e^iw)|^2 / |phi(e^iw)|^2
//!   Bloomfield  g_y(w) = (s2/2pi) exp(2 sum_m c_m cos(m w))
//!   WhiteNoise  g_y(w) = s2/2pi
//! ```
//!
//! with AR polynomial phi(z) = 1 - a_1 z - ... - a_p z^p and MA polynomial
//! eta(z) = 1 + b_1 z + ... + b_q z^q. Validity requires all roots of phi
//! and eta strictly outside the closed unit disk, so the process is causal
//! and invertible and g_y is bounded away from 0 and infinity.
//!
//! Every model also carries a one-sided linear representation
//! y_t = sum_j kappa_j eps_{t-j} with kappa_0 = 1; `kappa` computes the
//! coefficients with a certified tail bound, used by the simulator and the
//! kernel-coefficient diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Margin by which AR/MA roots must clear the unit circle, and the
/// tolerance for declaring a shared root.
const ROOT_TOL: f64 = 1e-9;

/// Spectral description of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralModel {
    /// Causal invertible ARMA(p, q) driven by variance-`sigma2` innovations.
    Arma {
        /// AR coefficients a_1..a_p in phi(z) = 1 - a_1 z - ... - a_p z^p.
        #[serde(default)]
        ar: Vec<f64>,
        /// MA coefficients b_1..b_q in eta(z) = 1 + b_1 z + ... + b_q z^q.
        #[serde(default)]
        ma: Vec<f64>,
        sigma2: f64,
    },
    /// Exponential-spectrum model with cepstral coefficients c_1..c_m.
    Bloomfield { cepstral: Vec<f64>, sigma2: f64 },
    /// Flat spectrum.
    WhiteNoise { sigma2: f64 },
}

impl SpectralModel {
    /// Innovation variance of the linear representation.
    pub fn sigma2(&self) -> f64 {
        match self {
            SpectralModel::Arma { sigma2, .. }
            | SpectralModel::Bloomfield { sigma2, .. }
            | SpectralModel::WhiteNoise { sigma2 } => *sigma2,
        }
    }

    /// AR polynomial coefficients [1, -a_1, ..., -a_p], ascending.
    pub fn ar_poly(&self) -> Vec<f64> {
        match self {
            SpectralModel::Arma { ar, .. } => {
                let mut p = Vec::with_capacity(ar.len() + 1);
                p.push(1.0);
                p.extend(ar.iter().map(|a| -a));
                p
            }
            _ => vec![1.0],
        }
    }

    /// MA polynomial coefficients [1, b_1, ..., b_q], ascending.
    pub fn ma_poly(&self) -> Vec<f64> {
        match self {
            SpectralModel::Arma { ma, .. } => {
                let mut p = Vec::with_capacity(ma.len() + 1);
                p.push(1.0);
                p.extend_from_slice(ma);
                p
            }
            _ => vec![1.0],
        }
    }

    /// True when the spectrum is rational (including the white-noise case
    /// expressed as an empty ARMA).
    pub fn is_rational(&self) -> bool {
        !matches!(self, SpectralModel::Bloomfield { .. })
    }

    /// Check all structural invariants; every public operation assumes a
    /// validated model.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2() > 0.0) || !self.sigma2().is_finite() {
            return Err(Error::InvalidModel {
                reason: format!("sigma2 = {} must be finite and > 0", self.sigma2()),
            });
        }
        match self {
            SpectralModel::WhiteNoise { .. } => Ok(()),
            SpectralModel::Bloomfield { cepstral, .. } => {
                if cepstral.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidModel {
                        reason: "non-finite cepstral coefficient".to_string(),
                    });
                }
                if cepstral.len() > 64 {
                    return Err(Error::InvalidModel {
                        reason: format!("cepstral order {} exceeds 64", cepstral.len()),
                    });
                }
                Ok(())
            }
            SpectralModel::Arma { ar, ma, .. } => {
                if ar.iter().chain(ma.iter()).any(|c| !c.is_finite()) {
                    return Err(Error::InvalidModel {
                        reason: "non-finite ARMA coefficient".to_string(),
                    });
                }
                if ar.len() > 16 || ma.len() > 16 {
                    return Err(Error::InvalidModel {
                        reason: "AR/MA order exceeds 16".to_string(),
                    });
                }
                let ar_roots = poly::roots(&self.ar_poly())?;
                let ma_roots = poly::roots(&self.ma_poly())?;
                for (name, roots) in [("AR", &ar_roots), ("MA", &ma_roots)] {
                    for r in roots.iter() {
                        if r.norm() <= 1.0 + ROOT_TOL {
                            return Err(Error::InvalidModel {
                                reason: format!(
                                    "{name} root {r} has modulus {:.12} <= 1 + 1e-9",
                                    r.norm()
                                ),
                            });
                        }
                    }
                }
                for ra in &ar_roots {
                    for rm in &ma_roots {
                        if (ra - rm).norm() <= ROOT_TOL {
                            return Err(Error::InvalidModel {
                                reason: format!("AR and MA share the root {ra}"),
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Roots of the AR polynomial (empty when there is no AR part).
    pub fn ar_roots(&self) -> Result<Vec<Complex64>> {
        poly::roots(&self.ar_poly())
    }

    /// One-sided representation coefficients kappa_0..kappa_J with
    /// kappa_0 = 1, truncated so the certified tail bound on
    /// sum_{j>J} |kappa_j| is below `tail_tol`.
    ///
    /// Returns the coefficients and the tail bound actually certified.
    pub fn kappa(&self, tail_tol: f64) -> Result<(Vec<f64>, f64)> {
        const J_MAX: usize = 4096;
        match self {
            SpectralModel::WhiteNoise { .. } => Ok((vec![1.0], 0.0)),
            SpectralModel::Arma { ar, ma, .. } => {
                if ar.is_empty() {
                    // Pure MA: the representation is exact and finite.
                    let mut k = vec![1.0];
                    k.extend_from_slice(ma);
                    return Ok((k, 0.0));
                }
                let mut k: Vec<f64> = vec![1.0];
                let mut tail;
                loop {
                    let n = k.len();
                    if n > J_MAX {
                        return Err(Error::KernelTruncation {
                            tail: f64::INFINITY,
                            limit: tail_tol,
                        });
                    }
                    let b_n = if n <= ma.len() { ma[n - 1] } else { 0.0 };
                    let mut v = b_n;
                    for (i, &a) in ar.iter().enumerate() {
                        if i + 1 > n {
                            break;
                        }
                        v += a * k[n - (i + 1)];
                    }
                    k.push(v);
                    // Geometric tail certificate: past the MA order the
                    // sequence satisfies the homogeneous AR recursion, so
                    // |kappa_{J+m}| <= C rho^m with rho < 1 once the last
                    // few ratios stabilize below 1.
                    if n > ma.len() + ar.len() + 8 {
                        let m = k.len();
                        let window = &k[m - 4..];
                        let mag: Vec<f64> = window.iter().map(|x| x.abs()).collect();
                        let peak = mag.iter().cloned().fold(0.0, f64::max);
                        if peak == 0.0 {
                            tail = 0.0;
                            break;
                        }
                        let mut rho: f64 = 0.0;
                        for w in 1..mag.len() {
                            if mag[w - 1] > 0.0 {
                                rho = rho.max(mag[w] / mag[w - 1]);
                            }
                        }
                        if rho < 0.999 {
                            tail = peak * rho / (1.0 - rho);
                            if tail < tail_tol {
                                break;
                            }
                        }
                    }
                }
                Ok((k, tail))
            }
            SpectralModel::Bloomfield { cepstral, .. } => {
                // kappa(z) = exp(sum c_m z^m): differentiate to get
                // n kappa_n = sum_m m c_m kappa_{n-m}.
                let mut k: Vec<f64> = vec![1.0];
                loop {
                    let n = k.len();
                    if n > J_MAX {
                        return Err(Error::KernelTruncation {
                            tail: f64::INFINITY,
                            limit: tail_tol,
                        });
                    }
                    let mut v = 0.0;
                    for (m, &c) in cepstral.iter().enumerate() {
                        let m1 = m + 1;
                        if m1 > n {
                            break;
                        }
                        v += (m1 as f64) * c * k[n - m1];
                    }
                    k.push(v / n as f64);
                    if n > cepstral.len() + 4 {
                        // Entire-function coefficients decay faster than any
                        // geometric rate; certify with ratio 1/2 once the
                        // observed ratios drop below 1/4.
                        let m = k.len();
                        let last = k[m - 1].abs();
                        let prev = k[m - 2].abs();
                        if last == 0.0 && prev == 0.0 {
                            return Ok((k, 0.0));
                        }
                        if prev > 0.0 && last / prev < 0.25 {
                            let tail = last; // sum of last * (1/2)^m over m >= 1
                            if tail < tail_tol {
                                return Ok((k, tail));
                            }
                        }
                    }
                }
            }
        }
    }

    /// Total absolute coefficient mass sum_j |kappa_j| plus its tail bound;
    /// used to bound |y_t| by (innovation bound) * kappa_l1.
    pub fn kappa_l1(&self, tail_tol: f64) -> Result<f64> {
        let (k, tail) = self.kappa(tail_tol)?;
        Ok(k.iter().map(|x| x.abs()).sum::<f64>() + tail)
    }
}
