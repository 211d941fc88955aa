//! Closed-form mean-field evaluation for rational spectra.
//!
//! For ARMA data the mean-field integral is a contour integral of a
//! rational function around the unit circle, so it equals minus the sum of
//! residues at the poles inside. Folding the cosine term by the omega ->
//! -omega symmetry yields a factor (z + bt) that cancels exactly against
//! the same factor from |1 + bt z|^{-2}, so with AR polynomial phi (degree
//! d_phi), MA polynomial eta (degree d_eta), and rev_p(z) = z^deg p(1/z),
//! the kernel is
//!
//! ```text
//!               sigma2 * z^{e_num} eta(z) rev_eta(z)
//! w(z) = ------------------------------------------------------
//!          z^{e_den} (1+tz)(1+bt z) (z+t) phi(z) rev_phi(z)
//! ```
//!
//! with t = theta, bt = beta*theta, e_num = max(0, 1 + d_phi - d_eta),
//! e_den = max(0, d_eta - d_phi - 1), and f(theta, beta) = -sum of residues
//! of w inside the unit circle. Interior poles: -t, the reciprocals of the
//! AR roots, and 0 when e_den > 0; the filter factors (1+tz)(1+bt z) keep
//! their zeros outside the closed disk. Performing the (z + bt)
//! cancellation in the algebra rather than leaving a removable factor
//! matters numerically: a nearly-removable pole evaluates as the
//! difference of two huge terms and loses eight digits near the boundary.
//!
//! Residues at order-J poles are computed by exact polynomial arithmetic:
//! the denominator is deflated by synthetic division at the known root, and
//! the (J-1)-th derivative of the remaining rational function is carried
//! symbolically via the quotient rule, never by numerical differentiation.
//! Orders above one arise only from merged coincidences (theta on a
//! reflected AR root, or theta = 0 with e_den > 0).
//!
//! Pole coincidence policy (locations are compared pairwise):
//! - -t and 0 are exact inputs: they merge only on exact float equality
//!   (theta = 0 with e_den > 0). A nonzero gap below 1e-6, as in
//!   theta = 1e-8 on such a model, is a genuine near-cancellation:
//!   evaluation falls back to quadrature and the result is flagged.
//! - AR-root reciprocals carry rounding of order 1e-16 (worse for clustered
//!   roots), so a reciprocal within 1e-9 of any other location is merged
//!   into it; gaps in (1e-9, 1e-6) fall back to quadrature.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::poly;
use crate::quadrature::QuadratureSpec;
use crate::spectral;

/// Locations closer than this are treated as one pole when a computed
/// (AR-reciprocal) location is involved.
pub const MERGE_TOL: f64 = 1e-9;

/// Below this separation (but above the merge band) residue cancellation
/// loses too much precision; evaluation falls back to quadrature.
pub const FALLBACK_TOL: f64 = 1e-6;

/// One pole of the kernel inside the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub location: Complex64,
    pub order: usize,
}

/// The kernel's interior poles, merged by the coincidence policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Pole>,
}

impl PoleSet {
    /// Sum of pole orders; bounded by 2 + d_phi + e_den.
    pub fn total_order(&self) -> usize {
        self.poles.iter().map(|p| p.order).sum()
    }
}

/// How a mean-field value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    /// Residue sum over the interior poles.
    Residue,
    /// Near-coincident poles forced a quadrature fallback.
    QuadratureFallback,
}

/// Mean-field value along with the evaluation route taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueEvaluation {
    pub value: f64,
    pub method: EvalMethod,
}

fn require_arma(model: &SpectralModel) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    match model {
        SpectralModel::Arma { .. } | SpectralModel::WhiteNoise { .. } => {
            Ok((trim(model.ar_poly()), trim(model.ma_poly()), model.sigma2()))
        }
        SpectralModel::Bloomfield { .. } => Err(Error::NotArma),
    }
}

/// Drop trailing exact zeros so polynomial degrees are mathematical degrees.
fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    p
}

fn check_domain(theta: f64, beta: f64) -> Result<()> {
    if !(theta.is_finite() && theta.abs() <= 1.0 - 1e-6) {
        return Err(Error::ThetaOutOfDomain {
            theta,
            limit: 1.0 - 1e-6,
        });
    }
    if !(beta.is_finite() && (0.0..=1.0).contains(&beta)) {
        return Err(Error::BetaOutOfDomain { beta });
    }
    Ok(())
}

/// Raw candidate locations before merging. `exact` marks locations that are
/// exact inputs (-t, -bt, 0) rather than computed AR reciprocals.
struct Candidate {
    location: Complex64,
    order: usize,
    exact: bool,
}

fn candidates(ar: &[f64], ma: &[f64], theta: f64) -> Result<(Vec<Candidate>, usize, usize)> {
    let d_phi = ar.len() - 1;
    let d_eta = ma.len() - 1;
    let e_num = (1 + d_phi as i64 - d_eta as i64).max(0) as usize;
    let e_den = (d_eta as i64 - d_phi as i64 - 1).max(0) as usize;

    let mut cand = vec![Candidate {
        location: Complex64::new(-theta, 0.0),
        order: 1,
        exact: true,
    }];
    if e_den > 0 {
        cand.push(Candidate {
            location: Complex64::new(0.0, 0.0),
            order: e_den,
            exact: true,
        });
    }
    for root in poly::roots(ar)? {
        let recip = root.inv();
        if recip.norm() >= 1.0 - MERGE_TOL {
            return Err(Error::DegeneratePoles {
                detail: format!("reflected AR root {recip} is not strictly inside the unit circle"),
            });
        }
        cand.push(Candidate {
            location: recip,
            order: 1,
            exact: false,
        });
    }
    Ok((cand, e_num, e_den))
}

/// Merge candidates into the final pole list, or report that evaluation
/// must fall back to quadrature (Ok(None)).
fn merge_candidates(cand: Vec<Candidate>) -> Result<Option<Vec<Pole>>> {
    // Greedy clustering: seed clusters with exact locations (equal exact
    // locations share a cluster), then attach reciprocals within MERGE_TOL.
    struct Cluster {
        location: Complex64,
        order: usize,
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for c in cand.iter().filter(|c| c.exact) {
        if let Some(cl) = clusters
            .iter_mut()
            .find(|cl| cl.location == c.location)
        {
            cl.order += c.order;
        } else {
            clusters.push(Cluster {
                location: c.location,
                order: c.order,
            });
        }
    }
    for c in cand.iter().filter(|c| !c.exact) {
        let mut best: Option<(usize, f64)> = None;
        for (i, cl) in clusters.iter().enumerate() {
            let d = (cl.location - c.location).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) if d <= MERGE_TOL => {
                // Keep the exact location when one is present: exact inputs
                // beat computed reciprocals.
                clusters[i].order += c.order;
            }
            _ => clusters.push(Cluster {
                location: c.location,
                order: c.order,
            }),
        }
    }
    // Pairwise separation check on the merged clusters.
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            let d = (clusters[i].location - clusters[j].location).norm();
            if d < FALLBACK_TOL {
                // Exact-exact pairs below the fallback threshold are the
                // theta = eps cases on models with an origin pole;
                // reciprocal-involved pairs landed here from the
                // (MERGE_TOL, FALLBACK_TOL) band.
                return Ok(None);
            }
        }
    }
    Ok(Some(
        clusters
            .into_iter()
            .map(|cl| Pole {
                location: cl.location,
                order: cl.order,
            })
            .collect(),
    ))
}

/// Interior poles of the kernel at (theta, beta), merged per the
/// coincidence policy. Near-coincident configurations that would force the
/// quadrature fallback are still reported here, merged at MERGE_TOL, so the
/// inventory always exists; only evaluation falls back.
pub fn enumerate_poles(model: &SpectralModel, theta: f64, beta: f64) -> Result<PoleSet> {
    check_domain(theta, beta)?;
    let (ar, ma, _) = require_arma(model)?;
    let (cand, _, _) = candidates(&ar, &ma, theta)?;
    match merge_candidates(cand)? {
        Some(poles) => Ok(PoleSet { poles }),
        None => {
            // Rebuild with unconditional merging at MERGE_TOL so the
            // returned set still satisfies the separation invariant.
            let (cand, _, _) = candidates(&ar, &ma, theta)?;
            let mut poles: Vec<Pole> = Vec::new();
            for c in cand {
                if let Some(p) = poles
                    .iter_mut()
                    .find(|p| (p.location - c.location).norm() <= MERGE_TOL)
                {
                    p.order += c.order;
                } else {
                    poles.push(Pole {
                        location: c.location,
                        order: c.order,
                    });
                }
            }
            Ok(PoleSet { poles })
        }
    }
}

/// Mean field via the residue sum; equals the quadrature value to
/// analytical accuracy and serves as its independent oracle.
pub fn f_residue(model: &SpectralModel, theta: f64, beta: f64) -> Result<f64> {
    Ok(f_residue_with(model, theta, beta, &QuadratureSpec::default())?.value)
}

/// As [`f_residue`], reporting whether the residue route was usable or the
/// near-coincidence fallback fired (`quad` configures the fallback).
pub fn f_residue_with(
    model: &SpectralModel,
    theta: f64,
    beta: f64,
    quad: &QuadratureSpec,
) -> Result<ResidueEvaluation> {
    check_domain(theta, beta)?;
    let (ar, ma, sigma2) = require_arma(model)?;
    let (cand, e_num, e_den) = candidates(&ar, &ma, theta)?;
    let poles = match merge_candidates(cand)? {
        Some(p) => p,
        None => {
            let value = spectral::f_value_with(model, theta, beta, quad)?;
            return Ok(ResidueEvaluation {
                value,
                method: EvalMethod::QuadratureFallback,
            });
        }
    };

    let bt = beta * theta;
    // Numerator: sigma2 * z^e_num * eta * rev_eta.
    let mut num = vec![Complex64::new(0.0, 0.0); e_num];
    num.push(Complex64::new(1.0, 0.0));
    let mut n_poly = poly::mul(&num, &poly::to_complex(&ma));
    n_poly = poly::mul(&n_poly, &poly::to_complex(&poly::reversed(&ma)));
    for c in n_poly.iter_mut() {
        *c *= sigma2;
    }
    // Denominator: z^e_den (1+tz)(1+bt z)(z+t) phi rev_phi.
    let mut den = vec![Complex64::new(0.0, 0.0); e_den];
    den.push(Complex64::new(1.0, 0.0));
    den = poly::mul(&den, &poly::to_complex(&[1.0, theta]));
    den = poly::mul(&den, &poly::to_complex(&[1.0, bt]));
    den = poly::mul(&den, &poly::to_complex(&[theta, 1.0]));
    den = poly::mul(&den, &poly::to_complex(&ar));
    den = poly::mul(&den, &poly::to_complex(&poly::reversed(&ar)));

    let mut sum = Complex64::new(0.0, 0.0);
    for pole in &poles {
        sum += residue_at(&n_poly, &den, pole.location, pole.order);
    }
    if sum.im.abs() >= 1e-10 {
        return Err(Error::ResidueNotReal { imag: sum.im });
    }
    Ok(ResidueEvaluation {
        value: -sum.re,
        method: EvalMethod::Residue,
    })
}

/// Residue of num/den at an order-J pole z0, where den vanishes at z0 to
/// order J by construction. Deflation uses the known root, so no root
/// refinement or numerical limits are involved.
fn residue_at(num: &[Complex64], den: &[Complex64], z0: Complex64, order: usize) -> Complex64 {
    let mut deflated = den.to_vec();
    for _ in 0..order {
        deflated = poly::deflate(&deflated, z0);
    }
    if order == 1 {
        return poly::eval(num, z0) / poly::eval(&deflated, z0);
    }
    // R = num/deflated; maintain R^(k) = p / deflated^(k+1) symbolically.
    let dd = poly::derivative(&deflated);
    let mut p = num.to_vec();
    for k in 1..order {
        let term1 = poly::mul(&poly::derivative(&p), &deflated);
        let term2 = poly::mul(&p, &dd);
        let m = k as f64;
        let len = term1.len().max(term2.len()).max(1);
        let zero = Complex64::new(0.0, 0.0);
        p = (0..len)
            .map(|i| {
                let a = term1.get(i).copied().unwrap_or(zero);
                let b = term2.get(i).copied().unwrap_or(zero);
                a - m * b
            })
            .collect();
    }
    let mut factorial = 1.0;
    for k in 2..order {
        factorial *= k as f64;
    }
    poly::eval(&p, z0) / (factorial * poly::eval(&deflated, z0).powu(order as u32))
}
