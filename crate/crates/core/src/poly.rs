//! Dense univariate polynomial arithmetic over f64 and Complex64.
//!
//! Coefficients are stored in ascending order: `p[k]` multiplies `z^k`.
//! Everything here is exact coefficient arithmetic (up to rounding); the
//! residue evaluator depends on that, so no approximation is performed
//! beyond IEEE rounding of individual operations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluate a real-coefficient polynomial at a complex point (Horner).
pub fn eval_real(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Evaluate a complex-coefficient polynomial at a complex point (Horner).
pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Product of two complex polynomials (full convolution).
pub fn mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Formal derivative of a complex polynomial.
pub fn derivative(p: &[Complex64]) -> Vec<Complex64> {
    if p.len() <= 1 {
        return Vec::new();
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Deflate `p` by a known root: returns q with p(z) = (z - r) q(z).
///
/// The remainder (which is p(r), ideally zero) is discarded; callers pass
/// roots that are exact by construction.
pub fn deflate(p: &[Complex64], r: Complex64) -> Vec<Complex64> {
    let n = p.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut q = vec![Complex64::new(0.0, 0.0); n - 1];
    let mut carry = p[n - 1];
    for k in (0..n - 1).rev() {
        q[k] = carry;
        carry = p[k] + r * carry;
    }
    q
}

/// Lift a real polynomial into complex coefficients.
pub fn to_complex(p: &[f64]) -> Vec<Complex64> {
    p.iter().map(|&c| Complex64::new(c, 0.0)).collect()
}

/// Reversed-coefficient polynomial z^d p(1/z) for a real p of degree d.
///
/// Trailing zero coefficients are significant: the degree is taken as
/// `p.len() - 1`, so callers should trim before reversing if they want the
/// mathematical degree.
pub fn reversed(p: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    out.reverse();
    out
}

/// All complex roots of a real polynomial with nonzero leading coefficient,
/// via companion-matrix eigenvalues followed by one Newton polish step.
///
/// `coeffs` must have length >= 1; a constant polynomial has no roots.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let trimmed = trim_leading_zeros(coeffs);
    let n = trimmed.len();
    if n <= 1 {
        return Ok(Vec::new());
    }
    let deg = n - 1;
    let lead = trimmed[deg];
    if lead == 0.0 {
        return Err(Error::RootFinding {
            reason: "zero leading coefficient after trim".to_string(),
        });
    }
    if deg == 1 {
        return Ok(vec![Complex64::new(-trimmed[0] / trimmed[1], 0.0)]);
    }
    // Companion matrix of the monic polynomial, last column holds the
    // negated normalized coefficients.
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -trimmed[i] / lead;
    }
    let eig = m.complex_eigenvalues();
    let poly = to_complex(&trimmed);
    let dpoly = derivative(&poly);
    let mut out: Vec<Complex64> = Vec::with_capacity(deg);
    for &lambda in eig.iter() {
        let mut z = lambda;
        // One Newton step; skip when the derivative is tiny (multiple root),
        // where the eigenvalue itself is the best available estimate.
        let dp = eval(&dpoly, z);
        if dp.norm() > 1e-12 {
            let p = eval(&poly, z);
            let step = p / dp;
            if step.norm() < 0.5 * (1.0 + z.norm()) {
                z -= step;
            }
        }
        out.push(z);
    }
    // Deterministic order: by real part, then imaginary part.
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(out)
}

fn trim_leading_zeros(coeffs: &[f64]) -> Vec<f64> {
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1] == 0.0 {
        end -= 1;
    }
    coeffs[..end].to_vec()
}
