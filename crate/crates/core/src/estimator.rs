//! The beta-indexed recursive MA(1) estimator and its diagnostic
//! decompositions.
//!
//! One scalar recursion covers the whole family: at beta = 0 it is the
//! pseudolinear-regression update, at beta = 1 the recursive ML form, and
//! in between a continuous mixture. Per step, with t = prev.t + 1:
//!
//! ```text
//! P_t     = P_{t-1} + (phi_{t-1}^2 - P_{t-1}) / t
//! e_t     = y_t - theta_{t-1} e_{t-1}
//! theta_t = theta_{t-1} + phi_{t-1} e_t / (t P_t)
//! x_t     = y_t - beta theta_{t-1} x_{t-1}
//! phi_t   = x_t - theta_{t-1} phi_{t-1}
//! z_t     = e_t + theta_{t-1} phi_{t-1}
//! ```
//!
//! initialized at t = 1 by theta = P = 0 and e = phi = x = y_1. Every
//! right-hand side uses theta_{t-1}, never theta_t. The endpoint
//! specializations are exact, not approximate: at beta = 1 the x and e
//! recursions share one expression tree and stay bit-identical; at beta = 0
//! the code branches to x_t := y_t and z_t := y_t because the algebraic
//! cancellations behind those identities do not survive IEEE rounding when
//! evaluated through the general expressions.
//!
//! Optional monitoring clips theta_t back to [-cap, cap] and records the
//! event; the ML-leaning members of the family can escape (-1, 1) early on
//! and the clip is the boundedness surrogate under which the averaged
//! diagnostics below are defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::quadrature::QuadratureSpec;
use crate::spectral::{DensityBounds, MomentTable};

/// Full estimator state after processing observation t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionState {
    pub t: usize,
    pub theta: f64,
    pub p_bar: f64,
    pub e: f64,
    pub phi: f64,
    pub x: f64,
}

impl RecursionState {
    /// State at t = 1. The first observation seeds e, phi, and x; it must
    /// be nonzero or the t = 2 gain is undefined.
    pub fn init(y1: f64) -> Result<Self> {
        if y1 == 0.0 {
            return Err(Error::ZeroFirstSample);
        }
        Ok(RecursionState {
            t: 1,
            theta: 0.0,
            p_bar: 0.0,
            e: y1,
            phi: y1,
            x: y1,
        })
    }
}

/// Boundedness monitoring: clip theta_t to [-k_star_cap, k_star_cap].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub enabled: bool,
    pub k_star_cap: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            enabled: true,
            k_star_cap: 0.99,
        }
    }
}

impl MonitorConfig {
    /// Monitoring disabled.
    pub fn off() -> Self {
        MonitorConfig {
            enabled: false,
            k_star_cap: 0.99,
        }
    }

    /// Monitoring on for beta > 0, off for beta = 0: the regression-form
    /// member is self-stabilizing, the ML-leaning members are not.
    pub fn default_for_beta(beta: f64) -> Self {
        MonitorConfig {
            enabled: beta > 0.0,
            k_star_cap: 0.99,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_star_cap.is_finite() && 0.0 < self.k_star_cap && self.k_star_cap < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                reason: format!("k_star_cap must lie in (0, 1), got {}", self.k_star_cap),
            })
        }
    }
}

/// Output of one estimator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: RecursionState,
    /// z_t = e_t + theta_{t-1} phi_{t-1}.
    pub z: f64,
    pub clipped: bool,
}

/// Advance the recursion by one observation.
pub fn step(
    prev: &RecursionState,
    y_t: f64,
    beta: f64,
    monitor: &MonitorConfig,
) -> Result<StepResult> {
    if !(beta.is_finite() && (0.0..=1.0).contains(&beta)) {
        return Err(Error::BetaOutOfDomain { beta });
    }
    monitor.validate()?;
    let t = prev.t + 1;
    let tf = t as f64;
    let p_bar = prev.p_bar + (prev.phi * prev.phi - prev.p_bar) / tf;
    if p_bar == 0.0 {
        return Err(Error::GainDenominatorZero { t });
    }
    let e = y_t - prev.theta * prev.e;
    let mut theta = prev.theta + (prev.phi * e) / (tf * p_bar);
    let mut clipped = false;
    if monitor.enabled && theta.abs() > monitor.k_star_cap {
        theta = monitor.k_star_cap.copysign(theta);
        clipped = true;
    }
    // beta = 0 collapses x to the data and z to the data exactly; computing
    // them through the general expressions would leave rounding residue
    // (fl((y - a) + a) != y), so the specialization is a branch, not a
    // simplification. beta = 1 needs no branch: 1.0 * theta == theta and
    // the x recursion becomes the e recursion verbatim.
    let (x, z) = if beta == 0.0 {
        (y_t, y_t)
    } else {
        (
            y_t - beta * prev.theta * prev.x,
            e + prev.theta * prev.phi,
        )
    };
    let phi = x - prev.theta * prev.phi;
    Ok(StepResult {
        state: RecursionState {
            t,
            theta,
            p_bar,
            e,
            phi,
            x,
        },
        z,
        clipped,
    })
}

/// A completed estimator run over one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub beta: f64,
    pub monitor: MonitorConfig,
    /// states[i] holds time t = i + 1.
    pub states: Vec<RecursionState>,
    /// z_t aligned with states; z_1 = e_1.
    pub z: Vec<f64>,
    /// Time indices t at which theta_t was clipped.
    pub clip_events: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.theta).collect()
    }

    pub fn final_theta(&self) -> f64 {
        self.states.last().map(|s| s.theta).unwrap_or(0.0)
    }

    /// Empirical settling index: the last clip time, or 0 when the run was
    /// never clipped. Shifting the theta series by this index yields a
    /// tail on which the recursion ran unconstrained.
    pub fn k_star(&self) -> usize {
        self.clip_events.last().copied().unwrap_or(0)
    }
}

/// Fold [`step`] over a path, recording states, z, and clip events.
pub fn run(y: &[f64], beta: f64, monitor: &MonitorConfig) -> Result<Trajectory> {
    if y.len() < 2 {
        return Err(Error::PathTooShort {
            len: y.len(),
            min: 2,
        });
    }
    let mut states = Vec::with_capacity(y.len());
    let mut z = Vec::with_capacity(y.len());
    let mut clip_events = Vec::new();
    let mut state = RecursionState::init(y[0])?;
    states.push(state);
    z.push(y[0]);
    for (i, &y_t) in y.iter().enumerate().skip(1) {
        let out = step(&state, y_t, beta, monitor)?;
        state = out.state;
        states.push(state);
        z.push(out.z);
        if out.clipped {
            clip_events.push(i + 1);
        }
    }
    Ok(Trajectory {
        beta,
        monitor: *monitor,
        states,
        z,
        clip_events,
    })
}

/// Replay the estimate as an explicit least-squares ratio,
///
/// ```text
/// theta_t = (sum_{s=2..t} phi_{s-1}^2)^{-1} sum_{s=2..t} z_s phi_{s-1},
/// ```
///
/// accumulated independently from the stored phi and z series. Agrees with
/// the recursive theta_t to rounding on unclipped runs; entry 0 (t = 1) is
/// the initial value 0.
pub fn regression_form(traj: &Trajectory) -> Result<Vec<f64>> {
    if !traj.clip_events.is_empty() {
        return Err(Error::ClippedTrajectory {
            count: traj.clip_events.len(),
        });
    }
    let mut out = Vec::with_capacity(traj.len());
    out.push(0.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..traj.len() {
        let phi_prev = traj.states[i - 1].phi;
        num += traj.z[i] * phi_prev;
        den += phi_prev * phi_prev;
        if den == 0.0 {
            return Err(Error::GainDenominatorZero { t: i + 1 });
        }
        out.push(num / den);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Kernel coefficient tables
// ---------------------------------------------------------------------------

/// Per-time expansions of the filter series over the data's innovations:
/// series_t = sum_j coeff[t-1][j] eps_{t-j} up to the truncation tail.
#[derive(Debug, Clone)]
pub struct KernelTables {
    pub j_max: usize,
    /// kappa_j of the data's linear representation, padded/truncated to
    /// j_max + 1 entries.
    pub kappa: Vec<f64>,
    /// Certified bound on sum_{j > j_max} |kappa_j|.
    pub kappa_tail: f64,
    pub e: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

/// Truncation tails for reconstructing each filter series from its kernel
/// table, at a given uniform bound on |theta_s|.
#[derive(Debug, Clone, Copy)]
pub struct KernelTailBounds {
    pub e: f64,
    pub x: f64,
    pub phi: f64,
    pub z: f64,
}

impl KernelTables {
    /// Rigorous tails of the kernel expansions beyond j_max, assuming
    /// |theta_s| <= theta_cap along the trajectory. The e and x kernels
    /// are dominated by one geometric convolution of |kappa|, phi by two,
    /// and z by e plus a shifted phi.
    pub fn tail_bounds(&self, theta_cap: f64) -> KernelTailBounds {
        let c = theta_cap.abs();
        let m: Vec<f64> = self.kappa.iter().map(|k| k.abs()).collect();
        let e = geometric_conv_tail(&m, self.kappa_tail, c, self.j_max);
        // One more convolution for phi: tail of (m * geom) * geom needs the
        // explicit prefix of m * geom plus its own tail.
        let mg = geometric_conv_prefix(&m, c, self.j_max);
        let phi = geometric_conv_tail(&mg, e, c, self.j_max);
        let z = if self.j_max == 0 {
            e + c * (mg.iter().sum::<f64>() + e)
        } else {
            e + c * geometric_conv_tail(&mg, e, c, self.j_max - 1)
        };
        KernelTailBounds { e, x: e, phi, z }
    }
}

/// sum_{j > j_cut} (m * geom_c)_j where (m * geom_c)_j = sum_l m_{j-l} c^l
/// and `m_tail` bounds the mass of m beyond its stored prefix.
fn geometric_conv_tail(m: &[f64], m_tail: f64, c: f64, j_cut: usize) -> f64 {
    let geo = 1.0 / (1.0 - c);
    let mut s = 0.0;
    for (i, &mi) in m.iter().enumerate() {
        let gap = j_cut + 1 - i.min(j_cut + 1);
        s += mi * c.powi(gap as i32);
    }
    (s + m_tail) * geo
}

/// Prefix of m * geom_c up to index j_cut.
fn geometric_conv_prefix(m: &[f64], c: f64, j_cut: usize) -> Vec<f64> {
    let mut out = vec![0.0; j_cut + 1];
    for j in 0..=j_cut {
        let mut s = 0.0;
        let mut w = 1.0;
        for l in 0..=j {
            if j - l < m.len() {
                s += m[j - l] * w;
            }
            w *= c;
        }
        out[j] = s;
    }
    out
}

/// Exact coefficient recursions for the innovation expansions of e, x,
/// phi, and z along a trajectory:
///
/// ```text
/// ke_j(t)   = kappa_j - theta_{t-1} ke_{j-1}(t-1)
/// kx_j(t)   = kappa_j - beta theta_{t-1} kx_{j-1}(t-1)
/// kphi_j(t) = kx_j(t) - theta_{t-1} kphi_{j-1}(t-1)
/// kz_j(t)   = ke_j(t) + theta_{t-1} kphi_{j-1}(t-1)
/// ```
///
/// with row t = 1 equal to kappa for all four tables and j = -1 entries
/// zero. Unrolling the recursions gives the signed product expansions
/// ke_j(t) = sum_l (-1)^l kappa_{j-l} theta_{t-1} ... theta_{t-l} (and the
/// (-beta)^l analogue for x), which the tests verify independently.
pub fn kernel_coefficients(
    traj: &Trajectory,
    model: &SpectralModel,
    j_max: usize,
) -> Result<KernelTables> {
    const KAPPA_LIMIT: f64 = 1e-10;
    let (raw, raw_tail) = model.kappa(KAPPA_LIMIT)?;
    // Tail beyond j_max must be certified small; fold truncated prefix
    // mass into the tail if the model's expansion is longer than j_max.
    let mut kappa_tail = raw_tail;
    for k in raw.iter().skip(j_max + 1) {
        kappa_tail += k.abs();
    }
    if kappa_tail > KAPPA_LIMIT {
        return Err(Error::KernelTruncation {
            tail: kappa_tail,
            limit: KAPPA_LIMIT,
        });
    }
    let mut kappa = raw;
    kappa.resize(j_max + 1, 0.0);

    let t_len = traj.len();
    let beta = traj.beta;
    let mut e = Vec::with_capacity(t_len);
    let mut x = Vec::with_capacity(t_len);
    let mut phi = Vec::with_capacity(t_len);
    let mut z = Vec::with_capacity(t_len);
    e.push(kappa.clone());
    x.push(kappa.clone());
    phi.push(kappa.clone());
    z.push(kappa.clone());
    for i in 1..t_len {
        let th = traj.states[i - 1].theta;
        let bth = beta * th;
        let (pe, px, pphi) = (&e[i - 1], &x[i - 1], &phi[i - 1]);
        let mut re = Vec::with_capacity(j_max + 1);
        let mut rx = Vec::with_capacity(j_max + 1);
        let mut rphi = Vec::with_capacity(j_max + 1);
        let mut rz = Vec::with_capacity(j_max + 1);
        for j in 0..=j_max {
            let (pe_jm1, px_jm1, pphi_jm1) = if j == 0 {
                (0.0, 0.0, 0.0)
            } else {
                (pe[j - 1], px[j - 1], pphi[j - 1])
            };
            let ke = kappa[j] - th * pe_jm1;
            let kx = kappa[j] - bth * px_jm1;
            let kphi = kx - th * pphi_jm1;
            let kz = ke + th * pphi_jm1;
            re.push(ke);
            rx.push(kx);
            rphi.push(kphi);
            rz.push(kz);
        }
        e.push(re);
        x.push(rx);
        phi.push(rphi);
        z.push(rz);
    }
    Ok(KernelTables {
        j_max,
        kappa,
        kappa_tail,
        e,
        x,
        phi,
        z,
    })
}

// ---------------------------------------------------------------------------
// Averaged diagnostics
// ---------------------------------------------------------------------------

/// The deterministic companion sequence
///
/// ```text
/// theta_hat_t = [sum_{s<=t} Phi(theta_{s+k})]^{-1} sum_{s<=t} Z(theta_{s+k})
/// ```
///
/// where Phi and Z are the spectral regressor moments at the trajectory's
/// own iterates, shifted by the settling index `k_star`. Output length is
/// `thetas.len() - k_star`.
pub fn approximating_sequence(
    thetas: &[f64],
    k_star: usize,
    model: &SpectralModel,
    beta: f64,
) -> Result<Vec<f64>> {
    let table = MomentTable::build(model, beta, &QuadratureSpec::default())?;
    approximating_sequence_with(thetas, k_star, &table)
}

/// As [`approximating_sequence`], reusing a prebuilt moment table (the
/// table is replication-independent, so batch runs share one).
pub fn approximating_sequence_with(
    thetas: &[f64],
    k_star: usize,
    table: &MomentTable,
) -> Result<Vec<f64>> {
    let n = shifted_len(thetas, k_star)?;
    let mut out = Vec::with_capacity(n);
    let mut sum_phi = 0.0;
    let mut sum_z = 0.0;
    for s in 1..=n {
        let m = table.eval(thetas[s + k_star - 1])?;
        sum_phi += m.phi2;
        sum_z += m.zphi;
        out.push(sum_z / sum_phi);
    }
    Ok(out)
}

/// Step sizes, bias terms, and the averaged sequence they rebuild.
#[derive(Debug, Clone)]
pub struct RmDecomposition {
    /// delta_t = 1 / sum_{s<=t} Phi(theta_{s+k}).
    pub delta: Vec<f64>,
    /// gamma_t for t >= 2 (entry 0 is 0 by convention).
    pub gamma: Vec<f64>,
    /// theta_hat_t, identical to [`approximating_sequence`].
    pub theta_hat: Vec<f64>,
}

/// Decompose the averaged sequence as a root-finding iteration on the mean
/// field: theta_hat_t = theta_hat_{t-1} - delta_t f(theta_hat_{t-1}) +
/// delta_t gamma_t, with
///
/// ```text
/// gamma_t = [f(theta_hat_{t-1}) - f(theta_{t+k})]
///           + (theta_{t+k} - theta_hat_{t-1}) Phi(theta_{t+k}).
/// ```
///
/// The identity is algebraic (it reduces to f = theta Phi - Z at the
/// shifted iterate), so the reconstruction is verified at every step to
/// 1e-10 and a violation is reported as an implementation bug.
pub fn rm_decomposition(
    thetas: &[f64],
    k_star: usize,
    model: &SpectralModel,
    beta: f64,
) -> Result<RmDecomposition> {
    let table = MomentTable::build(model, beta, &QuadratureSpec::default())?;
    rm_decomposition_with(thetas, k_star, &table)
}

/// As [`rm_decomposition`] with a shared moment table.
pub fn rm_decomposition_with(
    thetas: &[f64],
    k_star: usize,
    table: &MomentTable,
) -> Result<RmDecomposition> {
    let n = shifted_len(thetas, k_star)?;
    let mut delta = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    let mut theta_hat = Vec::with_capacity(n);
    let mut sum_phi = 0.0;
    let mut sum_z = 0.0;
    for s in 1..=n {
        let shifted = thetas[s + k_star - 1];
        let m = table.eval(shifted)?;
        sum_phi += m.phi2;
        sum_z += m.zphi;
        let d = 1.0 / sum_phi;
        let hat = sum_z / sum_phi;
        if s == 1 {
            gamma.push(0.0);
        } else {
            let prev_hat = theta_hat[s - 2];
            let f_prev = table.eval(prev_hat)?.f;
            let g = (f_prev - m.f) + (shifted - prev_hat) * m.phi2;
            let rebuilt = prev_hat - d * f_prev + d * g;
            let err = (hat - rebuilt).abs();
            if err > 1e-10 {
                return Err(Error::ReconstructionMismatch { t: s, error: err });
            }
            gamma.push(g);
        }
        delta.push(d);
        theta_hat.push(hat);
    }
    Ok(RmDecomposition {
        delta,
        gamma,
        theta_hat,
    })
}

fn shifted_len(thetas: &[f64], k_star: usize) -> Result<usize> {
    if thetas.len() <= k_star {
        return Err(Error::PathTooShort {
            len: thetas.len(),
            min: k_star + 1,
        });
    }
    Ok(thetas.len() - k_star)
}

/// Deterministic bracket for t * delta_t implied by two-sided density
/// bounds m <= g <= M and the iterate bound |theta| <= cap: the regressor
/// moment obeys 2 pi m / (1 + cap)^4 <= Phi <= 2 pi M / (1 - cap)^4, so
/// t * delta_t, the reciprocal of the running Phi average, lies between
/// the reciprocals of those bounds.
pub fn step_size_bracket(bounds: &DensityBounds, cap: f64) -> (f64, f64) {
    let tau = std::f64::consts::TAU;
    let phi_lo = tau * bounds.m / (1.0 + cap).powi(4);
    let phi_hi = tau * bounds.big_m / (1.0 - cap).powi(4);
    (1.0 / phi_hi, 1.0 / phi_lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, InnovationLaw, InnovationSpec};
    use crate::spectral;

    fn ma1(b: f64) -> SpectralModel {
        SpectralModel::Arma {
            ar: vec![],
            ma: vec![b],
            sigma2: 1.0,
        }
    }

    fn ar1(a: f64) -> SpectralModel {
        SpectralModel::Arma {
            ar: vec![a],
            ma: vec![],
            sigma2: 1.0,
        }
    }

    fn unit_uniform(seed: u64) -> InnovationSpec {
        InnovationSpec {
            law: InnovationLaw::Uniform {
                half_width: 3.0_f64.sqrt(),
            },
            seed,
        }
    }

    fn sample_y(model: &SpectralModel, seed: u64, t_len: usize) -> Vec<f64> {
        simulate(model, &unit_uniform(seed), t_len, 200).unwrap().y
    }

    #[test]
    fn hand_worked_second_step() {
        for beta in [0.0, 0.5, 1.0] {
            let traj = run(&[1.0, 0.5], beta, &MonitorConfig::off()).unwrap();
            let s2 = traj.states[1];
            assert_eq!(s2.t, 2);
            assert_eq!(s2.p_bar, 0.5);
            assert_eq!(s2.e, 0.5);
            assert_eq!(s2.theta, 0.5);
            assert_eq!(traj.z[1], 0.5);
        }
    }

    #[test]
    fn zero_second_observation_leaves_theta_at_zero() {
        let traj = run(&[1.0, 0.0], 0.7, &MonitorConfig::off()).unwrap();
        assert_eq!(traj.states[1].theta, 0.0);
    }

    #[test]
    fn first_sample_zero_is_rejected() {
        assert!(matches!(
            run(&[0.0, 1.0], 0.5, &MonitorConfig::off()),
            Err(Error::ZeroFirstSample)
        ));
    }

    #[test]
    fn beta_zero_specializations_are_exact() {
        let y = sample_y(&ar1(0.5), 2, 3_000);
        let traj = run(&y, 0.0, &MonitorConfig::off()).unwrap();
        for (i, s) in traj.states.iter().enumerate() {
            assert_eq!(s.phi.to_bits(), s.e.to_bits(), "phi != e at t {}", i + 1);
            assert_eq!(s.x.to_bits(), y[i].to_bits());
            assert_eq!(traj.z[i].to_bits(), y[i].to_bits());
        }
    }

    #[test]
    fn beta_one_x_equals_e_exactly() {
        let y = sample_y(&ma1(0.5), 3, 3_000);
        let traj = run(&y, 1.0, &MonitorConfig::default()).unwrap();
        for s in &traj.states {
            assert_eq!(s.x.to_bits(), s.e.to_bits(), "x != e at t {}", s.t);
        }
    }

    #[test]
    fn recursion_matches_regression_replay() {
        for beta in [0.0, 0.5, 1.0] {
            let y = sample_y(&ma1(0.5), 7, 5_000);
            let traj = run(&y, beta, &MonitorConfig::off()).unwrap();
            let reg = regression_form(&traj).unwrap();
            for i in 1..traj.len() {
                let a = traj.states[i].theta;
                let b = reg[i];
                let scale = a.abs().max(b.abs()).max(1.0);
                assert!(
                    (a - b).abs() < 1e-10 * scale,
                    "beta {beta} t {}: {a} vs {b}",
                    i + 1
                );
            }
        }
    }

    #[test]
    fn regression_identity_survives_an_outlier() {
        let mut y = sample_y(&ma1(0.5), 11, 2_000);
        y[1] = 100.0;
        let traj = run(&y, 1.0, &MonitorConfig::off()).unwrap();
        let reg = regression_form(&traj).unwrap();
        for i in 1..traj.len() {
            let a = traj.states[i].theta;
            let b = reg[i];
            assert!(
                (a - b).abs() < 1e-10 * a.abs().max(b.abs()).max(1.0),
                "t {}: {a} vs {b}",
                i + 1
            );
        }
    }

    #[test]
    fn clipping_records_events_and_blocks_regression_form() {
        // A huge second observation drives theta_2 = 50 before the clip.
        let monitor = MonitorConfig::default();
        let traj = run(&[1.0, 100.0, 1.0, -0.5], 1.0, &monitor).unwrap();
        assert_eq!(traj.clip_events.first(), Some(&2));
        assert_eq!(traj.states[1].theta, 0.99);
        assert_eq!(traj.k_star(), *traj.clip_events.last().unwrap());
        assert!(matches!(
            regression_form(&traj),
            Err(Error::ClippedTrajectory { .. })
        ));
    }

    #[test]
    fn forward_update_replay_is_bit_exact() {
        // Rebuild theta_t from theta_{t-s} by re-adding the recomputed
        // update terms in the original order; must land on the stored
        // value bit for bit (same expression tree, same floats).
        let y = sample_y(&ma1(0.3), 13, 400);
        let traj = run(&y, 0.5, &MonitorConfig::off()).unwrap();
        for (t, s) in [(50usize, 7usize), (200, 40), (399, 150), (120, 119)] {
            let mut v = traj.states[t - s - 1].theta;
            for r in (t - s + 1)..=t {
                let prev = traj.states[r - 2];
                let cur = traj.states[r - 1];
                v += (prev.phi * cur.e) / (r as f64 * cur.p_bar);
            }
            assert_eq!(v.to_bits(), traj.states[t - 1].theta.to_bits(), "t {t} s {s}");
        }
    }

    #[test]
    fn gain_denominator_zero_is_reported() {
        let state = RecursionState {
            t: 3,
            theta: 0.2,
            p_bar: 0.0,
            e: 0.0,
            phi: 0.0,
            x: 0.0,
        };
        assert!(matches!(
            step(&state, 1.0, 0.5, &MonitorConfig::off()),
            Err(Error::GainDenominatorZero { t: 4 })
        ));
    }

    #[test]
    fn kernel_row_one_is_kappa_and_j0_is_one() {
        let model = ma1(0.5);
        let y = sample_y(&model, 17, 50);
        let traj = run(&y, 1.0, &MonitorConfig::default()).unwrap();
        let tables = kernel_coefficients(&traj, &model, 12).unwrap();
        assert_eq!(tables.kappa[0], 1.0);
        assert_eq!(tables.kappa[1], 0.5);
        for table in [&tables.e, &tables.x, &tables.phi, &tables.z] {
            assert_eq!(table[0], tables.kappa);
        }
        for t in 0..traj.len() {
            assert_eq!(tables.e[t][0], 1.0, "k0_e at t {}", t + 1);
            assert_eq!(tables.z[t][0], 1.0, "k0_z at t {}", t + 1);
        }
    }

    #[test]
    fn kernel_recursion_matches_signed_product_expansion() {
        // Independent oracle: the unrolled sums
        //   ke_j(t)  = sum_l (-1)^l kappa_{j-l} prod_{i=1..l} theta_{t-i}
        //   kx_j(t)  = sum_l (-beta)^l kappa_{j-l} prod theta_{t-i}
        // truncated at l = min(j, t-1).
        let model = ar1(0.5);
        let beta = 0.6;
        let y = sample_y(&model, 19, 8);
        let traj = run(&y, beta, &MonitorConfig::off()).unwrap();
        let j_max = 40;
        let tables = kernel_coefficients(&traj, &model, j_max).unwrap();
        for t in 1..=traj.len() {
            for j in 0..=j_max {
                let mut oe = 0.0;
                let mut ox = 0.0;
                let mut prod = 1.0;
                for l in 0..=j.min(t - 1) {
                    if l > 0 {
                        prod *= traj.states[t - 1 - l].theta;
                    }
                    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    oe += sign * tables.kappa[j - l] * prod;
                    ox += (-beta).powi(l as i32) * tables.kappa[j - l] * prod;
                }
                assert!(
                    (tables.e[t - 1][j] - oe).abs() < 1e-12,
                    "e t {t} j {j}: {} vs {oe}",
                    tables.e[t - 1][j]
                );
                assert!(
                    (tables.x[t - 1][j] - ox).abs() < 1e-12,
                    "x t {t} j {j}: {} vs {ox}",
                    tables.x[t - 1][j]
                );
            }
        }
    }

    #[test]
    fn kernel_tables_reconstruct_filter_series() {
        // Strongest oracle: rebuild e, x, phi, z from the tables and the
        // recorded innovations; the discrepancy must sit inside the
        // certified truncation tails (plus float noise).
        let model = ma1(0.5);
        let innov = unit_uniform(23);
        let path = simulate(&model, &innov, 400, 200).unwrap();
        let beta = 0.5;
        let traj = run(&path.y, beta, &MonitorConfig::default()).unwrap();
        let j_max = 40;
        let tables = kernel_coefficients(&traj, &model, j_max).unwrap();
        let cap = traj
            .thetas()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let tails = tables.tail_bounds(cap);
        let k = innov.law.bound();
        let eps = &path.innovations;
        let off = path.burn_in;
        for t in 1..=traj.len() {
            let recon = |table: &Vec<Vec<f64>>| -> f64 {
                let mut s = 0.0;
                for j in 0..=j_max.min(off + t - 1) {
                    s += table[t - 1][j] * eps[off + t - 1 - j];
                }
                s
            };
            let st = traj.states[t - 1];
            let float_slack = 1e-10;
            assert!(
                (st.e - recon(&tables.e)).abs() <= k * tails.e + float_slack,
                "e at t {t}"
            );
            assert!(
                (st.x - recon(&tables.x)).abs() <= k * tails.x + float_slack,
                "x at t {t}"
            );
            assert!(
                (st.phi - recon(&tables.phi)).abs() <= k * tails.phi + float_slack,
                "phi at t {t}"
            );
            assert!(
                (traj.z[t - 1] - recon(&tables.z)).abs() <= k * tails.z + float_slack,
                "z at t {t}"
            );
        }
    }

    #[test]
    fn kernel_truncation_too_small_is_rejected() {
        let model = ma1(0.5);
        let y = sample_y(&model, 29, 20);
        let traj = run(&y, 1.0, &MonitorConfig::default()).unwrap();
        // j_max = 0 leaves |kappa_1| = 0.5 in the tail.
        assert!(matches!(
            kernel_coefficients(&traj, &model, 0),
            Err(Error::KernelTruncation { .. })
        ));
    }

    #[test]
    fn approximating_sequence_of_constant_series() {
        let model = ar1(0.5);
        let beta = 0.5;
        let theta_bar = 0.3;
        let thetas = vec![theta_bar; 50];
        let hat = approximating_sequence(&thetas, 0, &model, beta).unwrap();
        let phi = spectral::phi_second_moment(&model, theta_bar, beta).unwrap();
        let z = spectral::z_phi_cross_moment(&model, theta_bar, beta).unwrap();
        let expect = z / phi;
        for h in hat {
            assert!((h - expect).abs() < 1e-9, "{h} vs {expect}");
        }
    }

    #[test]
    fn approximating_sequence_fixes_the_true_coefficient() {
        // Correct model at the true theta: the cross moment equals
        // theta0 times the regressor moment, so the ratio is theta0.
        let model = ma1(0.5);
        for beta in [0.0, 1.0] {
            let thetas = vec![0.5; 30];
            let hat = approximating_sequence(&thetas, 0, &model, beta).unwrap();
            for h in hat {
                assert!((h - 0.5).abs() < 1e-9, "beta {beta}: {h}");
            }
        }
    }

    #[test]
    fn decomposition_reconstruction_closes() {
        let model = ma1(0.5);
        let y = sample_y(&model, 31, 4_000);
        let traj = run(&y, 1.0, &MonitorConfig::default()).unwrap();
        let dec = rm_decomposition(&traj.thetas(), traj.k_star(), &model, 1.0).unwrap();
        assert_eq!(dec.delta.len(), dec.theta_hat.len());
        // Spot-check the bias term of a constant series: gamma_t collapses
        // to f(hat) - f(bar) + (bar - hat) Phi(bar) with hat constant.
        let constant = vec![0.3; 40];
        let dec_c = rm_decomposition(&constant, 0, &model, 1.0).unwrap();
        let phi = spectral::phi_second_moment(&model, 0.3, 1.0).unwrap();
        let z = spectral::z_phi_cross_moment(&model, 0.3, 1.0).unwrap();
        let hat = z / phi;
        let f_hat = spectral::f_value(&model, hat, 1.0).unwrap();
        let f_bar = spectral::f_value(&model, 0.3, 1.0).unwrap();
        let expect = (f_hat - f_bar) + (0.3 - hat) * phi;
        for g in dec_c.gamma.iter().skip(1) {
            assert!((g - expect).abs() < 1e-7, "{g} vs {expect}");
        }
    }

    #[test]
    fn step_size_bracket_contains_t_delta() {
        let model = ma1(0.5);
        let y = sample_y(&model, 37, 2_000);
        let traj = run(&y, 1.0, &MonitorConfig::default()).unwrap();
        let dec = rm_decomposition(&traj.thetas(), traj.k_star(), &model, 1.0).unwrap();
        let bounds =
            spectral::certified_density_bounds(&model, &QuadratureSpec::default()).unwrap();
        let (lo, hi) = step_size_bracket(&bounds, traj.monitor.k_star_cap);
        assert!(lo > 0.0 && lo < hi);
        for (i, d) in dec.delta.iter().enumerate() {
            let td = (i + 1) as f64 * d;
            assert!(lo <= td && td <= hi, "t {} outside [{lo}, {hi}]: {td}", i + 1);
        }
    }

    #[test]
    fn regressor_energy_stays_above_innovation_variance() {
        // Long-run average of phi_s^2 should dominate the innovation
        // variance (with slack) on the second half of the run.
        let model = ma1(0.5);
        let y = sample_y(&model, 41, 20_000);
        for beta in [0.0, 1.0] {
            let traj = run(&y, beta, &MonitorConfig::default_for_beta(beta)).unwrap();
            let mut acc = 0.0;
            for (i, s) in traj.states.iter().enumerate() {
                acc += s.phi * s.phi;
                let t = i + 1;
                if t > traj.len() / 2 {
                    assert!(acc / t as f64 >= 0.9, "beta {beta} t {t}: {}", acc / t as f64);
                }
            }
        }
    }
}
