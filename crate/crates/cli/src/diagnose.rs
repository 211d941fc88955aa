//! Per-step convergence diagnostics for a completed experiment: the
//! estimate against its averaged companion, the rescaled step sizes
//! against their deterministic bracket, the bias term, and the running
//! regressor average, each judged against its threshold.
//!
//! Trajectories are recomputed from the config rather than parsed back
//! out of CSV files; runs are deterministic given seeds, and recomputing
//! restores full precision instead of quantized output rows.

use std::path::Path;

use ma1lab_core::spectral;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{
    self, compute_replication, parallel_map, BetaContext, GAMMA_TAIL_TOL, GAP_FINAL_TOL,
    PHI_AVERAGE_RATIO,
};
use crate::output::{self, DiagnosticsRow, Manifest};

struct RepDiagnostics {
    rows: Vec<DiagnosticsRow>,
    report: String,
    passed: bool,
}

fn diagnose_replication(
    cfg: &ExperimentConfig,
    ctx: &BetaContext,
    bounds: &spectral::DensityBounds,
    rep: usize,
) -> Result<RepDiagnostics> {
    let comp = compute_replication(cfg, ctx, rep)?;
    let k = comp.k_star;
    let n = comp.decomp.theta_hat.len();

    // Running mean of phi_s^2 at every t, then the worst ratio to the
    // innovation variance over the second half of the run.
    let sigma2 = cfg.model.sigma2();
    let mut phi_mean = Vec::with_capacity(cfg.t_len);
    let mut acc = 0.0;
    for (i, s) in comp.traj.states.iter().enumerate() {
        acc += s.phi * s.phi;
        phi_mean.push(acc / (i + 1) as f64);
    }
    let phi_ratio_min = phi_mean[cfg.t_len / 2..]
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v / sigma2));

    let (lo, hi) = experiment::step_bracket(&comp, bounds);
    let mut bracket_violations = 0usize;
    for (i, d) in comp.decomp.delta.iter().enumerate() {
        let td = (i as f64 + 1.0) * d;
        if !(lo..=hi).contains(&td) {
            bracket_violations += 1;
        }
    }

    let gap_final =
        (comp.traj.final_theta() - comp.decomp.theta_hat[n - 1]).abs();
    let gamma_tail = comp.decomp.gamma[n - n / 10..]
        .iter()
        .fold(0.0f64, |m, g| m.max(g.abs()));

    let rows = output::stride_points(cfg.t_len, cfg.output_stride)
        .into_iter()
        .map(|t| {
            let shifted = (t > k).then(|| t - k - 1);
            DiagnosticsRow {
                t,
                theta: comp.traj.states[t - 1].theta,
                theta_hat: shifted.map(|s| comp.decomp.theta_hat[s]),
                abs_gap: shifted.map(|s| {
                    (comp.traj.states[t - 1].theta - comp.decomp.theta_hat[s]).abs()
                }),
                t_delta: shifted.map(|s| (s as f64 + 1.0) * comp.decomp.delta[s]),
                gamma: shifted.map(|s| comp.decomp.gamma[s]),
                phi_mean_sq: phi_mean[t - 1],
            }
        })
        .collect();

    let checks = [
        ("bracket", bracket_violations == 0, format!("violations={bracket_violations}")),
        (
            "phi_average",
            phi_ratio_min >= PHI_AVERAGE_RATIO,
            format!("min_ratio={phi_ratio_min:.4}"),
        ),
        (
            "gap_final",
            gap_final < GAP_FINAL_TOL,
            format!("{gap_final:.4e}"),
        ),
        (
            "gamma_tail",
            gamma_tail < GAMMA_TAIL_TOL,
            format!("max={gamma_tail:.4e}"),
        ),
    ];
    let passed = checks.iter().all(|(_, ok, _)| *ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, ok, v)| {
            format!("{name}={}({v})", if *ok { "PASS" } else { "FAIL" })
        })
        .collect();
    Ok(RepDiagnostics {
        rows,
        report: format!(
            "diagnose beta {} rep {rep}: {}",
            ctx.beta,
            detail.join(" ")
        ),
        passed,
    })
}

pub fn diagnose(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    beta_sel: Option<f64>,
    rep_sel: Option<usize>,
    threads: usize,
    check: bool,
) -> Result<()> {
    let manifest_path = out_dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(CliError::Config(format!(
            "no manifest.json in {}; run `ma1lab experiment` first",
            out_dir.display()
        )));
    }
    let manifest = Manifest::read(&manifest_path)?;
    let hash = cfg.hash();
    if manifest.config_hash != hash {
        return Err(CliError::Config(format!(
            "artifacts in {} were produced by config {}, but the current \
             config hashes to {hash}",
            out_dir.display(),
            manifest.config_hash
        )));
    }

    let beta_ixs: Vec<usize> = match beta_sel {
        Some(b) => vec![cfg.beta_index(b)?],
        None => (0..cfg.betas.len()).collect(),
    };
    let reps: Vec<usize> = match rep_sel {
        Some(r) => {
            if r >= cfg.replications {
                return Err(CliError::Config(format!(
                    "rep {r} out of range; config has {} replications",
                    cfg.replications
                )));
            }
            vec![r]
        }
        None => (0..cfg.replications).collect(),
    };

    let bounds = spectral::certified_density_bounds(&cfg.model, &cfg.quadrature)?;
    let contexts: Vec<BetaContext> = beta_ixs
        .iter()
        .map(|&ix| BetaContext::build(cfg, ix))
        .collect::<Result<_>>()?;

    let jobs = contexts.len() * reps.len();
    let results = parallel_map(jobs, threads, |job| {
        let ctx = &contexts[job / reps.len()];
        diagnose_replication(cfg, ctx, &bounds, reps[job % reps.len()])
    })?;

    let mut failures = Vec::new();
    for (job, diag) in results.iter().enumerate() {
        let ctx = &contexts[job / reps.len()];
        let rep = reps[job % reps.len()];
        output::write_diagnostics(
            &output::diagnostics_file(out_dir, ctx.beta, rep),
            &diag.rows,
        )?;
        println!("{}", diag.report);
        if !diag.passed {
            failures.push(format!("beta {} rep {rep}", ctx.beta));
        }
    }
    if check && !failures.is_empty() {
        return Err(CliError::Check(format!(
            "diagnostic thresholds missed on: {}",
            failures.join(", ")
        )));
    }
    Ok(())
}
