//! Deterministic artifact writers: fixed float format, fixed column
//! order, LF terminators, no timestamps. Identical configs must produce
//! byte-identical files, whatever the thread count or replication order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::beta_label;
use crate::error::Result;

/// 17 significant digits, locale-independent; round-trips every f64.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// One summary.csv row per (beta, replication).
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub beta: f64,
    pub rep: usize,
    pub stream: u64,
    pub theta_final: f64,
    pub theta_hat_final: f64,
    pub dist_zero_set: f64,
    pub loss_final: f64,
    pub clip_count: usize,
    pub k_star: usize,
    pub gamma_tail_max: f64,
    pub bracket_violations: usize,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "beta",
        "rep",
        "stream",
        "theta_final",
        "theta_hat_final",
        "dist_zero_set",
        "loss_final",
        "clip_count",
        "k_star",
        "gamma_tail_max",
        "bracket_violations",
    ])?;
    for r in rows {
        w.write_record([
            fmt_f(r.beta),
            r.rep.to_string(),
            r.stream.to_string(),
            fmt_f(r.theta_final),
            fmt_f(r.theta_hat_final),
            fmt_f(r.dist_zero_set),
            fmt_f(r.loss_final),
            r.clip_count.to_string(),
            r.k_star.to_string(),
            fmt_f(r.gamma_tail_max),
            r.bracket_violations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One trajectory row at an output stride point. theta_hat is absent for
/// t at or below the settling index.
#[derive(Debug, Clone)]
pub struct TrajRow {
    pub t: usize,
    pub y: f64,
    pub theta: f64,
    pub theta_hat: Option<f64>,
}

pub fn write_traj(path: &Path, rows: &[TrajRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "y", "theta", "theta_hat"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_f(r.y),
            fmt_f(r.theta),
            r.theta_hat.map(fmt_f).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One zero-set row per bracketed root.
#[derive(Debug, Clone)]
pub struct ZeroSetRow {
    pub theta: f64,
    pub residual: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub loss: f64,
}

pub fn write_zeroset(path: &Path, rows: &[ZeroSetRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "residual", "bracket_lo", "bracket_hi", "loss"])?;
    for r in rows {
        w.write_record([
            fmt_f(r.theta),
            fmt_f(r.residual),
            fmt_f(r.bracket_lo),
            fmt_f(r.bracket_hi),
            fmt_f(r.loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One diagnostics row: the estimate, its averaged companion, and the
/// step-size/bias decomposition at one time point. The companion columns
/// are absent for t at or below the settling index.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub t: usize,
    pub theta: f64,
    pub theta_hat: Option<f64>,
    pub abs_gap: Option<f64>,
    pub t_delta: Option<f64>,
    pub gamma: Option<f64>,
    pub phi_mean_sq: f64,
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "theta",
        "theta_hat",
        "abs_gap",
        "t_delta",
        "gamma",
        "phi_mean_sq",
    ])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_f(r.theta),
            r.theta_hat.map(fmt_f).unwrap_or_default(),
            r.abs_gap.map(fmt_f).unwrap_or_default(),
            r.t_delta.map(fmt_f).unwrap_or_default(),
            r.gamma.map(fmt_f).unwrap_or_default(),
            fmt_f(r.phi_mean_sq),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run record: tool version, config hash, the resolved config itself,
/// and the emitted files. No timestamps; reruns must be byte-identical.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| crate::error::CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn traj_file(dir: &Path, beta: f64, rep: usize) -> PathBuf {
    dir.join(format!("traj_{}_{rep}.csv", beta_label(beta)))
}

pub fn zeroset_file(dir: &Path, beta: f64) -> PathBuf {
    dir.join(format!("zeroset_{}.csv", beta_label(beta)))
}

pub fn diagnostics_file(dir: &Path, beta: f64, rep: usize) -> PathBuf {
    dir.join(format!("diagnostics_{}_{rep}.csv", beta_label(beta)))
}

/// Stride-sampled time indices 1, 1+s, 1+2s, ..., always including T.
pub fn stride_points(t_len: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=t_len).step_by(stride.max(1)).collect();
    if *out.last().unwrap() != t_len {
        out.push(t_len);
    }
    out
}
