//! Replication manager: simulate, estimate, decompose, and summarize
//! across (beta, replication) pairs. Results are computed concurrently
//! but assembled and written in a fixed order, so artifacts do not
//! depend on thread count or completion order.

use std::path::Path;
use std::sync::Mutex;

use ma1lab_core::estimator::{self, RmDecomposition, Trajectory};
use ma1lab_core::sim::{self, SamplePath};
use ma1lab_core::spectral::{self, DensityBounds, MomentTable};
use ma1lab_core::zero_set::{self, ZeroSet};

use crate::config::ExperimentConfig;
use crate::error::{with_run_context, CliError, Result};
use crate::output::{
    self, Manifest, SummaryRow, TrajRow, ZeroSetRow,
};

/// Diagnostic thresholds: the final gap between the estimate and its
/// averaged companion, the late-run bias magnitude, and the floor on the
/// running regressor average relative to the innovation variance.
pub const GAP_FINAL_TOL: f64 = 0.02;
pub const GAMMA_TAIL_TOL: f64 = 0.05;
pub const PHI_AVERAGE_RATIO: f64 = 0.9;

/// Per-beta shared state: the moment table and the zero set are
/// replication-independent, so every replication reuses them.
pub struct BetaContext {
    pub beta: f64,
    pub beta_ix: usize,
    pub table: MomentTable,
    pub zero_set: ZeroSet,
}

impl BetaContext {
    pub fn build(cfg: &ExperimentConfig, beta_ix: usize) -> Result<Self> {
        let beta = cfg.betas[beta_ix];
        let table = MomentTable::build(&cfg.model, beta, &cfg.quadrature)?;
        let zero_set = zero_set::find_zero_set_with(
            &cfg.model,
            beta,
            zero_set::DEFAULT_GRID_POINTS,
            zero_set::DEFAULT_ROOT_TOL,
            &cfg.quadrature,
        )?;
        Ok(BetaContext {
            beta,
            beta_ix,
            table,
            zero_set,
        })
    }
}

/// Everything recomputable about one replication, before any output
/// shaping: the path, the trajectory, and the averaged decomposition.
pub struct RepComputation {
    pub path: SamplePath,
    pub traj: Trajectory,
    pub k_star: usize,
    pub decomp: RmDecomposition,
}

pub fn compute_replication(
    cfg: &ExperimentConfig,
    ctx: &BetaContext,
    rep: usize,
) -> Result<RepComputation> {
    let beta = ctx.beta;
    let stream = cfg.stream_for(ctx.beta_ix, rep);
    let path = with_run_context(
        sim::simulate_stream(
            &cfg.model,
            &cfg.innovation_spec(),
            cfg.t_len,
            cfg.burn_in,
            stream,
        ),
        beta,
        rep,
    )?;
    let traj = with_run_context(
        estimator::run(&path.y, beta, &cfg.monitor),
        beta,
        rep,
    )?;
    let k_star = traj.k_star();
    if k_star + 1 >= traj.len() {
        return Err(CliError::Numeric(format!(
            "beta {beta} rep {rep}: monitor was still clipping at t = {k_star}; \
             no unconstrained tail to analyze"
        )));
    }
    let thetas = traj.thetas();
    let decomp = with_run_context(
        estimator::rm_decomposition_with(&thetas, k_star, &ctx.table),
        beta,
        rep,
    )?;
    Ok(RepComputation {
        path,
        traj,
        k_star,
        decomp,
    })
}

/// Bracket for the rescaled step sizes implied by the density bounds and
/// the largest iterate magnitude seen on this run.
pub fn step_bracket(comp: &RepComputation, bounds: &DensityBounds) -> (f64, f64) {
    let cap = comp
        .traj
        .states
        .iter()
        .map(|s| s.theta.abs())
        .fold(0.0, f64::max);
    estimator::step_size_bracket(bounds, cap)
}

fn bracket_violations(comp: &RepComputation, bounds: &DensityBounds) -> usize {
    let (lo, hi) = step_bracket(comp, bounds);
    comp.decomp
        .delta
        .iter()
        .enumerate()
        .filter(|(i, d)| {
            let td = (*i as f64 + 1.0) * **d;
            !(lo..=hi).contains(&td)
        })
        .count()
}

fn gamma_tail_max(decomp: &RmDecomposition) -> f64 {
    let n = decomp.gamma.len();
    decomp.gamma[n - n / 10..]
        .iter()
        .fold(0.0, |m, g| m.max(g.abs()))
}

/// One replication shaped for the artifact files.
pub struct RepResult {
    pub summary: SummaryRow,
    pub traj_rows: Vec<TrajRow>,
}

pub fn run_replication(
    cfg: &ExperimentConfig,
    ctx: &BetaContext,
    bounds: &DensityBounds,
    rep: usize,
) -> Result<RepResult> {
    let comp = compute_replication(cfg, ctx, rep)?;
    let theta_final = comp.traj.final_theta();
    let theta_hat_final = *comp.decomp.theta_hat.last().unwrap();
    let loss_final = with_run_context(
        spectral::loss_with(&cfg.model, theta_final, &cfg.quadrature),
        ctx.beta,
        rep,
    )?;
    let k = comp.k_star;
    let traj_rows = output::stride_points(cfg.t_len, cfg.output_stride)
        .into_iter()
        .map(|t| TrajRow {
            t,
            y: comp.path.y[t - 1],
            theta: comp.traj.states[t - 1].theta,
            theta_hat: (t > k).then(|| comp.decomp.theta_hat[t - 1 - k]),
        })
        .collect();
    Ok(RepResult {
        summary: SummaryRow {
            beta: ctx.beta,
            rep,
            stream: cfg.stream_for(ctx.beta_ix, rep),
            theta_final,
            theta_hat_final,
            dist_zero_set: ctx.zero_set.distance_to(theta_final),
            loss_final,
            clip_count: comp.traj.clip_events.len(),
            k_star: k,
            gamma_tail_max: gamma_tail_max(&comp.decomp),
            bracket_violations: bracket_violations(&comp, bounds),
        },
        traj_rows,
    })
}

/// Round-robin worker pool; results land in job order regardless of
/// which worker finishes first.
pub fn parallel_map<T, F>(jobs: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.clamp(1, jobs.max(1));
    let slots: Mutex<Vec<Option<Result<T>>>> =
        Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for w in 0..threads {
            let slots = &slots;
            let f = &f;
            scope.spawn(move || {
                let mut i = w;
                while i < jobs {
                    let r = f(i);
                    slots.lock().unwrap()[i] = Some(r);
                    i += threads;
                }
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker filled its slots"))
        .collect()
}

/// Per-beta aggregate over replications.
pub struct BetaAggregate {
    pub beta: f64,
    pub mean_dist: f64,
    pub max_dist: f64,
    pub mean_loss: f64,
    pub mean_theta_final: f64,
}

pub struct ExperimentResult {
    pub rows: Vec<SummaryRow>,
    pub aggregates: Vec<BetaAggregate>,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<ExperimentResult> {
    std::fs::create_dir_all(out_dir)?;
    let bounds = spectral::certified_density_bounds(&cfg.model, &cfg.quadrature)?;
    let contexts: Vec<BetaContext> = (0..cfg.betas.len())
        .map(|ix| BetaContext::build(cfg, ix))
        .collect::<Result<_>>()?;

    let reps = cfg.replications;
    let jobs = contexts.len() * reps;
    let results = parallel_map(jobs, threads, |job| {
        run_replication(cfg, &contexts[job / reps], &bounds, job % reps)
    })?;

    let mut outputs: Vec<String> = Vec::new();
    for ctx in &contexts {
        let zs_rows: Vec<ZeroSetRow> = ctx
            .zero_set
            .roots
            .iter()
            .map(|r| {
                Ok(ZeroSetRow {
                    theta: r.theta,
                    residual: r.residual,
                    bracket_lo: r.bracket.0,
                    bracket_hi: r.bracket.1,
                    loss: spectral::loss_with(&cfg.model, r.theta, &cfg.quadrature)?,
                })
            })
            .collect::<Result<_>>()?;
        let path = output::zeroset_file(out_dir, ctx.beta);
        output::write_zeroset(&path, &zs_rows)?;
        outputs.push(file_name(&path));
    }
    for (job, res) in results.iter().enumerate() {
        let ctx = &contexts[job / reps];
        let path = output::traj_file(out_dir, ctx.beta, job % reps);
        output::write_traj(&path, &res.traj_rows)?;
        outputs.push(file_name(&path));
    }
    let rows: Vec<SummaryRow> = results.into_iter().map(|r| r.summary).collect();
    let summary_path = out_dir.join("summary.csv");
    output::write_summary(&summary_path, &rows)?;
    outputs.push(file_name(&summary_path));
    outputs.sort();

    Manifest {
        tool: "ma1lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        outputs,
    }
    .write(&out_dir.join("manifest.json"))?;

    let aggregates = contexts
        .iter()
        .map(|ctx| {
            let slice: Vec<&SummaryRow> =
                rows.iter().filter(|r| r.beta == ctx.beta).collect();
            let n = slice.len() as f64;
            BetaAggregate {
                beta: ctx.beta,
                mean_dist: slice.iter().map(|r| r.dist_zero_set).sum::<f64>() / n,
                max_dist: slice
                    .iter()
                    .map(|r| r.dist_zero_set)
                    .fold(0.0, f64::max),
                mean_loss: slice.iter().map(|r| r.loss_final).sum::<f64>() / n,
                mean_theta_final: slice.iter().map(|r| r.theta_final).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(ExperimentResult { rows, aggregates })
}

/// Evaluate the --check threshold: every beta's mean distance to its own
/// zero set must stay below the configured bound.
pub fn check_experiment(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    let failures: Vec<String> = result
        .aggregates
        .iter()
        .filter(|a| !(a.mean_dist < cfg.check_mean_dist))
        .map(|a| {
            format!(
                "beta {}: mean_dist {:.6e} >= {:.6e}",
                a.beta, a.mean_dist, cfg.check_mean_dist
            )
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}
