//! Single-shot commands: simulate one path, estimate one replication,
//! solve one zero set, or drive the deterministic mean-field iteration.
//! Each prints to stdout and optionally writes the matching CSV artifact.

use std::path::Path;

use ma1lab_core::rm::{self, harmonic_schedule};
use ma1lab_core::spectral::{self, MomentTable};
use ma1lab_core::{sim, zero_set};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{run_replication, BetaContext};
use crate::output::{self, fmt_f, ZeroSetRow};

/// Write the data that the first configured beta's replication `rep`
/// would see: t, y_t, and the innovation that produced it.
pub fn simulate(cfg: &ExperimentConfig, rep: usize, out: Option<&Path>) -> Result<()> {
    let stream = cfg.stream_for(0, rep);
    let path = sim::simulate_stream(
        &cfg.model,
        &cfg.innovation_spec(),
        cfg.t_len,
        cfg.burn_in,
        stream,
    )?;
    let write_rows = |w: &mut csv::Writer<Box<dyn std::io::Write>>| -> Result<()> {
        w.write_record(["t", "y", "innovation"])?;
        for t in 1..=cfg.t_len {
            w.write_record([
                t.to_string(),
                fmt_f(path.y[t - 1]),
                fmt_f(path.innovations[cfg.burn_in + t - 1]),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let file = dir.join(format!("path_{rep}.csv"));
            let mut w = csv::Writer::from_writer(
                Box::new(std::fs::File::create(&file)?) as Box<dyn std::io::Write>
            );
            write_rows(&mut w)?;
            println!("wrote {}", file.display());
        }
        None => {
            let mut w = csv::Writer::from_writer(
                Box::new(std::io::stdout().lock()) as Box<dyn std::io::Write>
            );
            write_rows(&mut w)?;
        }
    }
    Ok(())
}

/// Run one replication end to end and report the summary line; --out
/// additionally writes the trajectory CSV.
pub fn estimate(
    cfg: &ExperimentConfig,
    beta: f64,
    rep: usize,
    out: Option<&Path>,
) -> Result<()> {
    let beta_ix = cfg.beta_index(beta)?;
    if rep >= cfg.replications {
        return Err(CliError::Config(format!(
            "rep {rep} out of range; config has {} replications",
            cfg.replications
        )));
    }
    let ctx = BetaContext::build(cfg, beta_ix)?;
    let bounds = spectral::certified_density_bounds(&cfg.model, &cfg.quadrature)?;
    let res = run_replication(cfg, &ctx, &bounds, rep)?;
    let s = &res.summary;
    println!(
        "beta={} rep={} theta_final={} theta_hat_final={} dist_zero_set={} \
         loss_final={} clips={} k_star={}",
        s.beta,
        s.rep,
        fmt_f(s.theta_final),
        fmt_f(s.theta_hat_final),
        fmt_f(s.dist_zero_set),
        fmt_f(s.loss_final),
        s.clip_count,
        s.k_star
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let file = output::traj_file(dir, beta, rep);
        output::write_traj(&file, &res.traj_rows)?;
        println!("wrote {}", file.display());
    }
    Ok(())
}

/// Solve the zero set of the mean field at one beta and report each root
/// with its loss.
pub fn zeroset(cfg: &ExperimentConfig, beta: f64, out: Option<&Path>) -> Result<()> {
    let zs = zero_set::find_zero_set_with(
        &cfg.model,
        beta,
        zero_set::DEFAULT_GRID_POINTS,
        zero_set::DEFAULT_ROOT_TOL,
        &cfg.quadrature,
    )?;
    let rows: Vec<ZeroSetRow> = zs
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
    println!("beta={} roots={}", beta, rows.len());
    for r in &rows {
        println!(
            "theta={} residual={} loss={}",
            fmt_f(r.theta),
            fmt_f(r.residual),
            fmt_f(r.loss)
        );
    }
    for s in &zs.suspects {
        println!("suspect_tangential_zero theta={}", fmt_f(*s));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let file = output::zeroset_file(dir, beta);
        output::write_zeroset(&file, &rows)?;
        println!("wrote {}", file.display());
    }
    Ok(())
}

/// Drive the deterministic mean-field iteration from evenly spaced
/// starting points and report the distance of each limit to the zero
/// set. The field is normalized by the regressor moment, which leaves
/// the zero set unchanged and gives every root a unit local slope.
pub fn rm_check(
    cfg: &ExperimentConfig,
    beta: f64,
    starts: usize,
    steps: u64,
    tol: f64,
    check: bool,
) -> Result<()> {
    if starts < 1 {
        return Err(CliError::Config("starts must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(CliError::Config("tol must be > 0".into()));
    }
    let table = MomentTable::build(&cfg.model, beta, &cfg.quadrature)?;
    let zs = zero_set::find_zero_set_with(
        &cfg.model,
        beta,
        zero_set::DEFAULT_GRID_POINTS,
        zero_set::DEFAULT_ROOT_TOL,
        &cfg.quadrature,
    )?;
    let mut failures = 0usize;
    for i in 0..starts {
        let start = if starts == 1 {
            0.0
        } else {
            -0.9 + 1.8 * i as f64 / (starts - 1) as f64
        };
        let schedule = harmonic_schedule(2.0, start);
        let seq = rm::rm_iterate(
            |th| {
                let m = table.eval(th)?;
                Ok(m.f / m.phi2)
            },
            &schedule,
            steps,
        )?;
        let last = *seq.last().unwrap();
        let dist = zs.distance_to(last);
        let ok = dist < tol;
        failures += usize::from(!ok);
        println!(
            "start={} final={} dist={} {}",
            fmt_f(start),
            fmt_f(last),
            fmt_f(dist),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "rm-check beta={}: {}/{} starts within {tol:e} of the zero set",
        beta,
        starts - failures,
        starts
    );
    if check && failures > 0 {
        return Err(CliError::Check(format!(
            "{failures} of {starts} starts missed the zero set at tolerance {tol:e}"
        )));
    }
    Ok(())
}
