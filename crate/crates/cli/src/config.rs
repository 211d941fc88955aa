//! Experiment configuration: a TOML file with [model], [innovation],
//! [run], [monitor], and [quadrature] sections, resolved into one
//! validated value whose canonical hash is recorded in run manifests.

use std::path::Path;

use ma1lab_core::estimator::MonitorConfig;
use ma1lab_core::model::SpectralModel;
use ma1lab_core::sim::{InnovationLaw, InnovationSpec};
use ma1lab_core::QuadratureSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelSection,
    innovation: InnovationSection,
    run: RunSection,
    #[serde(default)]
    monitor: MonitorSection,
    #[serde(default)]
    quadrature: QuadratureSection,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Arma,
    Bloomfield,
    WhiteNoise,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    kind: ModelKind,
    #[serde(default)]
    ar: Vec<f64>,
    #[serde(default)]
    ma: Vec<f64>,
    #[serde(default)]
    cepstral: Vec<f64>,
    sigma2: f64,
}

impl ModelSection {
    fn resolve(self) -> Result<SpectralModel> {
        let model = match self.kind {
            ModelKind::Arma => {
                if !self.cepstral.is_empty() {
                    return Err(CliError::Config(
                        "cepstral applies only to kind = \"bloomfield\"".into(),
                    ));
                }
                SpectralModel::Arma {
                    ar: self.ar,
                    ma: self.ma,
                    sigma2: self.sigma2,
                }
            }
            ModelKind::Bloomfield => {
                if !self.ar.is_empty() || !self.ma.is_empty() {
                    return Err(CliError::Config(
                        "ar/ma apply only to kind = \"arma\"".into(),
                    ));
                }
                SpectralModel::Bloomfield {
                    cepstral: self.cepstral,
                    sigma2: self.sigma2,
                }
            }
            ModelKind::WhiteNoise => {
                if !self.ar.is_empty() || !self.ma.is_empty() || !self.cepstral.is_empty() {
                    return Err(CliError::Config(
                        "white_noise takes no ar/ma/cepstral coefficients".into(),
                    ));
                }
                SpectralModel::WhiteNoise {
                    sigma2: self.sigma2,
                }
            }
        };
        model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(model)
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LawKind {
    Uniform,
    Rademacher,
    TruncatedGaussian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InnovationSection {
    law: LawKind,
    half_width: Option<f64>,
    scale: Option<f64>,
    sd: Option<f64>,
    bound: Option<f64>,
    /// Truncation point as a multiple of sd when sd/bound are derived
    /// from the model variance (default 4).
    bound_ratio: Option<f64>,
    seed: u64,
}

impl InnovationSection {
    /// Law parameters may be given explicitly or left out, in which case
    /// they are derived so the law variance equals the model's sigma2.
    fn resolve(self, sigma2: f64) -> Result<(InnovationLaw, u64)> {
        let reject = |given: &[(&str, bool)]| -> Result<()> {
            for (name, present) in given {
                if *present {
                    return Err(CliError::Config(format!(
                        "{name} does not apply to the chosen innovation law"
                    )));
                }
            }
            Ok(())
        };
        let law = match self.law {
            LawKind::Uniform => {
                reject(&[
                    ("scale", self.scale.is_some()),
                    ("sd", self.sd.is_some()),
                    ("bound", self.bound.is_some()),
                    ("bound_ratio", self.bound_ratio.is_some()),
                ])?;
                InnovationLaw::Uniform {
                    half_width: self
                        .half_width
                        .unwrap_or_else(|| (3.0 * sigma2).sqrt()),
                }
            }
            LawKind::Rademacher => {
                reject(&[
                    ("half_width", self.half_width.is_some()),
                    ("sd", self.sd.is_some()),
                    ("bound", self.bound.is_some()),
                    ("bound_ratio", self.bound_ratio.is_some()),
                ])?;
                InnovationLaw::Rademacher {
                    scale: self.scale.unwrap_or_else(|| sigma2.sqrt()),
                }
            }
            LawKind::TruncatedGaussian => {
                reject(&[
                    ("half_width", self.half_width.is_some()),
                    ("scale", self.scale.is_some()),
                ])?;
                match (self.sd, self.bound) {
                    (Some(sd), Some(bound)) => {
                        reject(&[("bound_ratio", self.bound_ratio.is_some())])?;
                        InnovationLaw::TruncatedGaussian { sd, bound }
                    }
                    (None, None) => InnovationLaw::truncated_gaussian_with_variance(
                        sigma2,
                        self.bound_ratio.unwrap_or(4.0),
                    ),
                    _ => {
                        return Err(CliError::Config(
                            "truncated_gaussian needs both sd and bound, or neither".into(),
                        ))
                    }
                }
            }
        };
        law.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let var = law.variance();
        if (var - sigma2).abs() > 1e-12 * sigma2.max(1.0) {
            return Err(CliError::Config(format!(
                "innovation variance {var} does not match model sigma2 {sigma2}"
            )));
        }
        Ok((law, self.seed))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    t_len: usize,
    replications: usize,
    betas: Vec<f64>,
    #[serde(default = "default_burn_in")]
    burn_in: usize,
    /// Trajectory/diagnostic CSV row spacing; defaults to t_len / 1000.
    output_stride: Option<usize>,
    /// Mean-distance threshold for `experiment --check` (default 0.03).
    check_mean_dist: Option<f64>,
}

fn default_burn_in() -> usize {
    ma1lab_core::sim::DEFAULT_BURN_IN
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonitorSection {
    enabled: Option<bool>,
    k_star_cap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureSection {
    initial_nodes: Option<usize>,
    rel_tol: Option<f64>,
    max_doublings: Option<u32>,
}

/// A fully resolved and validated experiment description. Everything that
/// influences emitted numbers lives here; runtime knobs (thread count,
/// output directory) deliberately do not, so the config hash identifies
/// the results, not the execution.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub model: SpectralModel,
    pub law: InnovationLaw,
    pub seed: u64,
    pub t_len: usize,
    pub replications: usize,
    pub betas: Vec<f64>,
    pub burn_in: usize,
    pub output_stride: usize,
    pub check_mean_dist: f64,
    pub monitor: MonitorConfig,
    pub quadrature: QuadratureSpec,
}

impl ExperimentConfig {
    /// Read and resolve a config file; `seed_override` replaces the
    /// [innovation] seed before anything (including the hash) sees it.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let file: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

        let model = file.model.resolve()?;
        let (law, file_seed) = file.innovation.resolve(model.sigma2())?;
        let run = file.run;

        if run.replications < 1 {
            return Err(CliError::Config("replications must be >= 1".into()));
        }
        if run.t_len < 100 {
            return Err(CliError::Config(format!(
                "t_len = {} must be >= 100",
                run.t_len
            )));
        }
        if run.betas.is_empty() {
            return Err(CliError::Config("betas must be nonempty".into()));
        }
        for &b in &run.betas {
            if !(b.is_finite() && (0.0..=1.0).contains(&b)) {
                return Err(CliError::Config(format!("beta {b} outside [0, 1]")));
            }
        }
        let labels: Vec<String> = run.betas.iter().map(|b| beta_label(*b)).collect();
        for i in 1..labels.len() {
            if labels[..i].contains(&labels[i]) {
                return Err(CliError::Config(format!(
                    "betas contain duplicate value {}",
                    labels[i]
                )));
            }
        }
        let output_stride = match run.output_stride {
            Some(0) => return Err(CliError::Config("output_stride must be >= 1".into())),
            Some(s) => s,
            None => (run.t_len / 1000).max(1),
        };
        let check_mean_dist = run.check_mean_dist.unwrap_or(0.03);
        if !(check_mean_dist > 0.0) {
            return Err(CliError::Config("check_mean_dist must be > 0".into()));
        }

        // Monitoring defaults on for every beta: the decomposition
        // diagnostics evaluate spectral moments at the iterates, which
        // requires them to stay inside (-1, 1).
        let monitor = MonitorConfig {
            enabled: file.monitor.enabled.unwrap_or(true),
            k_star_cap: file.monitor.k_star_cap.unwrap_or(0.99),
        };
        monitor
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let defaults = QuadratureSpec::default();
        let quadrature = QuadratureSpec {
            initial_nodes: file.quadrature.initial_nodes.unwrap_or(defaults.initial_nodes),
            rel_tol: file.quadrature.rel_tol.unwrap_or(defaults.rel_tol),
            max_doublings: file
                .quadrature
                .max_doublings
                .unwrap_or(defaults.max_doublings),
        };
        quadrature
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        Ok(ExperimentConfig {
            model,
            law,
            seed: seed_override.unwrap_or(file_seed),
            t_len: run.t_len,
            replications: run.replications,
            betas: run.betas,
            burn_in: run.burn_in,
            output_stride,
            check_mean_dist,
            monitor,
            quadrature,
        })
    }

    pub fn innovation_spec(&self) -> InnovationSpec {
        InnovationSpec {
            law: self.law.clone(),
            seed: self.seed,
        }
    }

    /// Generator stream for (beta index, replication). Betas occupy the
    /// high half so appending a beta value or raising the replication
    /// count never perturbs existing streams.
    pub fn stream_for(&self, beta_ix: usize, rep: usize) -> u64 {
        ((beta_ix as u64) << 32) | rep as u64
    }

    /// Position of `beta` in the configured list; commands address runs
    /// by value but streams are indexed, so membership is required.
    pub fn beta_index(&self, beta: f64) -> Result<usize> {
        self.betas
            .iter()
            .position(|b| *b == beta)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "beta {beta} is not in the configured betas {:?}",
                    self.betas
                ))
            })
    }

    /// FNV-1a over the canonical JSON form; identifies the semantic
    /// config in manifests and guards diagnose against stale artifacts.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canon.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// File-name label for a beta value: integral values lose the trailing
/// ".0" so criterion tables read traj_0_3.csv, traj_1_3.csv.
pub fn beta_label(beta: f64) -> String {
    if beta == beta.trunc() {
        format!("{}", beta as i64)
    } else {
        format!("{beta}")
    }
}
