//! Pipeline configuration: one JSON document.

use std::path::{Path, PathBuf};

use dynqoi::kernel::KernelSpec;
use dynqoi::kpca::{default_proposals, QoiMode};
use dynqoi::models::{ExperimentConfig, ExperimentKind};
use dynqoi::splinefilter::FilterConfig;
use dynqoi::timeseries::ParamDistribution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Externally supplied ensembles, used instead of `experiment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFiles {
    pub predicted: PathBuf,
    pub observed: PathBuf,
    pub predicted_params: PathBuf,
    /// Parameters behind the observations, when known (validation only).
    #[serde(default)]
    pub observed_params: Option<PathBuf>,
    /// Distribution the predicted parameters were drawn from.
    #[serde(default = "uniform")]
    pub initial_distribution: ParamDistribution,
    /// Exact distribution behind `observed_params`, when known.
    #[serde(default)]
    pub dg_distribution: Option<ParamDistribution>,
}

fn uniform() -> ParamDistribution {
    ParamDistribution::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_init: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    #[serde(default = "svm_proposals")]
    pub proposals: Vec<KernelSpec>,
    #[serde(default = "ten")]
    pub k_folds: usize,
    #[serde(rename = "C", default = "one")]
    pub c: f64,
    #[serde(default = "svm_tol")]
    pub tol: f64,
}

fn svm_proposals() -> Vec<KernelSpec> {
    vec![KernelSpec::linear(), KernelSpec::rbf(), KernelSpec::poly(), KernelSpec::sigmoid()]
}

fn ten() -> usize {
    10
}

fn one() -> f64 {
    1.0
}

fn svm_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiConfig {
    #[serde(flatten)]
    pub mode: QoiMode,
    #[serde(default = "default_proposals")]
    pub proposals: Vec<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    #[serde(default = "grid_n")]
    pub grid_n: usize,
}

fn grid_n() -> usize {
    2001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputFiles>,
    pub filter: FilterConfig,
    pub clustering: ClusteringConfig,
    pub svm: SvmConfig,
    pub qoi: QoiConfig,
    pub density: DensityConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

const REQUIRED: [&str; 7] = ["filter", "clustering", "svm", "qoi", "density", "seed", "output_dir"];

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
        let mut missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !obj.contains_key(*k)).collect();
        if !obj.contains_key("experiment") && !obj.contains_key("inputs") {
            missing.push("experiment|inputs");
        }
        if !missing.is_empty() {
            return Err(CliError::Config(format!("missing fields: {}", missing.join(", "))));
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |e: dynqoi::Error| CliError::Config(e.to_string());
        match (&self.experiment, &self.inputs) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either `experiment` or `inputs`, not both".into()))
            }
            (Some(e), None) => e.validate().map_err(cfg_err)?,
            (None, Some(_)) => {}
            (None, None) => return Err(CliError::Config("missing fields: experiment|inputs".into())),
        }
        if self.clustering.k == 0 || self.clustering.n_init == 0 {
            return Err(CliError::Config("clustering.K and clustering.n_init must be >= 1".into()));
        }
        if self.svm.proposals.is_empty() || self.qoi.proposals.is_empty() {
            return Err(CliError::Config("proposal lists must be non-empty".into()));
        }
        for p in self.svm.proposals.iter().chain(&self.qoi.proposals) {
            p.validate().map_err(cfg_err)?;
        }
        if self.svm.k_folds < 2 {
            return Err(CliError::Config("svm.k_folds must be >= 2".into()));
        }
        dynqoi::svm::SvmParams {
            c: self.svm.c,
            tol: self.svm.tol,
            ..Default::default()
        }
        .validate()
        .map_err(cfg_err)?;
        self.qoi.mode.validate().map_err(cfg_err)?;
        if self.density.grid_n < 2 {
            return Err(CliError::Config("density.grid_n must be >= 2".into()));
        }
        if let Some(e) = &self.experiment {
            self.filter.validate(e.kind.times().len()).map_err(cfg_err)?;
        }
        Ok(())
    }

    /// SHA-256 of every semantic field; the output location is excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("output_dir");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Named configurations reproducing the benchmark experiments.
pub const PRESETS: [&str; 4] = ["oscillator", "hopf", "shock-6.5", "shock-9.5"];

pub fn preset(name: &str, output_dir: PathBuf) -> Result<PipelineConfig, CliError> {
    let filter = |start, end, n, max_knots| FilterConfig {
        time_start_idx: start,
        time_end_idx: end,
        num_filter_obs: n,
        tol: 5e-2,
        min_knots: 3,
        max_knots,
        optimizer_tol: 1e-8,
    };
    let (kind, probe, filter, k, n_qoi) = match name {
        "oscillator" => (ExperimentKind::Oscillator, None, filter(0, 500, 20, 12), 3, 2),
        "hopf" => (ExperimentKind::Hopf, None, filter(250, 650, 20, 12), 3, 2),
        // 10 / 999 spacing: t = 5 is index 499.5, t = 2.5 and 7.5 are 249.75 and 749.25
        "shock-6.5" => (ExperimentKind::Shock, Some(6.5), filter(0, 500, 500, 10), 2, 1),
        "shock-9.5" => (ExperimentKind::Shock, Some(9.5), filter(250, 749, 500, 10), 2, 1),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    let mut experiment = ExperimentConfig::defaults(kind);
    experiment.probe_x = probe;
    Ok(PipelineConfig {
        experiment: Some(experiment),
        inputs: None,
        filter,
        clustering: ClusteringConfig { k, n_init: 10 },
        svm: SvmConfig {
            proposals: svm_proposals(),
            k_folds: 10,
            c: 1.0,
            tol: 1e-3,
        },
        qoi: QoiConfig {
            mode: QoiMode::Fixed { n: n_qoi },
            proposals: default_proposals(),
        },
        density: DensityConfig { grid_n: grid_n() },
        seed: 2024,
        output_dir,
    })
}
