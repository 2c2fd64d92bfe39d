//! The three benchmark experiments: predicted and observed ensembles with
//! their parameter samples.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::burgers::{burgers_series, BurgersSetup};
use super::oscillator::{oscillator_solution, OscillatorParams};
use super::selkov::{default_options, selkov_series, SelkovParams};
use crate::rng::child_seed;
use crate::timeseries::{
    linspace, sample_parameters, EnsembleKind, NoiseModel, ParamDistribution, ParameterSampleSet,
    ParameterSpec, TimeGrid, TimeSeriesEnsemble,
};
use crate::{Error, Result};

const PREDICTED_PARAMS: u64 = 1;
const OBSERVED_PARAMS: u64 = 2;
const OBSERVED_NOISE: u64 = 3;
const PREDICTED_NOISE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Oscillator,
    Hopf,
    Shock,
}

impl ExperimentKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "oscillator" => Ok(Self::Oscillator),
            "hopf" => Ok(Self::Hopf),
            "shock" => Ok(Self::Shock),
            other => Err(Error::UnknownExperiment(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Oscillator => "oscillator",
            Self::Hopf => "hopf",
            Self::Shock => "shock",
        }
    }

    /// Raw measurement times.
    pub fn times(&self) -> Vec<f64> {
        match self {
            Self::Oscillator => (0..=500).map(|j| 1.0 + 0.01 * j as f64).collect(),
            Self::Hopf => (0..=650).map(|j| 0.01 * j as f64).collect(),
            Self::Shock => linspace(0.0, 10.0, 1000),
        }
    }

    /// Parameter names and bounds.
    pub fn parameter_bounds(&self) -> Vec<(&'static str, f64, f64)> {
        match self {
            Self::Oscillator => vec![("c", 0.1, 1.0), ("omega0", 0.5, 1.0)],
            Self::Hopf => vec![("a", 0.01, 0.124), ("b", 0.05, 1.5)],
            Self::Shock => vec![("a", 0.75, 3.0)],
        }
    }

    pub fn specs(&self, distribution: ParamDistribution) -> Vec<ParameterSpec> {
        self.parameter_bounds()
            .into_iter()
            .map(|(n, lo, hi)| ParameterSpec::new(n, lo, hi, distribution))
            .collect()
    }
}

/// Which distribution the observed parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservedSource {
    /// Independent Beta(2, 2) on the parameter bounds.
    #[default]
    DataGenerating,
    /// The same uniform distribution as the predictions.
    Initial,
}

impl ObservedSource {
    pub fn distribution(&self) -> ParamDistribution {
        match self {
            Self::DataGenerating => ParamDistribution::Beta { alpha: 2.0, beta: 2.0 },
            Self::Initial => ParamDistribution::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_observed: usize,
    pub n_predicted: usize,
    pub sigma: f64,
    /// Add the same measurement noise to the predicted series.
    pub noise_on_predicted: bool,
    /// Probe location for the shock experiment.
    #[serde(default)]
    pub probe_x: Option<f64>,
    #[serde(default)]
    pub observed_source: ObservedSource,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (n_observed, n_predicted, sigma, noise_on_predicted, probe_x) = match kind {
            ExperimentKind::Oscillator => (300, 2000, 0.25, false, None),
            ExperimentKind::Hopf => (500, 3000, 0.0125, false, None),
            ExperimentKind::Shock => (500, 1000, 0.025, true, Some(6.5)),
        };
        Self {
            kind,
            n_observed,
            n_predicted,
            sigma,
            noise_on_predicted,
            probe_x,
            observed_source: ObservedSource::DataGenerating,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_observed == 0 || self.n_predicted == 0 {
            return Err(Error::validation("sample counts must be positive"));
        }
        NoiseModel::new(self.sigma, 0)?;
        if self.kind == ExperimentKind::Shock {
            let x = self.probe_x.ok_or_else(|| Error::validation("shock experiment needs probe_x"))?;
            BurgersSetup::new(0.75, x).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub predicted: TimeSeriesEnsemble,
    pub predicted_params: ParameterSampleSet,
    pub observed: TimeSeriesEnsemble,
    pub observed_params: ParameterSampleSet,
}

impl ExperimentData {
    /// Writes `predicted.csv`, `predicted_params.csv`, `observed.csv` and
    /// `observed_params.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.predicted.save(dir.join("predicted.csv"))?;
        self.predicted_params.save(dir.join("predicted_params.csv"))?;
        self.observed.save(dir.join("observed.csv"))?;
        self.observed_params.save(dir.join("observed_params.csv"))?;
        Ok(())
    }
}

/// Noise-free model output for every parameter row.
pub fn simulate(cfg: &ExperimentConfig, params: &ParameterSampleSet, times: &[f64]) -> Result<Array2<f64>> {
    let rows: Vec<Result<Vec<f64>>> = (0..params.len())
        .into_par_iter()
        .map(|i| {
            let p = params.samples.row(i);
            let out = match cfg.kind {
                ExperimentKind::Oscillator => Ok(oscillator_solution(&OscillatorParams::new(p[0], p[1]), times)),
                ExperimentKind::Hopf => selkov_series(&SelkovParams::new(p[0], p[1]), times, &default_options()),
                ExperimentKind::Shock => {
                    let x = cfg.probe_x.unwrap_or(6.5);
                    burgers_series(&BurgersSetup::new(p[0], x), times)
                }
            };
            out.map_err(|e| e.in_series(i))
        })
        .collect();
    let mut values = Array2::zeros((params.len(), times.len()));
    for (i, row) in rows.into_iter().enumerate() {
        for (v, x) in values.row_mut(i).iter_mut().zip(row?) {
            *v = x;
        }
    }
    Ok(values)
}

pub fn generate_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentData> {
    cfg.validate()?;
    let times = cfg.kind.times();
    let grid = TimeGrid::new(times.clone())?;

    let predicted_params = sample_parameters(
        &cfg.kind.specs(ParamDistribution::Uniform),
        cfg.n_predicted,
        child_seed(seed, PREDICTED_PARAMS),
    )?;
    let observed_params = sample_parameters(
        &cfg.kind.specs(cfg.observed_source.distribution()),
        cfg.n_observed,
        child_seed(seed, OBSERVED_PARAMS),
    )?;

    let mut pred = simulate(cfg, &predicted_params, &times)?;
    let mut obs = simulate(cfg, &observed_params, &times)?;
    NoiseModel::new(cfg.sigma, child_seed(seed, OBSERVED_NOISE))?.apply_in_place(&mut obs);
    if cfg.noise_on_predicted {
        NoiseModel::new(cfg.sigma, child_seed(seed, PREDICTED_NOISE))?.apply_in_place(&mut pred);
    }
    Ok(ExperimentData {
        predicted: TimeSeriesEnsemble::new(grid.clone(), pred, EnsembleKind::Predicted)?,
        predicted_params,
        observed: TimeSeriesEnsemble::new(grid, obs, EnsembleKind::Observed)?,
        observed_params,
    })
}
