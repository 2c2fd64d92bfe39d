//! Ensembles of time series, parameter sample sets, CSV interchange and the
//! additive Gaussian noise model.
//!
//! Ensemble CSV layout: the first row is `t,<t_1>,...,<t_n>`, every further
//! row is `<series_id>,<y_1>,...,<y_n>`. Parameter CSV layout: a header of
//! parameter names and one row per sample.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Strictly increasing observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::validation(format!(
                "time grid needs at least 2 points, got {}",
                times.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::validation(format!("non-finite time stamp {t}")));
        }
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::validation(format!(
                "time grid not strictly increasing at index {}: {} then {}",
                w + 1,
                times[w],
                times[w + 1]
            )));
        }
        Ok(Self { times })
    }

    /// `n` equally spaced points from `start` to `end` inclusive.
    pub fn linspace(start: f64, end: f64, n: usize) -> Result<Self> {
        Self::new(linspace(start, end, n))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid point closest to `t`; ties go to the lower index.
    pub fn nearest_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &ti) in self.times.iter().enumerate() {
            if (ti - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

/// `n` equally spaced values on `[start, end]`, endpoints exact.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { end } else { start + step * i as f64 })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Predicted,
    Observed,
}

/// `N` series sampled on a shared [`TimeGrid`]; row `i` is series `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesEnsemble {
    pub grid: TimeGrid,
    pub values: Array2<f64>,
    pub kind: EnsembleKind,
    pub ids: Vec<String>,
}

impl TimeSeriesEnsemble {
    /// Builds an ensemble with ids `0..N`.
    pub fn new(grid: TimeGrid, values: Array2<f64>, kind: EnsembleKind) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::with_ids(grid, values, kind, ids)
    }

    pub fn with_ids(
        grid: TimeGrid,
        values: Array2<f64>,
        kind: EnsembleKind,
        ids: Vec<String>,
    ) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.ncols(),
            });
        }
        if ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                got: ids.len(),
            });
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite entry {v} at series {i}, time index {j}"
            )));
        }
        Ok(Self {
            grid,
            values,
            kind,
            ids,
        })
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.values.ncols()
    }

    pub fn series(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        self.write_csv(file)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(w, "t", self.grid.times(), &self.ids, &self.values)
    }
}

pub(crate) fn write_matrix_csv<W: Write>(
    w: W,
    corner: &str,
    header: &[f64],
    ids: &[String],
    values: &Array2<f64>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut record = Vec::with_capacity(header.len() + 1);
    record.push(corner.to_string());
    record.extend(header.iter().map(|t| t.to_string()));
    wtr.write_record(&record)?;
    for (id, row) in ids.iter().zip(values.axis_iter(Axis(0))) {
        record.clear();
        record.push(id.clone());
        record.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Raw contents of a matrix CSV: header times, row ids and values.
pub(crate) struct MatrixCsv {
    pub header: Vec<f64>,
    pub ids: Vec<String>,
    pub values: Array2<f64>,
}

pub(crate) fn read_matrix_csv(path: &Path) -> Result<MatrixCsv> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let head = records
        .next()
        .ok_or_else(|| fmt("empty file".into()))?
        .map_err(|e| fmt(e.to_string()))?;
    if head.len() < 2 {
        return Err(fmt("header must hold a label and at least one time".into()));
    }
    let header = head
        .iter()
        .skip(1)
        .map(|s| parse_f64(s.trim()).map_err(|m| fmt(format!("header: {m}"))))
        .collect::<Result<Vec<_>>>()?;
    let width = header.len();
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    // Rows carry a leading series id, or none at all; every row must agree.
    let mut row_len = None;
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let expected = *row_len.get_or_insert(rec.len());
        if rec.len() != expected || !(expected == width || expected == width + 1) {
            return Err(fmt(format!(
                "row {} has {} fields, expected {} (header has {} times)",
                line + 2,
                rec.len(),
                if expected == width || expected == width + 1 { expected } else { width + 1 },
                width
            )));
        }
        let has_id = expected == width + 1;
        ids.push(if has_id { rec[0].trim().to_string() } else { line.to_string() });
        for s in rec.iter().skip(usize::from(has_id)) {
            flat.push(parse_f64(s.trim()).map_err(|m| fmt(format!("row {}: {m}", line + 2)))?);
        }
    }
    let values = Array2::from_shape_vec((ids.len(), width), flat)
        .map_err(|e| fmt(e.to_string()))?;
    Ok(MatrixCsv {
        header,
        ids,
        values,
    })
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .map_err(|_| format!("cannot parse `{s}` as a number"))
}

/// Reads an ensemble CSV.
pub fn load_ensemble(path: impl AsRef<Path>, kind: EnsembleKind) -> Result<TimeSeriesEnsemble> {
    let m = read_matrix_csv(path.as_ref())?;
    let grid = TimeGrid::new(m.header)?;
    TimeSeriesEnsemble::with_ids(grid, m.values, kind, m.ids)
}

/// Additive i.i.d. `N(0, sigma^2)` measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::validation(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    /// Perturbs every entry of `values` in place, row-major order.
    pub fn apply_in_place(&self, values: &mut Array2<f64>) {
        if self.sigma == 0.0 {
            return;
        }
        let mut rng = rng::seeded(self.seed);
        for v in values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += self.sigma * z;
        }
    }
}

/// Returns a copy of `ens` with independent `N(0, sigma^2)` noise added to
/// every entry. `sigma = 0` returns the input unchanged.
pub fn add_noise(ens: &TimeSeriesEnsemble, noise: &NoiseModel) -> TimeSeriesEnsemble {
    let mut out = ens.clone();
    noise.apply_in_place(&mut out.values);
    out
}

/// Sampling distribution of one parameter on its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution {
    Uniform,
    /// Beta(alpha, beta) mapped affinely onto the bounds.
    Beta { alpha: f64, beta: f64 },
}

impl ParamDistribution {
    /// Density on `[lo, hi]`, zero outside.
    pub fn pdf(&self, x: f64, lo: f64, hi: f64) -> f64 {
        if x < lo || x > hi {
            return 0.0;
        }
        let width = hi - lo;
        match *self {
            ParamDistribution::Uniform => 1.0 / width,
            ParamDistribution::Beta { alpha, beta } => {
                let z = (x - lo) / width;
                crate::density::beta_pdf(z, alpha, beta) / width
            }
        }
    }

    pub fn mean(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            ParamDistribution::Uniform => 0.5 * (lo + hi),
            ParamDistribution::Beta { alpha, beta } => lo + (hi - lo) * alpha / (alpha + beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub distribution: ParamDistribution,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, distribution: ParamDistribution) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
            distribution,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::validation(format!(
                "parameter `{}` has invalid bounds [{}, {}]",
                self.name, self.lo, self.hi
            )));
        }
        if let ParamDistribution::Beta { alpha, beta } = self.distribution {
            if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                return Err(Error::validation(format!(
                    "parameter `{}`: beta shape parameters must be positive, got ({alpha}, {beta})",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// `N` samples of `p` named parameters, each inside its bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSampleSet {
    pub names: Vec<String>,
    pub samples: Array2<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterSampleSet {
    pub fn new(names: Vec<String>, samples: Array2<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let p = names.len();
        if p == 0 {
            return Err(Error::validation("parameter set needs at least one parameter"));
        }
        if samples.ncols() != p || bounds.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: if samples.ncols() != p {
                    samples.ncols()
                } else {
                    bounds.len()
                },
            });
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if let Some(v) = samples.column(j).iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::validation(format!(
                    "sample {v} of `{}` outside bounds [{lo}, {hi}]",
                    names[j]
                )));
            }
        }
        Ok(Self {
            names,
            samples,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path.as_ref())?;
        wtr.write_record(&self.names)?;
        for row in self.samples.axis_iter(Axis(0)) {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads a parameter CSV. Without explicit `bounds` the per-column sample
/// range is used.
pub fn load_parameters(
    path: impl AsRef<Path>,
    bounds: Option<Vec<(f64, f64)>>,
) -> Result<ParameterSampleSet> {
    let path = path.as_ref();
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| fmt(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let p = names.len();
    let mut flat = Vec::new();
    let mut n = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        if rec.len() != p {
            return Err(fmt(format!("row {} has {} values, expected {p}", line + 2, rec.len())));
        }
        for s in rec.iter() {
            flat.push(parse_f64(s.trim()).map_err(|m| fmt(format!("row {}: {m}", line + 2)))?);
        }
        n += 1;
    }
    let samples = Array2::from_shape_vec((n, p), flat).map_err(|e| fmt(e.to_string()))?;
    let bounds = match bounds {
        Some(b) => b,
        None => samples
            .axis_iter(Axis(1))
            .map(|c| {
                c.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .collect(),
    };
    ParameterSampleSet::new(names, samples, bounds)
}

/// Draws `count` i.i.d. samples from independent per-parameter
/// distributions. Beta variates are `X / (X + Y)` with `X ~ Gamma(alpha)`,
/// `Y ~ Gamma(beta)`.
pub fn sample_parameters(specs: &[ParameterSpec], count: usize, seed: u64) -> Result<ParameterSampleSet> {
    if specs.is_empty() {
        return Err(Error::validation("at least one parameter spec required"));
    }
    for s in specs {
        s.validate()?;
    }
    let p = specs.len();
    let mut samples = Array2::zeros((count, p));
    for (j, spec) in specs.iter().enumerate() {
        let mut rng = rng::substream(seed, j as u64);
        let width = spec.hi - spec.lo;
        match spec.distribution {
            ParamDistribution::Uniform => {
                for i in 0..count {
                    let u: f64 = rng.random();
                    samples[[i, j]] = spec.lo + width * u;
                }
            }
            ParamDistribution::Beta { alpha, beta } => {
                let ga = Gamma::new(alpha, 1.0).map_err(|e| Error::validation(e.to_string()))?;
                let gb = Gamma::new(beta, 1.0).map_err(|e| Error::validation(e.to_string()))?;
                for i in 0..count {
                    let x: f64 = ga.sample(&mut rng);
                    let y: f64 = gb.sample(&mut rng);
                    let z = if x + y > 0.0 { x / (x + y) } else { 0.5 };
                    samples[[i, j]] = (spec.lo + width * z).clamp(spec.lo, spec.hi);
                }
            }
        }
    }
    ParameterSampleSet::new(
        specs.iter().map(|s| s.name.clone()).collect(),
        samples,
        specs.iter().map(|s| (s.lo, s.hi)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_minimal_file() {
        let f = write_tmp("t,0.0,0.5,1.0\n3.0,2.9,2.7\n");
        let ens = load_ensemble(f.path(), EnsembleKind::Observed).unwrap();
        assert_eq!(ens.n_series(), 1);
        assert_eq!(ens.n_times(), 3);
        assert_eq!(ens.ids, vec!["0".to_string()]);
        let f = write_tmp("t,0.0,0.5,1.0\n0,3.0,2.9,2.7\n");
        let ens = load_ensemble(f.path(), EnsembleKind::Observed).unwrap();
        assert_eq!(ens.values.row(0).to_vec(), vec![3.0, 2.9, 2.7]);
    }

    #[test]
    fn ragged_rows_are_format_errors() {
        let f = write_tmp("t,0.0,0.5,1.0\n0,1,2,3\n1,1,2\n");
        let err = load_ensemble(f.path(), EnsembleKind::Predicted).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }

    #[test]
    fn non_increasing_grid_is_validation_error() {
        let f = write_tmp("t,0.0,0.0,1.0\n0,1,2,3\n");
        let err = load_ensemble(f.path(), EnsembleKind::Predicted).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn non_finite_entries_are_validation_errors() {
        let f = write_tmp("t,0.0,0.5,1.0\n0,1,NaN,3\n");
        let err = load_ensemble(f.path(), EnsembleKind::Predicted).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let grid = TimeGrid::linspace(0.0, 1.0, 5).unwrap();
        let vals = Array2::from_shape_fn((3, 5), |(i, j)| (i * 5 + j) as f64 * 0.1);
        let ens = TimeSeriesEnsemble::new(grid, vals, EnsembleKind::Predicted).unwrap();
        let out = add_noise(&ens, &NoiseModel::new(0.0, 7).unwrap());
        assert_eq!(out, ens);
    }

    #[test]
    fn noise_variance_and_determinism() {
        let grid = TimeGrid::linspace(1.0, 6.0, 501).unwrap();
        let vals = Array2::from_elem((100, 501), 1.5);
        let ens = TimeSeriesEnsemble::new(grid, vals, EnsembleKind::Observed).unwrap();
        let noise = NoiseModel::new(0.25, 1234).unwrap();
        let a = add_noise(&ens, &noise);
        let b = add_noise(&ens, &noise);
        assert_eq!(a.values, b.values);
        let diff = &a.values - &ens.values;
        let n = diff.len() as f64;
        let mean = diff.sum() / n;
        let var = diff.mapv(|d| (d - mean).powi(2)).sum() / (n - 1.0);
        assert!((var - 0.0625).abs() < 0.1 * 0.0625, "variance {var}");
        assert!(mean.abs() < 5.0 * 0.25 / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn sample_means() {
        let n = 100_000;
        let u = sample_parameters(&[ParameterSpec::new("u", 0.0, 1.0, ParamDistribution::Uniform)], n, 1).unwrap();
        assert!((u.samples.mean().unwrap() - 0.5).abs() < 0.01);
        let b = sample_parameters(
            &[ParameterSpec::new("c", 0.1, 1.0, ParamDistribution::Beta { alpha: 2.0, beta: 2.0 })],
            n,
            2,
        )
        .unwrap();
        assert!((b.samples.mean().unwrap() - 0.55).abs() < 0.01);
        let b = sample_parameters(
            &[ParameterSpec::new("x", 0.0, 1.0, ParamDistribution::Beta { alpha: 5.0, beta: 2.0 })],
            n,
            3,
        )
        .unwrap();
        assert!((b.samples.mean().unwrap() - 5.0 / 7.0).abs() < 0.01);
    }

    #[test]
    fn invalid_beta_shape_rejected() {
        let spec = ParameterSpec::new("x", 0.0, 1.0, ParamDistribution::Beta { alpha: 0.0, beta: 2.0 });
        assert!(matches!(sample_parameters(&[spec], 10, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = TimeGrid::new(vec![0.1, 0.2 + 1e-17, 1.0 / 3.0]).unwrap();
        let vals = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 + 1.0).ln() * std::f64::consts::PI / (j as f64 + 7.0));
        let ens = TimeSeriesEnsemble::new(grid, vals, EnsembleKind::Predicted).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        ens.save(f.path()).unwrap();
        let back = load_ensemble(f.path(), EnsembleKind::Predicted).unwrap();
        assert_eq!(back, ens);

        let params = sample_parameters(
            &[
                ParameterSpec::new("c", 0.1, 1.0, ParamDistribution::Uniform),
                ParameterSpec::new("w", 0.5, 1.0, ParamDistribution::Beta { alpha: 2.0, beta: 2.0 }),
            ],
            50,
            9,
        )
        .unwrap();
        params.save(f.path()).unwrap();
        let back = load_parameters(f.path(), Some(params.bounds.clone())).unwrap();
        assert_eq!(back, params);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn samples_stay_in_bounds(
            lo in -10.0f64..10.0,
            width in 1e-3f64..20.0,
            alpha in 0.2f64..8.0,
            beta in 0.2f64..8.0,
            use_beta in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let dist = if use_beta { ParamDistribution::Beta { alpha, beta } } else { ParamDistribution::Uniform };
            let spec = ParameterSpec::new("x", lo, lo + width, dist);
            let s = sample_parameters(&[spec], 200, seed).unwrap();
            prop_assert!(s.samples.iter().all(|v| *v >= lo && *v <= lo + width));
        }
    }
}
