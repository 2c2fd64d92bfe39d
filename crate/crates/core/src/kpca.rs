//! Standardization and kernel PCA feature extraction per cluster.
//!
//! The leading kernel principal components of a cluster's standardized
//! predicted data define its learned QoI; observed data are projected with
//! the same statistics and eigenvectors.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::{Kernel, KernelKind, KernelSpec};
use crate::linalg::sym_eigen;
use crate::{Error, Result};

/// Eigenvalues at or below this are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Constant columns get unit scale.
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InsufficientData("standardizing an empty cluster".into()));
        }
        let means: Vec<f64> = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let stds = x
            .axis_iter(Axis(1))
            .zip(&means)
            .map(|(col, m)| {
                let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
                let s = v.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - self.means[j]) / self.stds[j]);
        }
        Ok(out)
    }
}

/// Fits on the predicted rows and applies to both sets.
pub fn standardize_fit_apply(
    pred: ArrayView2<f64>,
    obs: ArrayView2<f64>,
) -> Result<(Standardizer, Array2<f64>, Array2<f64>)> {
    let s = Standardizer::fit(pred)?;
    let p = s.apply(pred)?;
    let o = s.apply(obs)?;
    Ok((s, p, o))
}

/// A fitted kernel PCA. Keeps every non-negative eigenvalue but only the
/// eigenvectors of retained components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiMap {
    pub spec: KernelSpec,
    pub kernel: Kernel,
    pub training_rows: Array2<f64>,
    /// Descending, clipped at zero.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector of component `k`.
    pub eigenvectors: Array2<f64>,
    /// Column means of the uncentered training kernel matrix.
    pub kernel_col_means: Vec<f64>,
    pub kernel_grand_mean: f64,
    pub n_qoi: usize,
}

impl QoiMap {
    pub fn n_positive(&self) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l > EIGEN_FLOOR).count()
    }

    /// Fraction of the positive spectrum carried by the first `n` components.
    pub fn explained_variance(&self, n: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().filter(|&&l| l > EIGEN_FLOOR).sum();
        if total <= 0.0 {
            return 0.0;
        }
        let part: f64 = self.eigenvalues.iter().take(n).filter(|&&l| l > EIGEN_FLOOR).sum();
        (part / total).min(1.0)
    }

    pub fn variance_explained(&self) -> f64 {
        self.explained_variance(self.n_qoi)
    }

    /// `(lambda_n - lambda_{n+1}) / sum(lambda)` for the selected `n`.
    pub fn spectral_gap(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().filter(|&&l| l > EIGEN_FLOOR).sum();
        let n = self.n_qoi;
        if n == 0 || total <= 0.0 {
            return 0.0;
        }
        let next = self.eigenvalues.get(n).copied().unwrap_or(0.0);
        (self.eigenvalues[n - 1] - next) / total
    }

    /// Keeps `n` components, dropping any with a non-positive eigenvalue.
    pub fn truncate(mut self, n: usize) -> Self {
        let usable = n.min(self.n_positive());
        if usable < n {
            log::warn!(
                "{} kernel: only {usable} of {n} components have positive eigenvalues",
                self.spec.kind
            );
        }
        let keep = usable.min(self.eigenvectors.ncols());
        self.eigenvectors = self.eigenvectors.slice(ndarray::s![.., ..keep]).to_owned();
        self.n_qoi = keep;
        self
    }

    /// QoI values of new standardized rows.
    pub fn transform(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.training_rows.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.training_rows.ncols(),
                got: y.ncols(),
            });
        }
        let mut k = self.kernel.matrix(y, self.training_rows.view())?;
        let n = self.training_rows.nrows() as f64;
        for mut row in k.outer_iter_mut() {
            let row_mean = row.sum() / n;
            for (j, v) in row.iter_mut().enumerate() {
                *v += self.kernel_grand_mean - row_mean - self.kernel_col_means[j];
            }
        }
        let mut out = k.dot(&self.eigenvectors.slice(ndarray::s![.., ..self.n_qoi]));
        for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col /= self.eigenvalues[c].sqrt();
        }
        Ok(out)
    }

    /// Scores of the training rows, `sqrt(lambda) v`.
    pub fn training_scores(&self) -> Array2<f64> {
        let mut out = self.eigenvectors.slice(ndarray::s![.., ..self.n_qoi]).to_owned();
        for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col *= self.eigenvalues[c].sqrt();
        }
        out
    }
}


/// Kernel PCA of standardized rows, keeping every positive component.
pub fn kpca_fit(y: ArrayView2<f64>, spec: &KernelSpec) -> Result<QoiMap> {
    let n = y.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("kernel PCA needs >= 2 rows, got {n}")));
    }
    let kernel = spec.resolve(y)?;
    let mut k = kernel.matrix(y, y)?;
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} kernel matrix", spec.kind)));
    }
    let col_means: Array1<f64> = k.mean_axis(Axis(0)).expect("n >= 2");
    let grand = col_means.mean().expect("n >= 2");
    // K is symmetric, so row means equal column means
    for ((i, j), v) in k.indexed_iter_mut() {
        *v += grand - col_means[i] - col_means[j];
    }
    let eig = sym_eigen(k.view())?;
    let values: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let n_pos = values.iter().take_while(|&&l| l > EIGEN_FLOOR).count();
    let mut vectors = eig.vectors.slice(ndarray::s![.., ..n_pos]).to_owned();
    for mut col in vectors.axis_iter_mut(Axis(1)) {
        let mut arg = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[arg].abs() {
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(QoiMap {
        spec: *spec,
        kernel,
        training_rows: y.to_owned(),
        eigenvalues: values,
        eigenvectors: vectors,
        kernel_col_means: col_means.to_vec(),
        kernel_grand_mean: grand,
        n_qoi: n_pos,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum QoiMode {
    /// Use exactly `n` components.
    Fixed { n: usize },
    /// Use the fewest components explaining at least `rate`.
    VarianceRate { rate: f64 },
}

impl QoiMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QoiMode::Fixed { n } if n == 0 => Err(Error::validation("QoI count must be >= 1")),
            QoiMode::VarianceRate { rate } if !(0.0..=1.0).contains(&rate) => Err(Error::validation(
                format!("variance rate must lie in [0, 1], got {rate}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Per-proposal outcome of a QoI search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScore {
    pub spec: KernelSpec,
    pub n_qoi: usize,
    pub explained: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoiSelection {
    pub map: QoiMap,
    pub selected: usize,
    pub scores: Vec<ProposalScore>,
}

fn min_components(map: &QoiMap, rate: f64) -> Option<usize> {
    (1..=map.n_positive()).find(|&n| map.explained_variance(n) >= rate - 1e-12)
}

/// Fits every proposal and keeps the best one for `mode`.
pub fn select_qoi_map(y_std: ArrayView2<f64>, proposals: &[KernelSpec], mode: QoiMode) -> Result<QoiSelection> {
    if proposals.is_empty() {
        return Err(Error::validation("no kPCA proposals"));
    }
    mode.validate()?;
    let fits: Vec<QoiMap> = proposals
        .par_iter()
        .map(|p| kpca_fit(y_std, p))
        .collect::<Result<_>>()?;
    let scores: Vec<ProposalScore> = fits
        .iter()
        .map(|m| {
            let n = match mode {
                QoiMode::Fixed { n } => n,
                QoiMode::VarianceRate { rate } => min_components(m, rate).unwrap_or(usize::MAX),
            };
            ProposalScore {
                spec: m.spec,
                n_qoi: n,
                explained: if n == usize::MAX { m.explained_variance(m.n_positive()) } else { m.explained_variance(n) },
            }
        })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best];
        let better = match mode {
            QoiMode::Fixed { .. } => s.explained > b.explained,
            QoiMode::VarianceRate { .. } => {
                s.n_qoi < b.n_qoi || (s.n_qoi == b.n_qoi && s.explained > b.explained)
            }
        };
        if better {
            best = i;
        }
    }
    if scores[best].n_qoi == usize::MAX {
        let rate = match mode {
            QoiMode::VarianceRate { rate } => rate,
            QoiMode::Fixed { .. } => unreachable!(),
        };
        return Err(Error::VarianceRateUnreachable {
            rate,
            best: scores.iter().map(|s| s.explained).collect(),
        });
    }
    let n = scores[best].n_qoi;
    let map = fits.into_iter().nth(best).expect("index in range").truncate(n);
    Ok(QoiSelection {
        map,
        selected: best,
        scores,
    })
}

/// Learned QoI of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterQoi {
    pub standardizer: Standardizer,
    pub selection: QoiSelection,
    pub predicted: Array2<f64>,
    pub observed: Array2<f64>,
}

/// Standardizes, selects a kernel PCA and transforms both sets.
pub fn learn_qois_and_transform(
    pred: ArrayView2<f64>,
    obs: ArrayView2<f64>,
    proposals: &[KernelSpec],
    mode: QoiMode,
) -> Result<ClusterQoi> {
    let (standardizer, p, o) = standardize_fit_apply(pred, obs)?;
    let selection = select_qoi_map(p.view(), proposals, mode)?;
    let predicted = selection.map.training_scores();
    let observed = if o.nrows() > 0 {
        selection.map.transform(o.view())?
    } else {
        Array2::zeros((0, selection.map.n_qoi))
    };
    Ok(ClusterQoi {
        standardizer,
        selection,
        predicted,
        observed,
    })
}

/// Proposal order used when none is configured.
pub fn default_proposals() -> Vec<KernelSpec> {
    [
        KernelKind::Linear,
        KernelKind::Rbf,
        KernelKind::Sigmoid,
        KernelKind::Poly,
        KernelKind::Cosine,
    ]
    .into_iter()
    .map(KernelSpec::new)
    .collect()
}
