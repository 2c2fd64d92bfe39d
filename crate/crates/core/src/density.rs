//! Kernel density estimates on QoI samples, per-cluster density ratios and the
//! cluster-weighted update of the initial parameter density.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::timeseries::ParameterSampleSet;
use crate::{rng, Error, Result};

/// Predicted-density values below this give a zero ratio.
pub const DENSITY_UNDERFLOW: f64 = 1e-300;

/// Gaussian product-kernel density estimate with a diagonal bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    samples: Array2<f64>,
    weights: Vec<f64>,
    bandwidth: Vec<f64>,
}

impl Kde {
    /// Scott's rule `h_j = sd_j * n_eff^(-1/(d+4))`, where `n_eff` is the
    /// Kish effective sample size of the normalized weights.
    pub fn fit(samples: ArrayView2<f64>, weights: Option<&[f64]>) -> Result<Self> {
        let (n, d) = samples.dim();
        if n < 2 || d < 1 {
            return Err(Error::InsufficientData(format!(
                "a KDE needs >= 2 samples in >= 1 dimension, got {n} x {d}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("KDE samples".into()));
        }
        let w = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => normalize_weights(w, n)?,
        };
        let sum_w2: f64 = w.iter().map(|x| x * x).sum();
        let n_eff = 1.0 / sum_w2;
        let factor = n_eff.powf(-1.0 / (d as f64 + 4.0));
        let denom = 1.0 - sum_w2;
        let bandwidth = (0..d)
            .map(|j| {
                let col = samples.column(j);
                let mean: f64 = col.iter().zip(&w).map(|(x, wi)| x * wi).sum();
                let var: f64 = if denom > 0.0 {
                    col.iter().zip(&w).map(|(x, wi)| wi * (x - mean).powi(2)).sum::<f64>() / denom
                } else {
                    0.0
                };
                let (lo, hi) = col
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                let range = hi - lo;
                let floor = 1e-6 * if range > 0.0 { range } else { 1.0 };
                (var.sqrt() * factor).max(floor)
            })
            .collect();
        Ok(Self {
            samples: samples.to_owned(),
            weights: w,
            bandwidth,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pdf(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.pdf_unchecked(x))
    }

    fn pdf_unchecked(&self, x: ArrayView1<f64>) -> f64 {
        let d = self.dim();
        let norm: f64 = self.bandwidth.iter().product::<f64>()
            * (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0);
        let mut acc = 0.0;
        for (row, &w) in self.samples.outer_iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let mut q = 0.0;
            for j in 0..d {
                let z = (x[j] - row[j]) / self.bandwidth[j];
                q += z * z;
            }
            acc += w * (-0.5 * q).exp();
        }
        acc / norm
    }

    /// Density at every row of `points`.
    pub fn pdf_many(&self, points: ArrayView2<f64>) -> Result<Vec<f64>> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        Ok((0..points.nrows())
            .into_par_iter()
            .map(|i| self.pdf_unchecked(points.row(i)))
            .collect())
    }
}

fn normalize_weights(w: &[f64], n: usize) -> Result<Vec<f64>> {
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.len(),
        });
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::validation("KDE weights must be finite and non-negative"));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("KDE weights sum to zero".into()));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

/// A density on the real line, for TV and L1 comparisons.
pub trait UnivariateDensity {
    fn pdf(&self, x: f64) -> f64;

    /// How far mass may leak past the nominal support.
    fn tail_extent(&self) -> f64 {
        0.0
    }
}

/// One-dimensional KDE.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde1d(Kde);

impl Kde1d {
    pub fn fit(values: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        let s = ArrayView2::from_shape((values.len(), 1), values)
            .map_err(|e| Error::validation(e.to_string()))?;
        Ok(Self(Kde::fit(s, weights)?))
    }

    pub fn bandwidth(&self) -> f64 {
        self.0.bandwidth[0]
    }

    pub fn inner(&self) -> &Kde {
        &self.0
    }
}

impl UnivariateDensity for Kde1d {
    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf_unchecked(ArrayView1::from(std::slice::from_ref(&x)))
    }

    fn tail_extent(&self) -> f64 {
        3.0 * self.bandwidth()
    }
}

/// Beta(alpha, beta) density on [0, 1].
pub fn beta_pdf(z: f64, alpha: f64, beta: f64) -> f64 {
    if !(0.0..=1.0).contains(&z) {
        return 0.0;
    }
    let log_norm = ln_gamma(alpha + beta) - ln_gamma(alpha) - ln_gamma(beta);
    if z == 0.0 || z == 1.0 {
        let edge = if z == 0.0 { alpha } else { beta };
        return if edge < 1.0 {
            f64::INFINITY
        } else if edge == 1.0 {
            log_norm.exp()
        } else {
            0.0
        };
    }
    (log_norm + (alpha - 1.0) * z.ln() + (beta - 1.0) * (1.0 - z).ln()).exp()
}

/// Beta(alpha, beta) rescaled to [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBeta {
    pub alpha: f64,
    pub beta: f64,
    pub lo: f64,
    pub hi: f64,
}

impl UnivariateDensity for ScaledBeta {
    fn pdf(&self, x: f64) -> f64 {
        let w = self.hi - self.lo;
        beta_pdf((x - self.lo) / w, self.alpha, self.beta) / w
    }
}

/// Uniform density on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl UnivariateDensity for Uniform {
    fn pdf(&self, x: f64) -> f64 {
        if (self.lo..=self.hi).contains(&x) {
            1.0 / (self.hi - self.lo)
        } else {
            0.0
        }
    }
}

/// Closure adapter.
pub struct FnDensity<F: Fn(f64) -> f64>(pub F, pub f64);

impl<F: Fn(f64) -> f64> UnivariateDensity for FnDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    fn tail_extent(&self) -> f64 {
        self.1
    }
}

/// Integration interval: `support` widened by the larger tail extent.
pub fn comparison_support(
    p: &dyn UnivariateDensity,
    q: &dyn UnivariateDensity,
    support: (f64, f64),
) -> (f64, f64) {
    let ext = p.tail_extent().max(q.tail_extent());
    (support.0 - ext, support.1 + ext)
}

/// Trapezoid rule on `grid_n` uniform points.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, grid_n: usize) -> f64 {
    let h = (b - a) / (grid_n - 1) as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..grid_n - 1 {
        s += f(a + i as f64 * h);
    }
    s * h
}

fn check_interval(support: (f64, f64), grid_n: usize) -> Result<()> {
    if grid_n < 2 {
        return Err(Error::validation("grid_n must be >= 2"));
    }
    if !(support.0.is_finite() && support.1.is_finite() && support.0 < support.1) {
        return Err(Error::validation(format!(
            "degenerate integration interval [{}, {}]",
            support.0, support.1
        )));
    }
    Ok(())
}

/// `∫ |p - q|` over the extended support (ranges over [0, 2]).
pub fn l1_distance(
    p: &dyn UnivariateDensity,
    q: &dyn UnivariateDensity,
    support: (f64, f64),
    grid_n: usize,
) -> Result<f64> {
    check_interval(support, grid_n)?;
    let (a, b) = comparison_support(p, q, support);
    Ok(trapezoid(|x| (p.pdf(x) - q.pdf(x)).abs(), a, b, grid_n))
}

/// Total variation `0.5 ∫ |p - q|`, clipped to `[0, 1 + 1e-3]`.
pub fn tv_distance(
    p: &dyn UnivariateDensity,
    q: &dyn UnivariateDensity,
    support: (f64, f64),
    grid_n: usize,
) -> Result<f64> {
    Ok((0.5 * l1_distance(p, q, support, grid_n)?).clamp(0.0, 1.0 + 1e-3))
}

/// Ratios of the observed to the predicted QoI density at every predicted
/// QoI point of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRatios {
    pub ratios: Vec<f64>,
    /// Sample mean of the ratios; `None` when the cluster has too few
    /// observations for a density estimate.
    pub diagnostic: Option<f64>,
    pub n_pred: usize,
    pub n_obs: usize,
    /// Points where the predicted density underflowed.
    pub underflow_count: usize,
}

pub fn compute_ratios(pred_qoi: ArrayView2<f64>, obs_qoi: ArrayView2<f64>) -> Result<ClusterRatios> {
    let n_pred = pred_qoi.nrows();
    let n_obs = obs_qoi.nrows();
    if n_pred == 0 {
        return Err(Error::InsufficientData("no predicted samples in cluster".into()));
    }
    if n_obs < 2 {
        log::warn!("cluster has {n_obs} observed samples; its ratios are set to zero");
        return Ok(ClusterRatios {
            ratios: vec![0.0; n_pred],
            diagnostic: None,
            n_pred,
            n_obs,
            underflow_count: 0,
        });
    }
    if pred_qoi.ncols() != obs_qoi.ncols() {
        return Err(Error::DimensionMismatch {
            expected: pred_qoi.ncols(),
            got: obs_qoi.ncols(),
        });
    }
    let pred_kde = Kde::fit(pred_qoi, None)?;
    let obs_kde = Kde::fit(obs_qoi, None)?;
    let num = obs_kde.pdf_many(pred_qoi)?;
    let den = pred_kde.pdf_many(pred_qoi)?;
    let mut underflow_count = 0;
    let ratios: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(&o, &p)| {
            if p < DENSITY_UNDERFLOW {
                underflow_count += 1;
                0.0
            } else {
                o / p
            }
        })
        .collect();
    if underflow_count > 0 {
        log::warn!("{underflow_count} predicted QoI points had negligible predicted density");
    }
    let diagnostic = Some(ratios.iter().sum::<f64>() / n_pred as f64);
    Ok(ClusterRatios {
        ratios,
        diagnostic,
        n_pred,
        n_obs,
        underflow_count,
    })
}

/// Fraction of observations in each cluster (labels are zero-based).
pub fn cluster_weights(observed_labels: &[usize], k: usize) -> Result<Vec<f64>> {
    if observed_labels.is_empty() {
        return Err(Error::InsufficientData("no observed labels".into()));
    }
    let mut counts = vec![0usize; k];
    for &l in observed_labels {
        if l >= k {
            return Err(Error::validation(format!("label {l} out of range for {k} clusters")));
        }
        counts[l] += 1;
    }
    let n = observed_labels.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / n).collect())
}

/// Per-cluster summary of an inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub weight: f64,
    pub diagnostic: Option<f64>,
    pub n_pred: usize,
    pub n_obs: usize,
    pub underflow_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub clusters: Vec<ClusterSummary>,
    /// Weight `w_k * r_i / p_k` of every initial sample, with `p_k = N_k / N`
    /// the initial mass of cluster `k`.
    pub update_weights: Vec<f64>,
    pub labels: Vec<usize>,
}

/// Assembles per-sample update weights. `cluster_ratios[k].ratios` lists
/// the ratios of the samples labelled `k` in increasing sample order.
///
/// The predicted QoI density of a cluster is the push-forward of the initial
/// density restricted to that cluster and renormalized, so each cluster's
/// ratios are divided by its initial mass `N_k / N`. The updated mass of
/// cluster `k` is then `w_k` times its mean ratio.
pub fn updated_density(
    init: &ParameterSampleSet,
    labels: &[usize],
    cluster_ratios: &[ClusterRatios],
    weights: &[f64],
) -> Result<InversionResult> {
    let n = init.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let k = cluster_ratios.len();
    if weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: weights.len(),
        });
    }
    let mut cursor = vec![0usize; k];
    let mut u = Vec::with_capacity(n);
    for &l in labels {
        if l >= k {
            return Err(Error::validation(format!("label {l} out of range for {k} clusters")));
        }
        let r = cluster_ratios[l]
            .ratios
            .get(cursor[l])
            .copied()
            .ok_or_else(|| Error::validation(format!("too few ratios for cluster {l}")))?;
        cursor[l] += 1;
        u.push(weights[l] * r);
    }
    for (c, cr) in cursor.iter().zip(cluster_ratios) {
        if *c != cr.ratios.len() {
            return Err(Error::DimensionMismatch {
                expected: *c,
                got: cr.ratios.len(),
            });
        }
    }
    for (ui, &l) in u.iter_mut().zip(labels) {
        *ui *= n as f64 / cursor[l] as f64;
    }
    if !u.iter().any(|&x| x > 0.0) {
        return Err(Error::InsufficientData("every update weight is zero".into()));
    }
    let clusters = cluster_ratios
        .iter()
        .enumerate()
        .map(|(c, cr)| ClusterSummary {
            cluster: c,
            weight: weights[c],
            diagnostic: cr.diagnostic,
            n_pred: cr.n_pred,
            n_obs: cr.n_obs,
            underflow_count: cr.underflow_count,
        })
        .collect();
    Ok(InversionResult {
        clusters,
        update_weights: u,
        labels: labels.to_vec(),
    })
}

impl InversionResult {
    /// Weighted KDE of parameter `j` over the initial samples.
    pub fn updated_marginal(&self, init: &ParameterSampleSet, j: usize) -> Result<Kde1d> {
        let col = init.samples.column(j).to_vec();
        Kde1d::fit(&col, Some(&self.update_weights))
    }

    /// Updated probability of the event covering cluster `k`.
    pub fn event_probability(&self, k: usize) -> f64 {
        weighted_event_probability(&self.update_weights, &self.labels, k)
    }
}

/// `Σ_{i in k} w_i / Σ w_i`.
pub fn weighted_event_probability(weights: &[f64], labels: &[usize], k: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    let inside: f64 = weights
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == k)
        .map(|(w, _)| w)
        .sum();
    inside / total
}

/// Importance-sampling estimate `(1/N) Σ_{i in k} ρ_i` of an event's
/// probability under a target density, with `ρ_i` the target-to-sampling
/// density ratio at sample `i`.
pub fn importance_event_probability(density_ratio: &[f64], labels: &[usize], k: usize) -> f64 {
    let inside: f64 = density_ratio
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == k)
        .map(|(w, _)| w)
        .sum();
    inside / density_ratio.len() as f64
}

/// Accept sample `i` with probability `u_i / max u`.
pub fn rejection_sample(update_weights: &[f64], seed: u64) -> Result<Vec<usize>> {
    let max = update_weights.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::InsufficientData("no positive update weight".into()));
    }
    let mut rng = rng::seeded(seed);
    Ok(update_weights
        .iter()
        .enumerate()
        .filter_map(|(i, &u)| {
            let draw: f64 = rng.random();
            (draw < u / max).then_some(i)
        })
        .collect())
}
