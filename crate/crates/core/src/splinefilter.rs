//! Adaptive free-knot linear spline filtering.
//!
//! Each raw series is approximated on a time window by the least-squares
//! piecewise-linear spline with `m` knots, where the two end knots are pinned
//! to the window endpoints and both the interior knot locations and all knot
//! values are optimized. The knot count grows from `min_knots` until two
//! successive splines, sampled on the uniform filter grid, agree to a relative
//! 1-norm tolerance. The samples of the last spline are the filtered data.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::spd_solve;
use crate::timeseries::{self, linspace, TimeSeriesEnsemble};
use crate::{Error, Result};

/// Piecewise-linear interpolant through `(knot_times[k], knot_values[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    knot_times: Vec<f64>,
    knot_values: Vec<f64>,
}

impl SplineModel {
    pub fn new(knot_times: Vec<f64>, knot_values: Vec<f64>) -> Result<Self> {
        let m = knot_times.len();
        if m < 2 || knot_values.len() != m {
            return Err(Error::validation(format!(
                "spline needs >= 2 knots with one value each, got {} times and {} values",
                m,
                knot_values.len()
            )));
        }
        if knot_times
            .iter()
            .chain(&knot_values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("spline knots".into()));
        }
        if knot_times.windows(2).any(|w| w[1] < w[0]) || knot_times[0] >= knot_times[m - 1] {
            return Err(Error::validation("knot times must be sorted with t_1 < t_m"));
        }
        Ok(Self {
            knot_times,
            knot_values,
        })
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.knot_values
    }

    pub fn n_knots(&self) -> usize {
        self.knot_times.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knot_times[0], self.knot_times[self.n_knots() - 1])
    }

    /// Value at `t`; errors outside the knot span.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&t) {
            return Err(Error::validation(format!(
                "t = {t} outside spline domain [{lo}, {hi}]"
            )));
        }
        Ok(eval_knots(&self.knot_times, &self.knot_values, t))
    }
}

/// Segment `s` such that `times[s] <= t <= times[s + 1]`, preferring the
/// leftmost non-degenerate one.
#[inline]
fn segment_of(times: &[f64], t: f64) -> usize {
    let m = times.len();
    let idx = times.partition_point(|&k| k <= t);
    // idx is the first knot strictly right of t
    idx.clamp(1, m - 1) - 1
}

#[inline]
fn eval_knots(times: &[f64], values: &[f64], t: f64) -> f64 {
    let s = segment_of(times, t);
    let (t0, t1) = (times[s], times[s + 1]);
    let dt = t1 - t0;
    if dt <= 0.0 {
        return values[s + 1];
    }
    let w = (t - t0) / dt;
    (1.0 - w) * values[s] + w * values[s + 1]
}

/// Stopping rules for the knot optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop when an accepted step lowers the residual sum of squares by less
    /// than this fraction.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub spline: SplineModel,
    pub sse: f64,
    pub iterations: usize,
}

/// Least-squares `m`-knot linear spline through `(times, values)` with the end
/// knots pinned to the first and last time.
///
/// Interior knots start uniformly spaced with values interpolated from the
/// data, then knot times and all values are refined together by a projected
/// Levenberg-Marquardt iteration. Interior knots are kept inside the window
/// and sorted after every step; knots closer than `1e-12 * window` are pushed
/// one grid spacing apart. Once converged, up to `m - 2` relocation passes move
/// the least useful knot to the worst-fit point and keep the result only when
/// the residual drops.
pub fn fit_spline(times: &[f64], values: &[f64], m: usize, opts: &FitOptions) -> Result<SplineFit> {
    let n = times.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if m < 2 {
        return Err(Error::validation("a spline needs at least 2 knots"));
    }
    if n < 2 * m {
        return Err(Error::WindowTooShort { len: n, knots: m });
    }
    let t_lo = times[0];
    let t_hi = times[n - 1];
    let span = t_hi - t_lo;
    if !(span > 0.0) {
        return Err(Error::validation("window must have positive duration"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spline data".into()));
    }
    let grid_h = span / (n - 1) as f64;
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();

    let mut knots: Vec<f64> = linspace(t_lo, t_hi, m);
    let mut vals: Vec<f64> = knots.iter().map(|&k| interp_data(times, values, k)).collect();
    let (mut sse, mut iterations) = refine(times, values, &mut knots, &mut vals, opts, grid_h)?;

    // Relocation passes: the knot that costs least to drop is moved to the
    // worst-fit data point and the fit refined again; kept only if it helps.
    for _ in 0..m - 2 {
        if sse <= 1e-28 * sum_sq {
            break;
        }
        let Some((mut k2, mut v2)) = relocate_weakest_knot(times, values, &knots, &vals, grid_h) else {
            break;
        };
        let (sse2, it2) = refine(times, values, &mut k2, &mut v2, opts, grid_h)?;
        iterations += it2;
        if sse2 < sse * (1.0 - 1e-6) {
            knots = k2;
            vals = v2;
            sse = sse2;
        } else {
            break;
        }
    }

    let spline = SplineModel::new(knots, vals)?;
    Ok(SplineFit {
        spline,
        sse,
        iterations,
    })
}

/// Projected Levenberg-Marquardt refinement of knot times and values in
/// place. Returns the residual sum of squares and the iteration count.
fn refine(
    times: &[f64],
    values: &[f64],
    knots: &mut Vec<f64>,
    vals: &mut Vec<f64>,
    opts: &FitOptions,
    grid_h: f64,
) -> Result<(f64, usize)> {
    let m = knots.len();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    let mut sse = sum_sq_residuals(times, values, knots, vals);
    let n_par = 2 * m - 2;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jtj = Array2::<f64>::zeros((n_par, n_par));
    let mut jtr = Array1::<f64>::zeros(n_par);

    while iterations < opts.max_iter {
        if sse <= 1e-28 * sum_sq {
            break;
        }
        iterations += 1;
        normal_equations(times, values, knots, vals, &mut jtj, &mut jtr);
        let trace_mean = (0..n_par).map(|i| jtj[[i, i]]).sum::<f64>() / n_par as f64;
        let floor = 1e-12 * trace_mean.max(f64::MIN_POSITIVE);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n_par {
                a[[i, i]] += lambda * jtj[[i, i]].max(floor);
            }
            let Some(step) = spd_solve(&a, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let (trial_knots, trial_vals) = apply_step(knots, vals, &step, grid_h);
            let trial_sse = sum_sq_residuals(times, values, &trial_knots, &trial_vals);
            if !trial_sse.is_finite() {
                return Err(Error::NonFinite("spline optimizer iterate".into()));
            }
            if trial_sse < sse {
                let decrease = sse - trial_sse;
                *knots = trial_knots;
                *vals = trial_vals;
                sse = trial_sse;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if decrease <= opts.rel_tol * (sse + decrease) {
                    return Ok((sse, iterations));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok((sse, iterations))
}

/// Candidate spline with the cheapest interior knot (by residual increase
/// when dropped) moved to where a single hat function best explains the
/// remaining residual. `None` when there is no interior knot or no free data
/// point.
fn relocate_weakest_knot(
    times: &[f64],
    values: &[f64],
    knots: &[f64],
    vals: &[f64],
    grid_h: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = knots.len();
    if m < 3 {
        return None;
    }
    let weakest = (1..m - 1)
        .map(|k| {
            let mut kt = knots.to_vec();
            let mut kv = vals.to_vec();
            kt.remove(k);
            kv.remove(k);
            (k, sum_sq_residuals(times, values, &kt, &kv))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))?
        .0;
    let mut kt = knots.to_vec();
    let mut kv = vals.to_vec();
    kt.remove(weakest);
    kv.remove(weakest);

    // prefix sums of 1, t, t^2, r, t*r for O(1) hat projections
    let n = times.len();
    let mut pre = vec![[0.0f64; 5]; n + 1];
    for (i, (&t, &y)) in times.iter().zip(values).enumerate() {
        let r = y - eval_knots(&kt, &kv, t);
        let p = pre[i];
        pre[i + 1] = [p[0] + 1.0, p[1] + t, p[2] + t * t, p[3] + r, p[4] + t * r];
    }
    let range = |lo: usize, hi: usize| -> [f64; 5] {
        let (a, b) = (pre[hi], pre[lo]);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3], a[4] - b[4]]
    };

    let mut best: Option<(f64, f64, f64)> = None;
    for s in 0..kt.len() - 1 {
        let (a, b) = (kt[s], kt[s + 1]);
        let seg_lo = times.partition_point(|&t| t < a);
        let seg_hi = times.partition_point(|&t| t <= b);
        for i in seg_lo..seg_hi {
            let tau = times[i];
            if tau - a <= 0.5 * grid_h || b - tau <= 0.5 * grid_h {
                continue;
            }
            // left part [seg_lo, i], right part (i, seg_hi)
            let l = range(seg_lo, i + 1);
            let r = range(i + 1, seg_hi);
            let (dl, dr) = (tau - a, b - tau);
            let dot = (l[4] - a * l[3]) / dl + (b * r[3] - r[4]) / dr;
            let norm = (l[2] - 2.0 * a * l[1] + a * a * l[0]) / (dl * dl)
                + (b * b * r[0] - 2.0 * b * r[1] + r[2]) / (dr * dr);
            if norm <= 0.0 {
                continue;
            }
            let gain = dot * dot / norm;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, tau, dot / norm));
            }
        }
    }
    let (_, tau, lift) = best?;
    let at = kt.partition_point(|&k| k < tau);
    let v = eval_knots(&kt, &kv, tau) + lift;
    kt.insert(at, tau);
    kv.insert(at, v);
    Some((kt, kv))
}

fn interp_data(times: &[f64], values: &[f64], t: f64) -> f64 {
    eval_knots(times, values, t)
}

fn sum_sq_residuals(times: &[f64], values: &[f64], knots: &[f64], vals: &[f64]) -> f64 {
    let mut s = 0;
    let mut acc = 0.0;
    let last = knots.len() - 2;
    for (&t, &y) in times.iter().zip(values) {
        while s < last && t > knots[s + 1] {
            s += 1;
        }
        let dt = knots[s + 1] - knots[s];
        let fit = if dt > 0.0 {
            let w = (t - knots[s]) / dt;
            (1.0 - w) * vals[s] + w * vals[s + 1]
        } else {
            vals[s + 1]
        };
        acc += (y - fit) * (y - fit);
    }
    acc
}

/// Accumulates `J^T J` and `J^T r` for `J = dS/d(params)`, `r = y - S`.
///
/// Parameters are laid out as the `m` knot values followed by the `m - 2`
/// interior knot times. Each data point touches at most two values and two
/// knot times: `dS/df = (1 - w, w)` and `dS/dtau = -slope * (1 - w, w)`.
fn normal_equations(
    times: &[f64],
    values: &[f64],
    knots: &[f64],
    vals: &[f64],
    jtj: &mut Array2<f64>,
    jtr: &mut Array1<f64>,
) {
    let m = knots.len();
    jtj.fill(0.0);
    jtr.fill(0.0);
    let mut s = 0;
    let last = m - 2;
    let mut idx = [0usize; 4];
    let mut der = [0.0f64; 4];
    for (&t, &y) in times.iter().zip(values) {
        while s < last && t > knots[s + 1] {
            s += 1;
        }
        let dt = knots[s + 1] - knots[s];
        if dt <= 0.0 {
            continue;
        }
        let w = (t - knots[s]) / dt;
        let fit = (1.0 - w) * vals[s] + w * vals[s + 1];
        let r = y - fit;
        let slope = (vals[s + 1] - vals[s]) / dt;
        let mut k = 0;
        idx[k] = s;
        der[k] = 1.0 - w;
        k += 1;
        idx[k] = s + 1;
        der[k] = w;
        k += 1;
        if s >= 1 {
            idx[k] = m + s - 1;
            der[k] = -slope * (1.0 - w);
            k += 1;
        }
        if s + 1 <= m - 2 {
            idx[k] = m + s;
            der[k] = -slope * w;
            k += 1;
        }
        for a in 0..k {
            jtr[idx[a]] += der[a] * r;
            for b in 0..k {
                jtj[[idx[a], idx[b]]] += der[a] * der[b];
            }
        }
    }
}

fn apply_step(knots: &[f64], vals: &[f64], step: &Array1<f64>, grid_h: f64) -> (Vec<f64>, Vec<f64>) {
    let m = knots.len();
    let lo = knots[0];
    let hi = knots[m - 1];
    let mut pairs: Vec<(f64, f64)> = (1..m - 1)
        .map(|k| ((knots[k] + step[m + k - 1]).clamp(lo, hi), vals[k] + step[k]))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut new_knots = Vec::with_capacity(m);
    let mut new_vals = Vec::with_capacity(m);
    new_knots.push(lo);
    new_vals.push(vals[0] + step[0]);
    for (t, v) in pairs {
        new_knots.push(t);
        new_vals.push(v);
    }
    new_knots.push(hi);
    new_vals.push(vals[m - 1] + step[m - 1]);
    separate_knots(&mut new_knots, grid_h);
    (new_knots, new_vals)
}

/// Pushes coincident knots apart by `h`, keeping the end knots fixed.
fn separate_knots(knots: &mut [f64], h: f64) {
    let m = knots.len();
    let lo = knots[0];
    let hi = knots[m - 1];
    let eps = 1e-12 * (hi - lo);
    if (m - 1) as f64 * h > hi - lo {
        return;
    }
    for k in 1..m - 1 {
        if knots[k] - knots[k - 1] < eps {
            knots[k] = knots[k - 1] + h;
        }
    }
    for k in (1..m - 1).rev() {
        if knots[k + 1] - knots[k] < eps || knots[k] > knots[k + 1] {
            knots[k] = knots[k + 1] - h;
        }
    }
}

/// Parameters of the adaptive filter. Indices are zero-based and inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub time_start_idx: usize,
    pub time_end_idx: usize,
    pub num_filter_obs: usize,
    pub tol: f64,
    pub min_knots: usize,
    pub max_knots: usize,
    #[serde(default = "default_optimizer_tol")]
    pub optimizer_tol: f64,
}

fn default_optimizer_tol() -> f64 {
    FitOptions::default().rel_tol
}

impl FilterConfig {
    pub fn validate(&self, n_times: usize) -> Result<()> {
        if !(self.time_start_idx < self.time_end_idx && self.time_end_idx < n_times) {
            return Err(Error::validation(format!(
                "need time_start_idx < time_end_idx < {n_times}, got {} and {}",
                self.time_start_idx, self.time_end_idx
            )));
        }
        if self.num_filter_obs < 2 {
            return Err(Error::validation("num_filter_obs must be >= 2"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("filter tol must be > 0"));
        }
        if self.min_knots < 2 || self.max_knots < self.min_knots {
            return Err(Error::validation(format!(
                "need 2 <= min_knots <= max_knots, got {} and {}",
                self.min_knots, self.max_knots
            )));
        }
        if !(self.optimizer_tol > 0.0) {
            return Err(Error::validation("optimizer_tol must be > 0"));
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            rel_tol: self.optimizer_tol,
            ..FitOptions::default()
        }
    }

    pub fn filter_times(&self, raw_times: &[f64]) -> Vec<f64> {
        linspace(
            raw_times[self.time_start_idx],
            raw_times[self.time_end_idx],
            self.num_filter_obs,
        )
    }
}

/// Output of the adaptive filter for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSeries {
    pub values: Vec<f64>,
    pub knots_used: usize,
    pub converged: bool,
    /// Last relative 1-norm change between successive knot counts.
    pub error: f64,
    pub spline: SplineModel,
}

/// Mean absolute value over the window, normalized by `end - start`; an
/// all-zero window yields 1 so the error becomes an absolute 1-norm.
pub fn window_scale(values: &[f64]) -> f64 {
    let steps = (values.len() - 1) as f64;
    let yp = values.iter().map(|v| v.abs()).sum::<f64>() / steps;
    if yp > 0.0 {
        yp
    } else {
        1.0
    }
}

fn relative_l1(a: &[f64], b: &[f64], scale: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / scale
}

/// Adaptive knot-count filtering of one series.
pub fn filter_series(raw_times: &[f64], raw_values: &[f64], cfg: &FilterConfig) -> Result<FilteredSeries> {
    if raw_times.len() != raw_values.len() {
        return Err(Error::DimensionMismatch {
            expected: raw_times.len(),
            got: raw_values.len(),
        });
    }
    cfg.validate(raw_times.len())?;
    let window = cfg.time_start_idx..=cfg.time_end_idx;
    let times = &raw_times[window.clone()];
    let values = &raw_values[window];
    let opts = cfg.fit_options();
    let filter_times = cfg.filter_times(raw_times);
    let scale = window_scale(values);

    let sample = |fit: &SplineFit| -> Vec<f64> {
        filter_times
            .iter()
            .map(|&t| eval_knots(fit.spline.knot_times(), fit.spline.knot_values(), t))
            .collect()
    };

    let mut m = cfg.min_knots;
    let first = fit_spline(times, values, m, &opts)?;
    if cfg.max_knots == cfg.min_knots {
        return Ok(FilteredSeries {
            values: sample(&first),
            knots_used: m,
            converged: false,
            error: f64::INFINITY,
            spline: first.spline,
        });
    }
    let mut old = sample(&first);
    m += 1;
    let mut fit = fit_spline(times, values, m, &opts)?;
    let mut current = sample(&fit);
    let mut error = relative_l1(&old, &current, scale);
    while error > cfg.tol && m < cfg.max_knots {
        m += 1;
        old = current;
        fit = fit_spline(times, values, m, &opts)?;
        current = sample(&fit);
        error = relative_l1(&old, &current, scale);
    }
    Ok(FilteredSeries {
        values: current,
        knots_used: m,
        converged: error <= cfg.tol,
        error,
        spline: fit.spline,
    })
}

/// Filtered samples of every series in an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredEnsemble {
    pub filter_times: Vec<f64>,
    pub values: Array2<f64>,
    pub knots_used: Vec<usize>,
    pub converged: Vec<bool>,
    pub ids: Vec<String>,
}

impl FilteredEnsemble {
    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    /// Writes the filtered matrix in the ensemble CSV layout.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())?;
        timeseries::write_matrix_csv(f, "t", &self.filter_times, &self.ids, &self.values)
    }

    /// Writes `series_id,knots_used,converged`.
    pub fn save_report(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["series_id", "knots_used", "converged"])?;
        for ((id, k), c) in self.ids.iter().zip(&self.knots_used).zip(&self.converged) {
            w.write_record([id.as_str(), &k.to_string(), if *c { "true" } else { "false" }])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a filtered matrix written by [`FilteredEnsemble::save`]; knot
    /// counts and flags are not part of that file and come back empty.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let m = timeseries::read_matrix_csv(path.as_ref())?;
        Ok(Self {
            filter_times: m.header,
            values: m.values,
            knots_used: Vec::new(),
            converged: Vec::new(),
            ids: m.ids,
        })
    }
}

/// Filters every row of `ens` independently (in parallel).
pub fn filter_ensemble(ens: &TimeSeriesEnsemble, cfg: &FilterConfig) -> Result<FilteredEnsemble> {
    cfg.validate(ens.n_times())?;
    let times = ens.grid.times();
    let rows: Vec<FilteredSeries> = (0..ens.n_series())
        .into_par_iter()
        .map(|i| {
            let row = ens.series(i).to_vec();
            filter_series(times, &row, cfg).map_err(|e| e.in_series(i))
        })
        .collect::<Result<_>>()?;
    let n_filter = cfg.num_filter_obs;
    let mut values = Array2::zeros((rows.len(), n_filter));
    for (i, r) in rows.iter().enumerate() {
        for (k, v) in r.values.iter().enumerate() {
            values[[i, k]] = *v;
        }
    }
    Ok(FilteredEnsemble {
        filter_times: cfg.filter_times(times),
        values,
        knots_used: rows.iter().map(|r| r.knots_used).collect(),
        converged: rows.iter().map(|r| r.converged).collect(),
        ids: ens.ids.clone(),
    })
}
