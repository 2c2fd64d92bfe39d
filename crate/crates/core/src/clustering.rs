//! k-means clustering of filtered predicted series.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

pub const MAX_LLOYD_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Zero-based cluster index of every training row.
    pub labels: Vec<usize>,
    pub iterations: usize,
    /// Inertia after every assignment step of the kept restart.
    #[serde(skip)]
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    /// Number of training rows in each cluster.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

#[inline]
fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid with ties going to the lowest index.
fn nearest(x: ArrayView1<f64>, centroids: ArrayView2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Best of `n_init` k-means++ / Lloyd runs. Restart `r` draws from stream `r`
/// of `seed`, so the result does not depend on scheduling.
pub fn kmeans_fit(y: ArrayView2<f64>, k: usize, n_init: usize, seed: u64) -> Result<ClusterModel> {
    let n = y.nrows();
    if n == 0 || y.ncols() == 0 {
        return Err(Error::InsufficientData("k-means on empty input".into()));
    }
    if k == 0 || n_init == 0 {
        return Err(Error::validation("k and n_init must be >= 1"));
    }
    if n < k {
        return Err(Error::InsufficientData(format!("{n} rows for {k} clusters")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let runs: Vec<ClusterModel> = (0..n_init)
        .into_par_iter()
        .map(|r| single_run(y, k, &mut rng::substream(seed, r as u64)))
        .collect();
    let mut best = None::<ClusterModel>;
    for m in runs {
        if best.as_ref().is_none_or(|b| m.inertia < b.inertia) {
            best = Some(m);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn plus_plus_init(y: ArrayView2<f64>, k: usize, rng: &mut rng::Rng) -> Array2<f64> {
    let n = y.nrows();
    let mut centroids = Array2::zeros((k, y.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&y.row(first));
    let mut d2: Vec<f64> = y.outer_iter().map(|r| sq_dist(r, y.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&y.row(pick));
        for (i, r) in y.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, y.row(pick)));
        }
    }
    centroids
}

fn single_run(y: ArrayView2<f64>, k: usize, rng: &mut rng::Rng) -> ClusterModel {
    let n = y.nrows();
    let mut centroids = plus_plus_init(y, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (i, row) in y.outer_iter().enumerate() {
            let (l, d) = nearest(row, centroids.view());
            if l != labels[i] {
                labels[i] = l;
                changed = true;
            }
            dists[i] = d;
        }
        let inertia: f64 = dists.iter().sum();
        // equal inertia with changed labels only happens on exact ties
        let stalled = trace.len() >= 2 && inertia >= trace[trace.len() - 2];
        trace.push(inertia);
        if !changed || stalled || iterations >= MAX_LLOYD_ITER {
            break;
        }
        iterations += 1;
        update_centroids(y, &mut labels, &mut dists, &mut centroids);
        // inertia of the updated centroids against the current assignment
        trace.push(
            y.outer_iter()
                .zip(&labels)
                .map(|(r, &l)| sq_dist(r, centroids.row(l)))
                .sum(),
        );
    }
    ClusterModel {
        centroids,
        inertia: dists.iter().sum(),
        labels,
        iterations,
        inertia_trace: trace,
    }
}

/// Means of the assigned rows. An empty cluster takes over the row farthest
/// from its current centroid.
fn update_centroids(y: ArrayView2<f64>, labels: &mut [usize], dists: &mut [f64], centroids: &mut Array2<f64>) {
    let k = centroids.nrows();
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let (far, _) = dists
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[labels[*i]] > 1)
            .fold((usize::MAX, -1.0), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        if far == usize::MAX {
            break;
        }
        labels[far] = empty;
        dists[far] = 0.0;
    }
    centroids.fill(0.0);
    let mut counts = vec![0usize; k];
    for (row, &l) in y.outer_iter().zip(labels.iter()) {
        let mut c = centroids.row_mut(l);
        c += &row;
        counts[l] += 1;
    }
    for (mut c, &cnt) in centroids.axis_iter_mut(Axis(0)).zip(&counts) {
        if cnt > 0 {
            c /= cnt as f64;
        }
    }
}

/// Nearest-centroid labels for new rows.
pub fn kmeans_assign(model: &ClusterModel, y: ArrayView2<f64>) -> Result<Vec<usize>> {
    if y.ncols() != model.centroids.ncols() {
        return Err(Error::DimensionMismatch {
            expected: model.centroids.ncols(),
            got: y.ncols(),
        });
    }
    Ok(y.outer_iter().map(|r| nearest(r, model.centroids.view()).0).collect())
}

/// Writes `series_id,label`.
pub fn write_labels(path: impl AsRef<std::path::Path>, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["series_id", "label"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<std::path::Path>) -> Result<(Vec<String>, Vec<usize>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        ids.push(rec[0].to_string());
        labels.push(rec[1].trim().parse().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: format!("bad label {:?}: {e}", &rec[1]),
        })?);
    }
    Ok((ids, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn clouds(seed: u64) -> Array2<f64> {
        let mut r = rng::seeded(seed);
        Array2::from_shape_fn((40, 3), |(i, _)| {
            let centre = if i < 20 { 0.0 } else { 100.0 };
            centre + r.random::<f64>()
        })
    }

    #[test]
    fn separated_clouds() {
        let y = clouds(1);
        let m = kmeans_fit(y.view(), 2, 5, 7).unwrap();
        let a = m.labels[0];
        assert!(m.labels[..20].iter().all(|&l| l == a));
        assert!(m.labels[20..].iter().all(|&l| l != a));
    }

    #[test]
    fn single_cluster_closed_form() {
        let y = array![[1.0, 2.0], [3.0, 0.0], [2.0, 7.0], [0.0, 1.0]];
        let m = kmeans_fit(y.view(), 1, 3, 0).unwrap();
        let mean = y.mean_axis(Axis(0)).unwrap();
        assert!((&m.centroids.row(0) - &mean).iter().all(|v| v.abs() < 1e-12));
        let total: f64 = y.outer_iter().map(|r| sq_dist(r, mean.view())).sum();
        assert!((m.inertia - total).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let y = array![[1.0, 2.0], [3.0, 0.0], [2.0, 7.0], [0.0, 1.0]];
        let m = kmeans_fit(y.view(), 4, 3, 0).unwrap();
        assert_eq!(m.inertia, 0.0);
    }

    #[test]
    fn too_few_rows() {
        let y = array![[1.0], [2.0]];
        assert!(kmeans_fit(y.view(), 3, 1, 0).is_err());
        assert!(kmeans_fit(Array2::<f64>::zeros((0, 2)).view(), 1, 1, 0).is_err());
    }

    #[test]
    fn assign_rules() {
        let y = clouds(2);
        let m = kmeans_fit(y.view(), 3, 10, 4).unwrap();
        assert_eq!(kmeans_assign(&m, y.view()).unwrap(), m.labels);
        assert_eq!(kmeans_assign(&m, m.centroids.view()).unwrap(), vec![0, 1, 2]);
        let two = ClusterModel {
            centroids: array![[0.0, 0.0], [2.0, 0.0]],
            inertia: 0.0,
            labels: vec![],
            iterations: 0,
            inertia_trace: vec![],
        };
        assert_eq!(kmeans_assign(&two, array![[1.0, 5.0]].view()).unwrap(), vec![0]);
        assert!(kmeans_assign(&two, array![[1.0]].view()).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let y = clouds(3);
        let a = kmeans_fit(y.view(), 3, 4, 11).unwrap();
        let b = kmeans_fit(y.view(), 3, 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_terminate() {
        let y = array![[0.0], [0.0], [0.0], [10.0]];
        let m = kmeans_fit(y.view(), 3, 2, 0).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert!(m.iterations < MAX_LLOYD_ITER);
    }

    #[test]
    fn empty_cluster_takes_farthest_point() {
        let y = array![[0.0], [1.0], [5.0]];
        let mut labels = vec![0, 0, 0];
        let mut dists = vec![4.0, 1.0, 9.0];
        let mut c = array![[2.0], [100.0]];
        update_centroids(y.view(), &mut labels, &mut dists, &mut c);
        assert_eq!(labels, vec![0, 0, 1]);
        assert_eq!(c, array![[0.5], [5.0]]);
    }

    fn relabel_invariant(a: &[usize], b: &[usize]) -> bool {
        let mut map = std::collections::HashMap::new();
        a.iter().zip(b).all(|(x, y)| *map.entry(*x).or_insert(*y) == *y)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn inertia_monotone(seed in 0u64..10_000, n in 5usize..60, k in 1usize..5) {
            let mut r = rng::seeded(seed);
            let y = Array2::from_shape_fn((n, 2), |_| r.random::<f64>());
            let m = kmeans_fit(y.view(), k.min(n), 1, seed).unwrap();
            for w in m.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
            }
            prop_assert!(m.labels.iter().all(|&l| l < k));
            prop_assert!(m.inertia >= 0.0);
        }

        #[test]
        fn permutation_keeps_partition(seed in 0u64..1000) {
            // well separated clusters have a unique optimum
            let mut r = rng::seeded(seed);
            let n = 30;
            let y = Array2::from_shape_fn((n, 2), |(i, _)| (i % 3) as f64 * 50.0 + r.random::<f64>());
            let perm: Vec<usize> = (0..n).rev().collect();
            let yp = y.select(Axis(0), &perm);
            let a = kmeans_fit(y.view(), 3, 10, seed).unwrap();
            let b = kmeans_fit(yp.view(), 3, 10, seed).unwrap();
            let b_back: Vec<usize> = {
                let mut v = vec![0; n];
                for (pos, &orig) in perm.iter().enumerate() {
                    v[orig] = b.labels[pos];
                }
                v
            };
            prop_assert!(relabel_invariant(&a.labels, &b_back));
            prop_assert!((a.inertia - b.inertia).abs() < 1e-9);
        }
    }

    #[test]
    fn label_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        write_labels(&p, &["a".into(), "b".into()], &[2, 0]).unwrap();
        let (ids, l) = read_labels(&p).unwrap();
        assert_eq!(ids, vec!["a", "b"]);
        assert_eq!(l, vec![2, 0]);
    }
}
