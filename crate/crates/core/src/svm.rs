//! Kernel support vector classification.
//!
//! Binary C-SVC problems are solved by SMO with maximal-violating-pair
//! working-set selection. Multi-class problems use one-vs-one machines and a
//! pairwise vote. Kernel proposals are ranked by shuffled k-fold
//! cross-validated misclassification.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::{row_norms_sq, Kernel, KernelSpec};
use crate::{rng, Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    /// KKT gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::validation(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("SVM tol must be > 0"));
        }
        Ok(())
    }
}

/// One pairwise machine; positive decision values vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: usize,
    pub negative: usize,
    /// Rows of [`ClassifierModel::support_vectors`].
    pub sv_rows: Vec<usize>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub spec: KernelSpec,
    pub kernel: Kernel,
    pub c: f64,
    /// Sorted class labels seen in training.
    pub classes: Vec<usize>,
    pub n_features: usize,
    pub support_vectors: Array2<f64>,
    pub machines: Vec<BinaryMachine>,
    pub cv_misclassification: Option<f64>,
}

impl ClassifierModel {
    /// False if any binary problem hit the iteration cap.
    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }

    /// Decision value of every machine at every row.
    pub fn decision_values(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let k = self.kernel.matrix(x, self.support_vectors.view())?;
        Ok(self.decisions_from_kernel(&k))
    }

    fn decisions_from_kernel(&self, k: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((k.nrows(), self.machines.len()));
        for (r, krow) in k.outer_iter().enumerate() {
            for (m, mach) in self.machines.iter().enumerate() {
                let s: f64 = mach
                    .sv_rows
                    .iter()
                    .zip(&mach.dual_coef)
                    .map(|(&i, &a)| a * krow[i])
                    .sum();
                out[[r, m]] = s - mach.rho;
            }
        }
        out
    }

    fn vote(&self, dec: &Array2<f64>) -> Vec<usize> {
        let pos = |c: usize| self.classes.binary_search(&c).expect("known class");
        dec.outer_iter()
            .map(|row| {
                let mut votes = vec![0usize; self.classes.len()];
                for (mach, &d) in self.machines.iter().zip(row) {
                    let winner = if d > 0.0 { mach.positive } else { mach.negative };
                    votes[pos(winner)] += 1;
                }
                let mut best = 0;
                for (i, &v) in votes.iter().enumerate() {
                    if v > votes[best] {
                        best = i;
                    }
                }
                self.classes[best]
            })
            .collect()
    }

    pub fn classify(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let dec = self.decision_values(x)?;
        Ok(self.vote(&dec))
    }
}

/// Dual problem of one binary C-SVC on a precomputed kernel matrix.
struct BinaryProblem<'a> {
    kmat: &'a Array2<f64>,
    rows: Vec<usize>,
    y: Vec<f64>,
}

struct BinarySolution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

impl BinaryProblem<'_> {
    #[inline]
    fn k(&self, a: usize, b: usize) -> f64 {
        self.kmat[[self.rows[a], self.rows[b]]]
    }

    fn solve(&self, c: f64, tol: f64, max_iter: usize) -> BinarySolution {
        let n = self.rows.len();
        let y = &self.y;
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let qd: Vec<f64> = (0..n).map(|i| self.k(i, i)).collect();
        let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
        let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let mut gmax = f64::NEG_INFINITY;
            let mut gmin = f64::INFINITY;
            let (mut i, mut j) = (usize::MAX, usize::MAX);
            for t in 0..n {
                let v = -y[t] * grad[t];
                if up(alpha[t], y[t]) && v > gmax {
                    gmax = v;
                    i = t;
                }
                if low(alpha[t], y[t]) && v < gmin {
                    gmin = v;
                    j = t;
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
                converged = true;
                break;
            }
            iterations += 1;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let kij = self.k(i, j);
            if y[i] != y[j] {
                let quad = (qd[i] + qd[j] - 2.0 * kij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qd[i] + qd[j] - 2.0 * kij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            let (ri, rj) = (self.rows[i], self.rows[j]);
            for t in 0..n {
                let rt = self.rows[t];
                grad[t] += y[t] * (y[i] * self.kmat[[ri, rt]] * di + y[j] * self.kmat[[rj, rt]] * dj);
            }
        }
        let rho = self.rho(&alpha, &grad, c);
        BinarySolution {
            alpha,
            rho,
            iterations,
            converged,
        }
    }

    /// Mean of `y_i G_i` over free variables, else the midpoint of the
    /// feasible interval.
    fn rho(&self, alpha: &[f64], grad: &[f64], c: f64) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut nfree) = (0.0, 0usize);
        for ((&a, &g), &y) in alpha.iter().zip(grad).zip(&self.y) {
            let yg = y * g;
            if a >= c {
                if y < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if a <= 0.0 {
                if y > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                nfree += 1;
                sum += yg;
            }
        }
        if nfree > 0 {
            sum / nfree as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

fn distinct_classes(labels: &[usize]) -> Vec<usize> {
    labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Trains on `rows` of a shared kernel matrix.
fn train_on_kernel(
    x: ArrayView2<f64>,
    labels: &[usize],
    rows: &[usize],
    kmat: &Array2<f64>,
    spec: &KernelSpec,
    kernel: Kernel,
    params: &SvmParams,
) -> Result<ClassifierModel> {
    let sub_labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
    let classes = distinct_classes(&sub_labels);
    if classes.len() < 2 {
        return Err(Error::InsufficientData(
            "SVM training needs at least two classes".into(),
        ));
    }
    let mut machines = Vec::new();
    let mut sv_source: Vec<usize> = Vec::new();
    let mut sv_index = std::collections::HashMap::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let pair_rows: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| labels[r] == a || labels[r] == b)
                .collect();
            let y: Vec<f64> = pair_rows
                .iter()
                .map(|&r| if labels[r] == a { 1.0 } else { -1.0 })
                .collect();
            let prob = BinaryProblem {
                kmat,
                rows: pair_rows.clone(),
                y,
            };
            let sol = prob.solve(params.c, params.tol, params.max_iter);
            if !sol.converged {
                log::warn!(
                    "SMO for classes ({a}, {b}) stopped after {} iterations",
                    sol.iterations
                );
            }
            let mut sv_rows = Vec::new();
            let mut dual_coef = Vec::new();
            for (t, &al) in sol.alpha.iter().enumerate() {
                if al > 0.0 {
                    let src = pair_rows[t];
                    let idx = *sv_index.entry(src).or_insert_with(|| {
                        sv_source.push(src);
                        sv_source.len() - 1
                    });
                    sv_rows.push(idx);
                    dual_coef.push(al * prob.y[t]);
                }
            }
            machines.push(BinaryMachine {
                positive: a,
                negative: b,
                sv_rows,
                dual_coef,
                rho: sol.rho,
                iterations: sol.iterations,
                converged: sol.converged,
            });
        }
    }
    Ok(ClassifierModel {
        spec: *spec,
        kernel,
        c: params.c,
        classes,
        n_features: x.ncols(),
        support_vectors: x.select(Axis(0), &sv_source),
        machines,
        cv_misclassification: None,
    })
}

fn check_inputs(x: ArrayView2<f64>, labels: &[usize], params: &SvmParams) -> Result<()> {
    params.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVM features".into()));
    }
    Ok(())
}

/// Trains one classifier on all rows.
pub fn svm_train(
    x: ArrayView2<f64>,
    labels: &[usize],
    spec: &KernelSpec,
    params: &SvmParams,
) -> Result<ClassifierModel> {
    check_inputs(x, labels, params)?;
    let kernel = spec.resolve(x)?;
    let kmat = kernel.matrix(x, x)?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    train_on_kernel(x, labels, &rows, &kmat, spec, kernel, params)
}

/// Outcome of kernel selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: ClassifierModel,
    pub selected: usize,
    /// Mean fold misclassification per proposal; `None` if skipped.
    pub cv_rates: Vec<Option<f64>>,
}

/// Shuffled k-fold partition; the first `n % k` folds get one extra row.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    folds
}

/// Cross-validates each proposal on the same folds and retrains the one with
/// the lowest mean misclassification (first wins ties) on all rows.
pub fn select_classifier(
    x: ArrayView2<f64>,
    labels: &[usize],
    proposals: &[KernelSpec],
    k_folds: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<Selection> {
    check_inputs(x, labels, params)?;
    let n = x.nrows();
    if proposals.is_empty() {
        return Err(Error::validation("no kernel proposals"));
    }
    if k_folds < 2 || n < k_folds {
        return Err(Error::validation(format!(
            "need 2 <= k_folds <= n, got k = {k_folds}, n = {n}"
        )));
    }
    if distinct_classes(labels).len() < 2 {
        return Err(Error::InsufficientData("SVM training needs at least two classes".into()));
    }
    for p in proposals {
        p.validate()?;
    }
    let folds = kfold_indices(n, k_folds, seed);
    let dots = x.dot(&x.t());
    let norms = row_norms_sq(x);

    let jobs: Vec<(usize, usize)> = (0..proposals.len())
        .flat_map(|p| (0..k_folds).map(move |f| (p, f)))
        .collect();
    let results: Vec<Result<Option<f64>>> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let test = &folds[f];
            let mut in_test = vec![false; n];
            for &t in test {
                in_test[t] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let xtrain = x.select(Axis(0), &train);
            let kernel = proposals[p].resolve(xtrain.view())?;
            let kmat = kernel.map_dots(&dots, &norms, &norms)?;
            let model = match train_on_kernel(x, labels, &train, &kmat, &proposals[p], kernel, params) {
                Ok(m) => m,
                Err(Error::InsufficientData(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let pred = model.classify(x.select(Axis(0), test).view())?;
            let wrong = pred.iter().zip(test).filter(|(p, &t)| **p != labels[t]).count();
            Ok(Some(wrong as f64 / test.len() as f64))
        })
        .collect();

    let mut cv_rates = vec![Some(0.0); proposals.len()];
    for (&(p, _), r) in jobs.iter().zip(results) {
        match (r?, cv_rates[p]) {
            (Some(rate), Some(acc)) => cv_rates[p] = Some(acc + rate / k_folds as f64),
            _ => cv_rates[p] = None,
        }
    }
    for (p, r) in cv_rates.iter().enumerate() {
        if r.is_none() {
            log::warn!("kernel proposal {} skipped: a training fold has one class", proposals[p]);
        }
    }
    let mut selected = None::<usize>;
    for (p, r) in cv_rates.iter().enumerate() {
        if let Some(rate) = r {
            if selected.is_none_or(|s| *rate < cv_rates[s].expect("scored")) {
                selected = Some(p);
            }
        }
    }
    let selected = selected.ok_or_else(|| {
        Error::InsufficientData("every kernel proposal was skipped".into())
    })?;
    let mut model = svm_train(x, labels, &proposals[selected], params)?;
    model.cv_misclassification = cv_rates[selected];
    Ok(Selection {
        model,
        selected,
        cv_rates,
    })
}

/// Weight vector of a linear-kernel machine, `f(x) = w . x - rho`.
pub fn linear_weights(model: &ClassifierModel, machine: usize) -> Array1<f64> {
    let m = &model.machines[machine];
    let mut w = Array1::zeros(model.n_features);
    for (&r, &a) in m.sv_rows.iter().zip(&m.dual_coef) {
        w.scaled_add(a, &model.support_vectors.row(r));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn two_clouds(n: usize, seed: u64, sep: f64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let centre = if j == 0 { if i % 2 == 0 { sep } else { -sep } } else { 0.0 };
            centre + r.random::<f64>() - 0.5
        });
        let labels = (0..n).map(|i| i % 2).collect();
        (x, labels)
    }

    #[test]
    fn separable_linear_has_zero_training_error() {
        let (x, l) = two_clouds(60, 1, 1.0);
        let m = svm_train(x.view(), &l, &KernelSpec::linear(), &SvmParams::default()).unwrap();
        assert_eq!(m.classify(x.view()).unwrap(), l);
        assert!(m.converged());
        for mach in &m.machines {
            assert!(mach.dual_coef.iter().all(|a| a.abs() <= m.c + 1e-12));
        }
    }

    #[test]
    fn xor_needs_a_nonlinear_kernel() {
        let x = array![[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
        let l = vec![0, 0, 1, 1];
        let p = SvmParams::default();
        let lin = svm_train(x.view(), &l, &KernelSpec::linear(), &p).unwrap();
        let err = lin.classify(x.view()).unwrap().iter().zip(&l).filter(|(a, b)| a != b).count();
        assert!(err > 0);
        let rbf = svm_train(x.view(), &l, &KernelSpec::rbf().with_gamma(1.0), &p).unwrap();
        // direct evaluation of the trained decision function
        let m = &rbf.machines[0];
        for (i, row) in x.outer_iter().enumerate() {
            let f: f64 = m
                .sv_rows
                .iter()
                .zip(&m.dual_coef)
                .map(|(&s, &a)| a * (-(&rbf.support_vectors.row(s) - &row).mapv(|v| v * v).sum()).exp())
                .sum::<f64>()
                - m.rho;
            assert_eq!(f > 0.0, l[i] == 0);
        }
        assert_eq!(rbf.classify(x.view()).unwrap(), l);
    }

    #[test]
    fn linear_decision_matches_primal() {
        let (x, l) = two_clouds(50, 3, 0.4);
        let m = svm_train(x.view(), &l, &KernelSpec::linear(), &SvmParams::default()).unwrap();
        let w = linear_weights(&m, 0);
        let dec = m.decision_values(x.view()).unwrap();
        for (i, row) in x.outer_iter().enumerate() {
            assert!((dec[[i, 0]] - (w.dot(&row) - m.machines[0].rho)).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicated_points_keep_decisions() {
        let (x, l) = two_clouds(30, 5, 2.0);
        let p = SvmParams {
            c: 1000.0,
            tol: 1e-6,
            ..SvmParams::default()
        };
        let a = svm_train(x.view(), &l, &KernelSpec::linear(), &p).unwrap();
        let x2 = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let l2: Vec<usize> = l.iter().chain(&l).copied().collect();
        let b = svm_train(x2.view(), &l2, &KernelSpec::linear(), &p).unwrap();
        let grid = Array2::from_shape_fn((25, 2), |(i, j)| if j == 0 { i as f64 * 0.2 - 2.4 } else { (i % 5) as f64 - 2.0 });
        let da = a.decision_values(grid.view()).unwrap();
        let db = b.decision_values(grid.view()).unwrap();
        for (u, v) in da.iter().zip(&db) {
            assert!((u - v).abs() < 1e-3 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn three_class_vote_and_support_vector_labels() {
        let mut r = rng::seeded(8);
        let centres = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
        let x = Array2::from_shape_fn((90, 2), |(i, j)| {
            let c = centres[i % 3];
            (if j == 0 { c.0 } else { c.1 }) + r.random::<f64>()
        });
        let l: Vec<usize> = (0..90).map(|i| i % 3).collect();
        let m = svm_train(x.view(), &l, &KernelSpec::rbf(), &SvmParams::default()).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert_eq!(m.classify(x.view()).unwrap(), l);
        let sv_labels = m.classify(m.support_vectors.view()).unwrap();
        for (row, lab) in m.support_vectors.outer_iter().zip(sv_labels) {
            let orig = x.outer_iter().position(|r| r == row).unwrap();
            assert_eq!(lab, l[orig]);
        }
    }

    #[test]
    fn single_class_is_error() {
        let x = array![[0.0], [1.0]];
        assert!(svm_train(x.view(), &[1, 1], &KernelSpec::linear(), &SvmParams::default()).is_err());
        let bad = SvmParams {
            c: 0.0,
            ..SvmParams::default()
        };
        assert!(svm_train(x.view(), &[0, 1], &KernelSpec::linear(), &bad).is_err());
    }

    #[test]
    fn selection_on_separable_data() {
        let (x, l) = two_clouds(80, 2, 1.5);
        let s = select_classifier(x.view(), &l, &[KernelSpec::linear()], 5, &SvmParams::default(), 3).unwrap();
        assert_eq!(s.selected, 0);
        assert_eq!(s.cv_rates, vec![Some(0.0)]);
        assert_eq!(s.model.cv_misclassification, Some(0.0));
    }

    #[test]
    fn selected_rate_is_minimal() {
        let (x, l) = two_clouds(120, 4, 0.3);
        let props = [KernelSpec::linear(), KernelSpec::rbf(), KernelSpec::poly(), KernelSpec::sigmoid()];
        let s = select_classifier(x.view(), &l, &props, 4, &SvmParams::default(), 9).unwrap();
        let best = s.cv_rates[s.selected].unwrap();
        for r in s.cv_rates.iter().flatten() {
            assert!(best <= *r);
        }
        for (p, r) in s.cv_rates.iter().enumerate().take(s.selected) {
            assert!(r.unwrap() > best, "proposal {p} ties but comes first");
        }
    }

    #[test]
    fn folds_partition_rows() {
        let f = kfold_indices(23, 4, 1);
        assert_eq!(f.iter().map(|v| v.len()).collect::<Vec<_>>(), vec![6, 6, 6, 5]);
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(f, kfold_indices(23, 4, 1));
    }

    #[test]
    fn dimension_mismatch_on_classify() {
        let (x, l) = two_clouds(20, 1, 1.0);
        let m = svm_train(x.view(), &l, &KernelSpec::linear(), &SvmParams::default()).unwrap();
        assert!(m.classify(array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn row_order_does_not_change_predictions(seed in 0u64..1000) {
            let (x, l) = two_clouds(40, seed, 0.6);
            let mut perm: Vec<usize> = (0..40).collect();
            perm.shuffle(&mut rng::seeded(seed + 1));
            let xp = x.select(Axis(0), &perm);
            let lp: Vec<usize> = perm.iter().map(|&i| l[i]).collect();
            let p = SvmParams { tol: 1e-6, ..SvmParams::default() };
            let a = svm_train(x.view(), &l, &KernelSpec::rbf(), &p).unwrap();
            let b = svm_train(xp.view(), &lp, &KernelSpec::rbf(), &p).unwrap();
            let da = a.decision_values(x.view()).unwrap();
            let db = b.decision_values(x.view()).unwrap();
            for (u, v) in da.iter().zip(&db) {
                prop_assert!((u - v).abs() < 1e-3);
            }
            // classification is equivariant under row permutation
            let ca = a.classify(xp.view()).unwrap();
            let cb: Vec<usize> = perm.iter().map(|&i| a.classify(x.row(i).insert_axis(Axis(0))).unwrap()[0]).collect();
            prop_assert_eq!(ca, cb);
        }
    }
}
