//! Kernel functions shared by the SVM classifier and kernel PCA.
//!
//! Every supported kernel depends on its two arguments only through their dot
//! product and squared norms, so Gram matrices are built from one pass of
//! dot products and then mapped elementwise.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    Poly,
    Sigmoid,
    Cosine,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Poly => "poly",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::Cosine => "cosine",
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Data-dependent rule for the kernel scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / n_features`.
    Auto,
    /// `1 / (n_features * Var(X))` with the variance over all entries.
    Scale,
}

/// Kernel scale: a fixed value or a rule evaluated on the training matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Rule(GammaRule),
}

/// A kernel proposal. `gamma = None` means [`GammaRule::Auto`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Gamma>,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub coef0: f64,
}

fn default_degree() -> u32 {
    3
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            gamma: None,
            degree: 3,
            coef0: 0.0,
        }
    }

    pub fn linear() -> Self {
        Self::new(KernelKind::Linear)
    }

    pub fn rbf() -> Self {
        Self::new(KernelKind::Rbf)
    }

    pub fn poly() -> Self {
        Self::new(KernelKind::Poly)
    }

    pub fn sigmoid() -> Self {
        Self::new(KernelKind::Sigmoid)
    }

    pub fn cosine() -> Self {
        Self::new(KernelKind::Cosine)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(Gamma::Value(gamma));
        self
    }

    pub fn with_gamma_rule(mut self, rule: GammaRule) -> Self {
        self.gamma = Some(Gamma::Rule(rule));
        self
    }

    pub fn with_coef0(mut self, coef0: f64) -> Self {
        self.coef0 = coef0;
        self
    }

    pub fn with_degree(mut self, degree: u32) -> Self {
        self.degree = degree;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(Gamma::Value(g)) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::validation(format!("kernel gamma must be > 0, got {g}")));
            }
        }
        if self.kind == KernelKind::Poly && self.degree < 1 {
            return Err(Error::validation("polynomial degree must be >= 1"));
        }
        Ok(())
    }

    /// Fixes `gamma` against the training matrix.
    pub fn resolve(&self, x: ArrayView2<f64>) -> Result<Kernel> {
        self.validate()?;
        let gamma = match self.gamma {
            Some(Gamma::Value(g)) => g,
            Some(Gamma::Rule(GammaRule::Scale)) => scale_gamma(x),
            Some(Gamma::Rule(GammaRule::Auto)) | None => 1.0 / x.ncols().max(1) as f64,
        };
        Ok(Kernel {
            kind: self.kind,
            gamma,
            degree: self.degree,
            coef0: self.coef0,
        })
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{'kernel': '{}'", self.kind)?;
        match self.gamma {
            Some(Gamma::Value(g)) => write!(f, ", 'gamma': {g}")?,
            Some(Gamma::Rule(GammaRule::Scale)) => f.write_str(", 'gamma': 'scale'")?,
            Some(Gamma::Rule(GammaRule::Auto)) | None => {}
        }
        if matches!(self.kind, KernelKind::Poly) && self.degree != 3 {
            write!(f, ", 'degree': {}", self.degree)?;
        }
        if matches!(self.kind, KernelKind::Poly | KernelKind::Sigmoid) && self.coef0 != 0.0 {
            write!(f, ", 'coef0': {}", self.coef0)?;
        }
        f.write_str("}")
    }
}

/// `1 / (n_features * Var(X))` with the variance over all entries; 1 when
/// the matrix is constant.
pub fn scale_gamma(x: ArrayView2<f64>) -> f64 {
    let n = x.len();
    if n == 0 {
        return 1.0;
    }
    let mean = x.sum() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

/// A kernel with every coefficient fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl Kernel {
    /// Kernel value from `x . y`, `|x|^2` and `|y|^2`.
    #[inline]
    pub fn from_dot(&self, dot: f64, xx: f64, yy: f64) -> Result<f64> {
        Ok(match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Rbf => (-self.gamma * (xx + yy - 2.0 * dot).max(0.0)).exp(),
            KernelKind::Poly => (self.gamma * dot + self.coef0).powi(self.degree as i32),
            KernelKind::Sigmoid => (self.gamma * dot + self.coef0).tanh(),
            KernelKind::Cosine => {
                if xx == 0.0 || yy == 0.0 {
                    return Err(Error::validation("cosine kernel undefined for a zero vector"));
                }
                dot / (xx.sqrt() * yy.sqrt())
            }
        })
    }

    pub fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        self.from_dot(x.dot(&y), x.dot(&x), y.dot(&y))
    }

    /// `K[i, j] = k(a_i, b_j)`.
    pub fn matrix(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
        if a.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.ncols(),
                got: b.ncols(),
            });
        }
        let dots = a.dot(&b.t());
        let na = row_norms_sq(a);
        let nb = row_norms_sq(b);
        self.map_dots(&dots, &na, &nb)
    }

    /// Applies the kernel to a precomputed dot-product matrix.
    pub fn map_dots(&self, dots: &Array2<f64>, na: &Array1<f64>, nb: &Array1<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(dots.raw_dim());
        for ((i, j), d) in dots.indexed_iter() {
            out[[i, j]] = self.from_dot(*d, na[i], nb[j])?;
        }
        Ok(out)
    }
}

pub fn row_norms_sq(a: ArrayView2<f64>) -> Array1<f64> {
    a.map_axis(Axis(1), |r| r.dot(&r))
}

/// Standalone evaluation of `spec`; gamma rules are evaluated on the two
/// rows `[x; y]`.
pub fn kernel_eval(spec: &KernelSpec, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let rows = ndarray::stack(Axis(0), &[x, y]).map_err(|e| Error::validation(e.to_string()))?;
    spec.resolve(rows.view())?.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn spot_values() {
        let x = array![1.0, 2.0];
        assert_eq!(kernel_eval(&KernelSpec::linear(), x.view(), x.view()).unwrap(), 5.0);
        assert_eq!(kernel_eval(&KernelSpec::rbf().with_gamma(0.7), x.view(), x.view()).unwrap(), 1.0);
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert_eq!(kernel_eval(&KernelSpec::cosine(), e1.view(), e2.view()).unwrap(), 0.0);
        let p = KernelSpec::poly().with_gamma(0.5).with_coef0(1.0).with_degree(2);
        assert_eq!(kernel_eval(&p, x.view(), x.view()).unwrap(), (0.5 * 5.0 + 1.0f64).powi(2));
        let s = KernelSpec::sigmoid().with_gamma(0.1);
        assert!((kernel_eval(&s, x.view(), e1.view()).unwrap() - 0.1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn cosine_zero_vector_errors() {
        let z = array![0.0, 0.0];
        let x = array![1.0, 0.0];
        assert!(kernel_eval(&KernelSpec::cosine(), z.view(), x.view()).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let a = array![1.0, 0.0];
        let b = array![1.0, 0.0, 2.0];
        assert!(matches!(
            kernel_eval(&KernelSpec::linear(), a.view(), b.view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_gamma_rejected() {
        let x = array![1.0];
        assert!(kernel_eval(&KernelSpec::rbf().with_gamma(-1.0), x.view(), x.view()).is_err());
    }

    #[test]
    fn matrix_matches_pointwise() {
        let a = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let b = array![[0.0, 1.0], [2.0, 2.0]];
        for spec in [KernelSpec::linear(), KernelSpec::rbf(), KernelSpec::poly(), KernelSpec::sigmoid(), KernelSpec::cosine()] {
            let k = spec.resolve(a.view()).unwrap();
            let m = k.matrix(a.view(), b.view()).unwrap();
            for i in 0..3 {
                for j in 0..2 {
                    let direct = k.eval(a.row(i), b.row(j)).unwrap();
                    assert!((m[[i, j]] - direct).abs() < 1e-12, "{spec}");
                }
            }
        }
    }

    #[test]
    fn gamma_rules_resolve() {
        let x = array![[0.0, 2.0], [2.0, 0.0]];
        assert_eq!(KernelSpec::rbf().resolve(x.view()).unwrap().gamma, 0.5);
        let scale = KernelSpec::rbf().with_gamma_rule(GammaRule::Scale);
        assert_eq!(scale.resolve(x.view()).unwrap().gamma, scale_gamma(x.view()));
        assert_eq!(KernelSpec::rbf().with_gamma(3.0).resolve(x.view()).unwrap().gamma, 3.0);
        let json: KernelSpec = serde_json::from_str(r#"{"kind":"rbf","gamma":"scale"}"#).unwrap();
        assert_eq!(json, scale);
        let json: KernelSpec = serde_json::from_str(r#"{"kind":"rbf","gamma":0.25}"#).unwrap();
        assert_eq!(json, KernelSpec::rbf().with_gamma(0.25));
        assert_eq!(scale.to_string(), "{'kernel': 'rbf', 'gamma': 'scale'}");
    }

    #[test]
    fn scale_gamma_rule() {
        let x = array![[0.0, 2.0], [2.0, 0.0]];
        // entries {0,2,2,0}: variance 1, two features
        assert!((scale_gamma(x.view()) - 0.5).abs() < 1e-15);
        assert_eq!(scale_gamma(Array2::from_elem((3, 2), 4.0).view()), 1.0);
    }
}
