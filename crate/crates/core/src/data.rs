//! Count-regression datasets and prior hyperparameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LgnbError, Result};

/// Counts `y` with a design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<u64>,
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    names: Vec<String>,
}

impl Dataset {
    /// Build from counts and a full design matrix (intercept column included).
    pub fn new(y: Vec<u64>, x: DMatrix<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(LgnbError::domain("dataset needs at least one observation"));
        }
        if x.nrows() != y.len() {
            return Err(LgnbError::domain(format!(
                "design has {} rows but there are {} counts",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(LgnbError::domain("design matrix has no columns"));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(LgnbError::domain(format!("design matrix contains {v}")));
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(LgnbError::domain("first design column must be the all-ones intercept"));
        }
        let names = std::iter::once("intercept".to_string())
            .chain((1..x.ncols()).map(|p| format!("x{p}")))
            .collect();
        let xtx = x.transpose() * &x;
        Ok(Self { y, x, xtx, names })
    }

    /// Build from counts and covariate rows; the intercept column is prepended.
    pub fn from_covariates(y: Vec<u64>, covariates: &[Vec<f64>]) -> Result<Self> {
        let n = y.len();
        let p = covariates.first().map_or(0, Vec::len);
        if covariates.len() != n {
            return Err(LgnbError::domain(format!(
                "{} covariate rows for {} counts",
                covariates.len(),
                n
            )));
        }
        if covariates.iter().any(|row| row.len() != p) {
            return Err(LgnbError::domain("covariate rows have unequal lengths"));
        }
        let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { covariates[i][j - 1] });
        Self::new(y, x)
    }

    /// Dataset with no observations and `n_coef` regression coefficients.
    /// Inference on it samples from (or fits to) the prior.
    pub fn empty(n_coef: usize) -> Self {
        let x = DMatrix::zeros(0, n_coef);
        let names = std::iter::once("intercept".to_string())
            .chain((1..n_coef).map(|p| format!("x{p}")))
            .collect();
        Self {
            y: Vec::new(),
            xtx: DMatrix::zeros(n_coef, n_coef),
            x,
            names,
        }
    }

    pub fn with_names(mut self, covariate_names: Vec<String>) -> Result<Self> {
        if covariate_names.len() + 1 != self.x.ncols() {
            return Err(LgnbError::domain(format!(
                "{} names for {} covariates",
                covariate_names.len(),
                self.x.ncols() - 1
            )));
        }
        self.names = std::iter::once("intercept".to_string()).chain(covariate_names).collect();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of regression coefficients, `P + 1`.
    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Cached `XᵀX`.
    pub fn xtx(&self) -> &DMatrix<f64> {
        &self.xtx
    }

    pub fn coef_names(&self) -> &[String] {
        &self.names
    }

    pub fn max_y(&self) -> u64 {
        self.y.iter().copied().max().unwrap_or(0)
    }

    /// Linear predictor `Xβ`.
    pub fn linear_predictor(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.x * beta
    }

    /// The same observations in a different row order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(LgnbError::domain("permutation length mismatch"));
        }
        let y = order.iter().map(|&i| self.y[i]).collect();
        let x = DMatrix::from_fn(self.n(), self.n_coef(), |i, j| self.x[(order[i], j)]);
        let mut out = Self::new(y, x)?;
        out.names = self.names.clone();
        Ok(out)
    }
}

/// Gamma hyperparameters of the hierarchical prior plus the beta prior used by
/// the univariate model. All default to 0.01.
///
/// * `r ~ Gamma(a0, 1/h)`, `h ~ Gamma(b0, 1/g0)`
/// * `β_p ~ N(0, 1/α_p)`, `α_p ~ Gamma(c0, 1/d0)`
/// * `φ ~ Gamma(e0, 1/f0)` with `σ² = 1/φ`
/// * univariate: `p ~ Beta(beta_a, beta_b)`, `r ~ Gamma(a0, 1/b0)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub d0: f64,
    pub e0: f64,
    pub f0: f64,
    pub g0: f64,
    pub beta_a: f64,
    pub beta_b: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            a0: 0.01,
            b0: 0.01,
            c0: 0.01,
            d0: 0.01,
            e0: 0.01,
            f0: 0.01,
            g0: 0.01,
            beta_a: 0.01,
            beta_b: 0.01,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LgnbError::config(format!(
                    "hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn entries(&self) -> [(&'static str, f64); 9] {
        [
            ("a0", self.a0),
            ("b0", self.b0),
            ("c0", self.c0),
            ("d0", self.d0),
            ("e0", self.e0),
            ("f0", self.f0),
            ("g0", self.g0),
            ("alpha", self.beta_a),
            ("beta", self.beta_b),
        ]
    }

    /// Apply a `name=value` override.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "a0" => &mut self.a0,
            "b0" => &mut self.b0,
            "c0" => &mut self.c0,
            "d0" => &mut self.d0,
            "e0" => &mut self.e0,
            "f0" => &mut self.f0,
            "g0" => &mut self.g0,
            "alpha" | "beta_a" => &mut self.beta_a,
            "beta" | "beta_b" => &mut self.beta_b,
            other => return Err(LgnbError::config(format!("unknown hyperparameter {other:?}"))),
        };
        *slot = value;
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_designs() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 2.0, 0.1]);
        assert!(Dataset::new(vec![1, 2], x).is_err());
        let x = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 1.0, 0.1]);
        assert!(Dataset::new(vec![1, 2], x).is_err());
        assert!(Dataset::new(vec![], DMatrix::zeros(0, 1)).is_err());
        assert!(Dataset::from_covariates(vec![1], &[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn prepends_intercept() {
        let d = Dataset::from_covariates(vec![3, 4], &[vec![1.5, 2.0], vec![0.5, -1.0]]).unwrap();
        assert_eq!(d.n_coef(), 3);
        assert_eq!(d.x()[(1, 0)], 1.0);
        assert_eq!(d.x()[(1, 2)], -1.0);
        assert_eq!(d.xtx()[(0, 0)], 2.0);
    }

    #[test]
    fn hyper_overrides() {
        let mut h = Hyperparameters::default();
        h.set("g0", 2.0).unwrap();
        assert_eq!(h.g0, 2.0);
        assert!(h.set("zz", 1.0).is_err());
        assert!(h.set("a0", -1.0).is_err());
    }
}
