use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-equispaced penalty sequence from `lambda_max` down to `lambda_max * lambda_min_ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub values: Vec<f64>,
    pub lambda_min_ratio: f64,
    pub nlambda: usize,
}

impl LambdaPath {
    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Path with the given maximum, without reference to a matrix.
    pub fn geometric(lambda_max: f64, nlambda: usize, lambda_min_ratio: f64) -> Result<Self> {
        if nlambda == 0 {
            return Err(Error::Path("nlambda must be positive".into()));
        }
        if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
            return Err(Error::Path(format!(
                "lambda_min_ratio must lie in (0, 1), got {lambda_min_ratio}"
            )));
        }
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(Error::Path(format!("lambda_max must be positive, got {lambda_max}")));
        }
        let values = if nlambda == 1 {
            vec![lambda_max]
        } else {
            let step = lambda_min_ratio.ln() / (nlambda - 1) as f64;
            let mut v: Vec<f64> = (0..nlambda)
                .map(|k| lambda_max * (step * k as f64).exp())
                .collect();
            v[nlambda - 1] = lambda_max * lambda_min_ratio;
            v
        };
        Ok(Self {
            values,
            lambda_min_ratio,
            nlambda,
        })
    }
}

/// Path anchored at the largest off-diagonal magnitude of `s`.
pub fn lambda_path(s: ArrayView2<f64>, nlambda: usize, lambda_min_ratio: f64) -> Result<LambdaPath> {
    if s.nrows() != s.ncols() {
        return Err(Error::Path("matrix must be square".into()));
    }
    let p = s.nrows();
    let mut lambda_max: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                lambda_max = lambda_max.max(s[[i, j]].abs());
            }
        }
    }
    if lambda_max == 0.0 {
        return Err(Error::Path("all off-diagonal entries are zero".into()));
    }
    LambdaPath::geometric(lambda_max, nlambda, lambda_min_ratio)
}
