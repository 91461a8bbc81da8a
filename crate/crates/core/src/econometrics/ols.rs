use thiserror::Error;

use crate::linalg::{Cholesky, SymMatrix};

/// Name given to the intercept term.
pub const INTERCEPT: &str = "const";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("regressor {name:?} has {got} observations, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error(
        "{n} observations cannot identify {params} parameters with a residual degree of freedom"
    )]
    TooFewObservations { n: usize, params: usize },
    #[error("design matrix is rank deficient at regressor {column:?} (collinear regressors)")]
    RankDeficient { column: String },
    #[error("non-finite value in {name:?}")]
    NonFinite { name: String },
    #[error("response has zero variance")]
    ConstantResponse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
}

/// OLS fit with classical (homoskedastic) standard errors.
///
/// With an intercept, R^2 is centered and `F = (R^2/k) / ((1-R^2)/(n-k-1))`.
/// Without one, R^2 is uncentered and the residual degrees of freedom are
/// `n - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    /// Slopes in input order, then the intercept (if any).
    pub coefficients: Vec<Coefficient>,
    pub f_stat: f64,
    pub r2: f64,
    pub r2_adj: f64,
    pub n: usize,
    /// Number of slope regressors (intercept excluded).
    pub k: usize,
    pub intercept: bool,
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn df_resid(&self) -> usize {
        self.n - self.k - usize::from(self.intercept)
    }

    pub fn get(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub fn ols(
    y: &[f64],
    regressors: &[(&str, &[f64])],
    intercept: bool,
) -> Result<RegressionResult, RegressionError> {
    let n = y.len();
    let k = regressors.len();
    let p = k + usize::from(intercept);
    for (name, col) in regressors {
        if col.len() != n {
            return Err(RegressionError::LengthMismatch {
                name: name.to_string(),
                got: col.len(),
                expected: n,
            });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFinite {
                name: name.to_string(),
            });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite {
            name: "response".into(),
        });
    }
    if p == 0 || n <= p {
        return Err(RegressionError::TooFewObservations { n, params: p });
    }

    let column = |j: usize, row: usize| -> f64 {
        if j < k {
            regressors[j].1[row]
        } else {
            1.0
        }
    };
    let names: Vec<&str> = regressors
        .iter()
        .map(|(name, _)| *name)
        .chain(intercept.then_some(INTERCEPT))
        .collect();

    let mut gram = SymMatrix::zeros(p);
    let mut rhs = vec![0.0; p];
    for (row, &yr) in y.iter().enumerate() {
        for (i, acc) in rhs.iter_mut().enumerate() {
            let xi = column(i, row);
            *acc += xi * yr;
            for j in 0..=i {
                gram.add(i, j, xi * column(j, row));
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            let v = gram.get(i, j);
            gram.data[j * p + i] = v;
        }
    }

    let chol = Cholesky::factor(&gram).map_err(|e| RegressionError::RankDeficient {
        column: names[e.column].to_string(),
    })?;
    let beta = chol.solve(&rhs);

    let residuals: Vec<f64> = (0..n)
        .map(|row| y[row] - (0..p).map(|j| beta[j] * column(j, row)).sum::<f64>())
        .collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let sst: f64 = if intercept {
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - mean) * (v - mean)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    if sst == 0.0 {
        return Err(RegressionError::ConstantResponse);
    }

    let df = (n - p) as f64;
    let r2 = 1.0 - ssr / sst;
    let r2_adj = if intercept {
        1.0 - (1.0 - r2) * (n as f64 - 1.0) / df
    } else {
        1.0 - (1.0 - r2) * n as f64 / df
    };
    let f_stat = if k > 0 {
        (r2 / k as f64) / ((1.0 - r2) / df)
    } else {
        f64::NAN
    };

    let sigma2 = ssr / df;
    let coefficients = chol
        .inverse_diagonal()
        .into_iter()
        .zip(&beta)
        .zip(&names)
        .map(|((inv, &coef), name)| {
            let se = (sigma2 * inv).sqrt();
            Coefficient {
                name: name.to_string(),
                coef,
                se,
                t: coef / se,
            }
        })
        .collect();

    Ok(RegressionResult {
        coefficients,
        f_stat,
        r2,
        r2_adj,
        n,
        k,
        intercept,
        residuals,
    })
}
