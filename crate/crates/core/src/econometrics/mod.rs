//! Cross-sectional return econometrics: observation loading, OLS with
//! classical standard errors, significance-starred tables, and a bivariate
//! local-linear (LOWESS-style) surface smoother.

mod data;
pub mod dist;
mod lowess;
mod ols;
mod table;

pub use data::{load_observations, DataError, Observation, ObservationTable, COLUMNS};
pub use lowess::{lowess_surface, lowess_surface_with, SmoothError, SmoothSpec, SurfaceFit};
pub use ols::{ols, Coefficient, RegressionError, RegressionResult, INTERCEPT};
pub use table::{format_table, regression_json, significance_stars};
