use thiserror::Error;

use crate::exec::Execution;
use crate::linalg::{Cholesky, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error("span must lie in (0, 1] (got {0})")]
    InvalidSpan(f64),
    #[error("output grid must be at least 2x2 (got {0}x{1})")]
    GridTooSmall(usize, usize),
    #[error("need at least 3 points to fit a local plane (got {0})")]
    TooFewPoints(usize),
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
}

/// Local-linear smoother settings. The kernel is always tricube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothSpec {
    /// Fraction of points used in each local fit.
    pub span: f64,
    /// Output nodes along the first and second covariate.
    pub grid: (usize, usize),
}

impl SmoothSpec {
    pub fn new(span: f64, grid: (usize, usize)) -> Result<Self, SmoothError> {
        if !(span > 0.0 && span <= 1.0) {
            return Err(SmoothError::InvalidSpan(span));
        }
        if grid.0 < 2 || grid.1 < 2 {
            return Err(SmoothError::GridTooSmall(grid.0, grid.1));
        }
        Ok(SmoothSpec { span, grid })
    }

    /// Neighbourhood size `ceil(span * n)`, at least 1.
    pub fn neighbours(&self, n: usize) -> usize {
        ((self.span * n as f64).ceil() as usize).clamp(1, n.max(1))
    }

    /// Whether the neighbourhood is large enough for a well-posed local
    /// plane (`span * n >= 4`). Smaller spans still run, but more nodes fall
    /// back to a weighted mean.
    pub fn is_adequate(&self, n: usize) -> bool {
        self.span * n as f64 >= 4.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFit {
    pub x1_nodes: Vec<f64>,
    pub x2_nodes: Vec<f64>,
    /// Row-major over `(x1, x2)`: node `(i, j)` at `i * x2_nodes.len() + j`.
    pub values: Vec<f64>,
    /// Nodes whose local design was singular and which report the
    /// tricube-weighted mean instead of a plane.
    pub degenerate: Vec<(usize, usize)>,
}

impl SurfaceFit {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.x2_nodes.len() + j]
    }
}

/// Fits a tricube-weighted local plane at each node of a regular grid
/// spanning the data's bounding box.
///
/// Neighbours are the `ceil(span * n)` points nearest the node in Euclidean
/// distance after standardizing each covariate; weights are
/// `(1 - (d / d_max)^3)^3` with `d_max` the largest neighbour distance.
/// No robustness iterations are run.
pub fn lowess_surface(
    points: &[(f64, f64, f64)],
    spec: &SmoothSpec,
) -> Result<SurfaceFit, SmoothError> {
    lowess_surface_with(points, spec, Execution::default())
}

pub fn lowess_surface_with(
    points: &[(f64, f64, f64)],
    spec: &SmoothSpec,
    exec: Execution,
) -> Result<SurfaceFit, SmoothError> {
    let spec = SmoothSpec::new(spec.span, spec.grid)?;
    let n = points.len();
    if n < 3 {
        return Err(SmoothError::TooFewPoints(n));
    }
    if let Some(i) = points
        .iter()
        .position(|(a, b, c)| !(a.is_finite() && b.is_finite() && c.is_finite()))
    {
        return Err(SmoothError::NonFinite(i));
    }

    let (m1, s1) = mean_sd(points.iter().map(|p| p.0));
    let (m2, s2) = mean_sd(points.iter().map(|p| p.1));
    let standardized: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(a, b, y)| ((a - m1) / s1, (b - m2) / s2, y))
        .collect();

    let bounds = |f: fn(&(f64, f64, f64)) -> f64| {
        points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (lo1, hi1) = bounds(|p| p.0);
    let (lo2, hi2) = bounds(|p| p.1);
    let x1_nodes = crate::sweep::linspace(lo1, hi1, spec.grid.0);
    let x2_nodes = crate::sweep::linspace(lo2, hi2, spec.grid.1);

    let q = spec.neighbours(n);
    let cols = spec.grid.1;
    let fits = exec.map_indexed(spec.grid.0 * cols, |idx| {
        let node = (
            (x1_nodes[idx / cols] - m1) / s1,
            (x2_nodes[idx % cols] - m2) / s2,
        );
        local_fit(&standardized, node, q)
    });

    let mut degenerate = Vec::new();
    let values = fits
        .into_iter()
        .enumerate()
        .map(|(idx, (v, ok))| {
            if !ok {
                degenerate.push((idx / cols, idx % cols));
            }
            v
        })
        .collect();

    Ok(SurfaceFit {
        x1_nodes,
        x2_nodes,
        values,
        degenerate,
    })
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Local plane at `node`; returns `(value, plane_ok)`.
fn local_fit(points: &[(f64, f64, f64)], node: (f64, f64), q: usize) -> (f64, bool) {
    let mut dist: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ((p.0 - node.0).hypot(p.1 - node.1), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let neighbours = &dist[..q];
    let d_max = neighbours[q - 1].0;

    let weight = |d: f64| {
        if d_max > 0.0 {
            let u = (d / d_max).min(1.0);
            let t = 1.0 - u * u * u;
            t * t * t
        } else {
            1.0
        }
    };

    // Weighted normal equations for y ~ c + b1 (x1 - node1) + b2 (x2 - node2).
    let mut gram = SymMatrix::zeros(3);
    let mut rhs = [0.0; 3];
    let (mut wsum, mut wy) = (0.0, 0.0);
    for &(d, i) in neighbours {
        let w = weight(d);
        if w == 0.0 {
            continue;
        }
        let (a, b, y) = points[i];
        let row = [1.0, a - node.0, b - node.1];
        for r in 0..3 {
            rhs[r] += w * row[r] * y;
            for c in 0..3 {
                gram.add(r, c, w * row[r] * row[c]);
            }
        }
        wsum += w;
        wy += w * y;
    }

    match Cholesky::factor(&gram) {
        Ok(chol) => (chol.solve(&rhs)[0], true),
        Err(_) if wsum > 0.0 => (wy / wsum, false),
        Err(_) => {
            let mean = neighbours.iter().map(|&(_, i)| points[i].2).sum::<f64>() / q as f64;
            (mean, false)
        }
    }
}
