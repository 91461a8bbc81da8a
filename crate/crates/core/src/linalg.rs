//! Small dense symmetric positive-definite solves.
#![allow(clippy::needless_range_loop)]

/// Symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub(crate) struct SymMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
    }
}

/// Cholesky factor of a diagonally equilibrated SPD matrix.
///
/// The matrix is scaled to unit diagonal before factoring, so the pivot
/// threshold (`1e-10` times the largest diagonal, i.e. `1e-10`) is invariant
/// to column scaling of the underlying design.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    dim: usize,
    scale: Vec<f64>,
    lower: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RankDeficient {
    /// Index of the first column whose pivot fell below the threshold.
    pub column: usize,
}

pub(crate) const PIVOT_THRESHOLD: f64 = 1e-10;

impl Cholesky {
    pub fn factor(m: &SymMatrix) -> Result<Self, RankDeficient> {
        let dim = m.dim;
        let mut scale = Vec::with_capacity(dim);
        for i in 0..dim {
            let d = m.get(i, i);
            if !d.is_finite() || d <= 0.0 {
                return Err(RankDeficient { column: i });
            }
            scale.push(1.0 / d.sqrt());
        }
        let mut lower = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut pivot = m.get(j, j) * scale[j] * scale[j];
            for k in 0..j {
                pivot -= lower[j * dim + k] * lower[j * dim + k];
            }
            if pivot <= PIVOT_THRESHOLD {
                return Err(RankDeficient { column: j });
            }
            let root = pivot.sqrt();
            lower[j * dim + j] = root;
            for i in (j + 1)..dim {
                let mut v = m.get(i, j) * scale[i] * scale[j];
                for k in 0..j {
                    v -= lower[i * dim + k] * lower[j * dim + k];
                }
                lower[i * dim + j] = v / root;
            }
        }
        Ok(Cholesky { dim, scale, lower })
    }

    /// Solves `M x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        // Solve (S M S) z = S rhs, then x = S z.
        let mut z: Vec<f64> = rhs.iter().zip(&self.scale).map(|(r, s)| r * s).collect();
        for i in 0..dim {
            let mut v = z[i];
            for k in 0..i {
                v -= self.lower[i * dim + k] * z[k];
            }
            z[i] = v / self.lower[i * dim + i];
        }
        for i in (0..dim).rev() {
            let mut v = z[i];
            for k in (i + 1)..dim {
                v -= self.lower[k * dim + i] * z[k];
            }
            z[i] = v / self.lower[i * dim + i];
        }
        z.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    /// Diagonal of `M^{-1}`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let mut e = vec![0.0; self.dim];
                e[j] = 1.0;
                self.solve(&e)[j]
            })
            .collect()
    }
}
