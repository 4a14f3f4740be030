//! Small dense helpers on top of nalgebra: a Cholesky factorization with an
//! explicit pivot floor, symmetry handling and induced norms.

use nalgebra::SymmetricEigen;

use crate::Matrix;

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors a symmetric matrix, failing when any pivot is `<= floor`.
    ///
    /// Only the lower triangle of `m` is read.
    pub fn with_floor(m: &Matrix, floor: f64) -> Option<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return None;
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) || !d.is_finite() {
                return None;
            }
            let ljj = libm::sqrt(d);
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(Self { l })
    }

    /// Pivot floor `rel · trace(M)/n`.
    pub fn with_trace_tolerance(m: &Matrix, rel: f64) -> Option<Self> {
        let n = m.nrows().max(1) as f64;
        let floor = rel * (m.trace() / n).max(0.0);
        Self::with_floor(m, floor)
    }

    /// Pivot floor `rel · max_i M_ii`.
    pub fn with_diagonal_tolerance(m: &Matrix, rel: f64) -> Option<Self> {
        let floor = rel * max_diagonal(m).max(0.0);
        Self::with_floor(m, floor)
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Solves `M X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.nrows();
        symmetrize(&self.solve(&Matrix::identity(n, n)))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|&d| libm::log(d)).sum::<f64>()
    }
}

/// Relative tolerance used by the model validator.
pub const MODEL_PIVOT_TOLERANCE: f64 = 1e-12;
/// Relative tolerance used by the Riccati feasibility checks.
pub const RICCATI_PIVOT_TOLERANCE: f64 = 1e-10;

pub fn max_diagonal(m: &Matrix) -> f64 {
    m.diagonal()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `max|M - Mᵀ| / max|M|`, zero for the zero matrix.
pub fn relative_asymmetry(m: &Matrix) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(m - m.transpose())) / scale
}

pub fn is_positive_definite(m: &Matrix, rel: f64) -> bool {
    Cholesky::with_diagonal_tolerance(m, rel).is_some()
}

/// Semidefinite Cholesky: pivots within `rel · max diag` of zero are accepted
/// provided the rest of their column vanishes as well.
pub fn is_positive_semidefinite(m: &Matrix, rel: f64) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    let scale = max_diagonal(m).max(0.0);
    if scale == 0.0 {
        return max_abs(m) == 0.0;
    }
    let tol = rel * scale;
    let col_tol = libm::sqrt(rel) * scale;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return false;
        }
        if d <= tol {
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > col_tol {
                    return false;
                }
            }
            continue;
        }
        let ljj = libm::sqrt(d);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    true
}

/// Maximum absolute column sum.
pub fn induced_norm_1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value, via the largest eigenvalue of `MᵀM`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = symmetrize(&(m.transpose() * m));
    let lmax = max_eigenvalue(&gram);
    libm::sqrt(lmax.max(0.0))
}

pub fn max_eigenvalue(sym: &Matrix) -> f64 {
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue(sym: &Matrix) -> f64 {
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// General inverse through LU; `None` when singular.
pub fn lu_inverse(m: &Matrix) -> Option<Matrix> {
    m.clone().try_inverse()
}
