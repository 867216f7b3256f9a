//! Dense symmetric solves shared by the estimation and detection code.
//!
//! Every normal-equation system in this crate is symmetric positive
//! (semi)definite. [`SpdSolver`] factors it with a Cholesky decomposition and
//! falls back to Tikhonov loading when the condition estimate exceeds
//! [`CONDITION_LIMIT`] or the factorization breaks down.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative condition number above which the diagonal is loaded.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Ridge added to the diagonal, relative to `trace / dim`.
pub const RIDGE_SCALE: f64 = 1e-10;

const POWER_ITERATIONS: usize = 30;

/// Diagnostics from a symmetric factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Estimated 2-norm condition number of the unregularized matrix.
    pub condition_estimate: f64,
    /// Whether a Tikhonov ridge was added before factoring.
    pub regularized: bool,
    /// The ridge that was added (zero when not regularized).
    pub ridge: f64,
}

/// Cholesky factorization with a Tikhonov fallback.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    chol: Cholesky<f64, Dyn>,
    report: SolveReport,
}

impl SpdSolver {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let sym = symmetrized(matrix);

        if let Some(chol) = Cholesky::new(sym.clone()) {
            let condition = condition_estimate(&sym, &chol);
            if condition <= CONDITION_LIMIT {
                return Ok(Self {
                    chol,
                    report: SolveReport {
                        condition_estimate: condition,
                        regularized: false,
                        ridge: 0.0,
                    },
                });
            }
            return Self::regularized(sym, condition);
        }
        Self::regularized(sym, f64::INFINITY)
    }

    fn regularized(sym: DMatrix<f64>, condition: f64) -> Result<Self> {
        let n = sym.nrows();
        let ridge = RIDGE_SCALE * sym.trace().abs() / n as f64;
        if ridge <= 0.0 || !ridge.is_finite() {
            return Err(Error::IllConditioned { condition });
        }
        let mut loaded = sym;
        for i in 0..n {
            loaded[(i, i)] += ridge;
        }
        let chol = Cholesky::new(loaded).ok_or(Error::IllConditioned { condition })?;
        Ok(Self {
            chol,
            report: SolveReport {
                condition_estimate: condition,
                regularized: true,
                ridge,
            },
        })
    }

    pub fn report(&self) -> SolveReport {
        self.report
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Power and inverse-power iteration estimate of `λ_max / λ_min`.
fn condition_estimate(sym: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let n = sym.nrows();
    if n == 1 {
        return 1.0;
    }
    let start = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_7).fract());
    let start = start.normalize();

    let mut v = start.clone();
    let mut lambda_max = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = sym * &v;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        lambda_max = v.dot(&w);
        v = w / norm;
    }

    let mut v = start;
    let mut inv_max = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = chol.solve(&v);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return f64::INFINITY;
        }
        inv_max = v.dot(&w);
        v = w / norm;
    }
    if inv_max <= 0.0 || lambda_max <= 0.0 {
        return f64::INFINITY;
    }
    lambda_max * inv_max
}

/// `(m + mᵀ) / 2`.
pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrized(m));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// PSD test with a tolerance relative to the trace magnitude.
pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = m.diagonal().iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    min_eigenvalue(m) >= -rel_tol * scale
}

/// Largest absolute entry, used for relative residuals.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Solves a symmetric tridiagonal system with the Thomas algorithm.
///
/// `diag` has length `n`, `off` has length `n - 1`. The matrix must be
/// diagonally dominant or positive definite for the sweep to be stable.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n || rhs.len() != n {
        return Err(Error::InvalidArgument("tridiagonal dimensions disagree".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::IllConditioned { condition: f64::INFINITY });
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
