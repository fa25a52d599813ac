//! Dense linear-algebra helpers shared across the crate.
//!
//! Everything is `f64`/`Complex64` on dynamically sized `nalgebra` matrices;
//! the state dimensions handled here are at most a few tens.

use nalgebra::{Cholesky, DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{RerError, Result};

pub type CMatrix = DMatrix<Complex64>;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Frobenius inner product `tr[M N^T]`, equal to `tr[MN]` for symmetric arguments.
pub fn trace_inner(m: &DMatrix<f64>, n: &DMatrix<f64>) -> f64 {
    m.iter().zip(n.iter()).map(|(a, b)| a * b).sum()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn min_herm_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest singular value of a Hermitian matrix, i.e. its largest |eigenvalue|.
pub fn herm_spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max)
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    Cholesky::new(symmetrize(m)).is_some()
}

/// `log det` of a Hermitian positive definite matrix via Cholesky.
pub fn herm_logdet(m: &CMatrix) -> Option<f64> {
    let chol = Cholesky::new(hermitian_part(m))?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += 2.0 * d.ln();
    }
    Some(acc)
}

pub fn sym_logdet(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(symmetrize(m))?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        acc += 2.0 * d.ln();
    }
    Some(acc)
}

fn sym_power(m: &DMatrix<f64>, what: &str, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let eig = symmetrize(m).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(RerError::NotPositiveDefinite(what.to_string()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    Ok(symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Symmetric square root of a symmetric positive definite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(m, "sym_sqrt", f64::sqrt)
}

pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(m, "sym_inv_sqrt", |l| 1.0 / l.sqrt())
}

pub fn sym_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(symmetrize(m))
        .ok_or_else(|| RerError::NotPositiveDefinite("sym_inverse".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Cholesky::new(symmetrize(m))
        .map(|c| c.l())
        .ok_or_else(|| RerError::NotPositiveDefinite(what.to_string()))
}

/// Solver for the Stein equation `X - F X F^T = Q` built on one complex
/// Schur decomposition of `F`, so repeated right-hand sides cost `O(n^3)` each.
#[derive(Debug, Clone)]
pub struct SteinSolver {
    u: CMatrix,
    t: CMatrix,
    radius: f64,
}

impl SteinSolver {
    pub fn new(f: &DMatrix<f64>) -> Result<Self> {
        if !f.is_square() {
            return Err(RerError::Dimension(format!(
                "Stein operator must be square, got {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        let n = f.nrows();
        if n == 0 {
            return Ok(Self {
                u: CMatrix::zeros(0, 0),
                t: CMatrix::zeros(0, 0),
                radius: 0.0,
            });
        }
        let schur = Schur::try_new(to_complex(f), f64::EPSILON, 10_000)
            .ok_or_else(|| RerError::Numerical("Schur decomposition did not converge".into()))?;
        let (u, t) = schur.unpack();
        let fc = to_complex(f);
        let err = (&u * &t * u.adjoint() - &fc).norm();
        if !(err <= 1e-10 * fc.norm().max(1.0)) {
            return Err(RerError::Numerical(format!("inaccurate Schur decomposition (error {err:.2e})")));
        }
        let radius = (0..n).map(|i| t[(i, i)].norm()).fold(0.0, f64::max);
        if radius >= 1.0 {
            return Err(RerError::Unstable { radius });
        }
        Ok(Self { u, t, radius })
    }

    pub fn spectral_radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn solve(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if q.nrows() != n || q.ncols() != n {
            return Err(RerError::Dimension(format!(
                "Stein right-hand side is {}x{}, expected {n}x{n}",
                q.nrows(),
                q.ncols()
            )));
        }
        if n == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        let t = &self.t;
        let qt = self.u.adjoint() * to_complex(q) * &self.u;
        let mut y = CMatrix::zeros(n, n);
        // Y - T Y T^* = Qt, T upper triangular: columns from last to first.
        for j in (0..n).rev() {
            let mut acc = nalgebra::DVector::<Complex64>::zeros(n);
            for l in (j + 1)..n {
                let w = t[(j, l)].conj();
                if w != Complex64::new(0.0, 0.0) {
                    acc.axpy(w, &y.column(l), Complex64::new(1.0, 0.0));
                }
            }
            let mut rhs: nalgebra::DVector<Complex64> = qt.column(j).into_owned() + t * acc;
            let tjj = t[(j, j)].conj();
            for i in (0..n).rev() {
                let mut s = rhs[i];
                for k in (i + 1)..n {
                    s += tjj * t[(i, k)] * y[(k, j)];
                }
                let diag = Complex64::new(1.0, 0.0) - tjj * t[(i, i)];
                y[(i, j)] = s / diag;
                rhs[i] = y[(i, j)];
            }
        }
        let x = &self.u * y * self.u.adjoint();
        Ok(x.map(|c| c.re))
    }

    /// Solve with a symmetric right-hand side, returning an exactly symmetric result.
    pub fn solve_symmetric(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(symmetrize(&self.solve(q)?))
    }
}

/// Kronecker-product solve of `X - F X F^T = Q` (`n^2` unknowns). Only
/// sensible for small `n`; kept as an independent cross-check of [`SteinSolver`].
pub fn solve_stein_kronecker(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let nn = n * n;
    let mut op = DMatrix::<f64>::identity(nn, nn);
    // vec(F X F^T) = (F kron F) vec(X) in column-major vec.
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            for l in 0..n {
                for k in 0..n {
                    op[(row, k + l * n)] -= f[(i, k)] * f[(j, l)];
                }
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| RerError::Numerical("singular Kronecker Stein operator".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Minimum-norm least-squares solution of `op x = rhs` through the
/// eigendecomposition of `op^T op`, discarding eigenvalues below
/// `rel_tol * max`, followed by two steps of iterative refinement.
pub fn least_squares(op: &DMatrix<f64>, rhs: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if op.nrows() != rhs.nrows() {
        return Err(RerError::Dimension("least_squares: row counts differ".into()));
    }
    let normal = symmetrize(&(op.transpose() * op));
    let eig = normal.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let cut = rel_tol * max.max(f64::MIN_POSITIVE);
    let inv = eig.eigenvalues.map(|l| if l > cut { 1.0 / l } else { 0.0 });
    let v = &eig.eigenvectors;
    let apply = |r: &DMatrix<f64>| -> DMatrix<f64> {
        let w = v.transpose() * (op.transpose() * r);
        let mut scaled = w;
        for (i, s) in inv.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*s);
        }
        v * scaled
    };
    let mut x = apply(rhs);
    for _ in 0..2 {
        let r = rhs - op * &x;
        x += apply(&r);
    }
    Ok(x)
}
