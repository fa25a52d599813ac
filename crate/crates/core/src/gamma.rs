//! The covariance operator `Gamma(Phi) = int G Phi G^*`, its range, and the
//! normalization of a problem to the target `Sigma = I`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{RerError, Result};
use crate::linalg::{self, SteinSolver};
use crate::lti::{self, StateSpace};
use crate::quad;
use crate::spectra::SpectralDensity;

const BASIS_DROP_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-9;

/// Symmetric-vectorization of the upper triangle with `sqrt(2)` weights off the
/// diagonal, so that `svec(M) . svec(N) = tr(MN)`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            v[k] = if i == j {
                m[(i, i)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
            k += 1;
        }
    }
    v
}

pub fn smat(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// `Gamma(Phi)` for the bank `g = (zI - A)^{-1} B`.
///
/// Factor-form densities go through the state covariance of the cascade
/// `G W_Phi`; grid densities are averaged over their own grid.
pub fn gamma_apply(g: &StateSpace, phi: &SpectralDensity) -> Result<DMatrix<f64>> {
    check_bank(g, phi.dim())?;
    match phi {
        SpectralDensity::Factor(w) => {
            let cascade = lti::series(w, g)?;
            Ok(linalg::symmetrize(&cascade.output_covariance()?))
        }
        SpectralDensity::Grid(grid) => gamma_apply_quadrature(g, phi, grid.len()),
    }
}

/// `Gamma(Phi)` by the periodic rectangle rule on `count` points.
pub fn gamma_apply_quadrature(g: &StateSpace, phi: &SpectralDensity, count: usize) -> Result<DMatrix<f64>> {
    check_bank(g, phi.dim())?;
    let n = g.states();
    let m = quad::circle_mean_matrix(count, n, n, |t| {
        let gt = g.eval_transfer(t)?;
        Ok(&gt * phi.eval(t)? * gt.adjoint())
    })?;
    Ok(linalg::symmetrize(&quad::real_part(&m)))
}

fn check_bank(g: &StateSpace, m: usize) -> Result<()> {
    if g.inputs() != m || g.outputs() != g.states() {
        return Err(RerError::Dimension(format!(
            "bank has {} inputs and {} outputs for {} states; density is {m}x{m}",
            g.inputs(),
            g.outputs(),
            g.states()
        )));
    }
    Ok(())
}

/// Matrix of `H -> svec(B H + H^T B^T)` acting on column-major `vec(H)`.
fn feasibility_operator(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = b.shape();
    let mut op = DMatrix::zeros(n * (n + 1) / 2, m * n);
    for col in 0..n {
        for row in 0..m {
            let mut h = DMatrix::zeros(m, n);
            h[(row, col)] = 1.0;
            let bh = b * &h;
            op.set_column(col * m + row, &svec(&(&bh + bh.transpose())));
        }
    }
    op
}

/// Solve `Sigma - A Sigma A^T = B H + H^T B^T` for `H` in the least-squares sense.
///
/// Returns `Infeasible` when the residual exceeds `1e-9 (1 + ||Sigma||)`.
pub fn feasibility_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || sigma.shape() != (n, n) {
        return Err(RerError::Dimension("feasibility_solve: A, B, Sigma dimensions disagree".into()));
    }
    let m = b.ncols();
    let rhs = sigma - a * sigma * a.transpose();
    let op = feasibility_operator(b);
    let target = svec(&rhs);
    let target = DMatrix::from_column_slice(target.len(), 1, target.as_slice());
    let x = linalg::least_squares(&op, &target, 1e-12)?;
    let residual = (&op * &x - &target).norm();
    if residual > FEASIBILITY_TOL * (1.0 + sigma.norm()) {
        return Err(RerError::Infeasible { residual });
    }
    Ok(DMatrix::from_column_slice(m, n, x.as_slice()))
}

/// A covariance in `Range(Gamma)` together with its witness `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleCovariance {
    pub sigma: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl FeasibleCovariance {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if !linalg::is_positive_definite(&sigma) {
            return Err(RerError::NotPositiveDefinite("covariance".into()));
        }
        let h = feasibility_solve(a, b, &sigma)?;
        Ok(Self { sigma, h })
    }

    /// `||Sigma - A Sigma A^T - B H - H^T B^T||_F`.
    pub fn residual(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let bh = b * &self.h;
        (&self.sigma - a * &self.sigma * a.transpose() - &bh - bh.transpose()).norm()
    }
}

/// Positive definite matrices spanning `Range(Gamma)`, plus an orthonormal
/// basis of the same span for projections.
#[derive(Debug, Clone)]
pub struct GammaBasis {
    n: usize,
    elements: Vec<DMatrix<f64>>,
    orthonormal: Vec<DMatrix<f64>>,
    gram: Cholesky<f64, Dyn>,
}

impl GammaBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn orthonormal(&self) -> &[DMatrix<f64>] {
        &self.orthonormal
    }

    /// `sum_i c_i Sigma_i`.
    pub fn combine(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (c, s) in coords.iter().zip(&self.elements) {
            out += s * *c;
        }
        out
    }

    /// `[<Sigma_i, M>]_i`.
    pub fn inner_products(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.elements.iter().map(|s| linalg::trace_inner(s, m)))
    }

    /// Coordinates of the projection of `m` onto the span, in the PD basis.
    pub fn coordinates(&self, m: &DMatrix<f64>) -> DVector<f64> {
        self.gram.solve(&self.inner_products(m))
    }

    /// Orthogonal projection onto `Range(Gamma)` in the trace inner product.
    pub fn project_range(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let sym = linalg::symmetrize(m);
        let mut out = DMatrix::zeros(self.n, self.n);
        for q in &self.orthonormal {
            out += q * linalg::trace_inner(q, &sym);
        }
        out
    }

    /// Distance from `m` to the span, relative to `1 + ||m||`.
    pub fn relative_distance(&self, m: &DMatrix<f64>) -> f64 {
        (linalg::symmetrize(m) - self.project_range(m)).norm() / (1.0 + m.norm())
    }
}

/// Column-pivoted modified Gram-Schmidt; returns the chosen indices and the orthonormal vectors.
fn pivoted_gram_schmidt(vectors: &[DVector<f64>], tol: f64) -> (Vec<usize>, Vec<DVector<f64>>) {
    let mut work: Vec<DVector<f64>> = vectors.to_vec();
    let mut remaining: Vec<usize> = (0..vectors.len()).collect();
    let mut chosen = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    while !remaining.is_empty() {
        let (pos, &best) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| work[*x.1].norm().total_cmp(&work[*y.1].norm()))
            .expect("non-empty");
        let norm = work[best].norm();
        if norm <= tol {
            break;
        }
        let q = &work[best] / norm;
        remaining.swap_remove(pos);
        for &r in &remaining {
            let proj = q.dot(&work[r]);
            work[r].axpy(-proj, &q, 1.0);
        }
        chosen.push(best);
        basis.push(q);
    }
    (chosen, basis)
}

/// Basis of `Range(Gamma)` for a stable reachable pair `(A, B)`.
///
/// Generators solve `S - A S A^T = B H_k + H_k^T B^T` for every canonical
/// `H_k`. A maximal independent subset is kept and each element is shifted by
/// a multiple of a PD matrix of the range (`I` when available, otherwise the
/// reachability Gramian) until it is positive definite.
pub fn range_gamma_basis(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GammaBasis> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(RerError::Dimension("range_gamma_basis: A must be square with B matching".into()));
    }
    let m = b.ncols();
    let gramian = lti::reachability_gramian(a, b)?;
    let stein = SteinSolver::new(a)?;

    let generators: Vec<DMatrix<f64>> = (0..m * n)
        .into_par_iter()
        .map(|k| {
            let mut h = DMatrix::zeros(m, n);
            h[(k % m, k / m)] = 1.0;
            let bh = b * &h;
            let s = stein.solve_symmetric(&(&bh + bh.transpose()))?;
            let norm = s.norm();
            Ok(if norm > 0.0 { s / norm } else { s })
        })
        .collect::<Result<_>>()?;
    let vecs: Vec<DVector<f64>> = generators.iter().map(svec).collect();
    let (chosen, ortho) = pivoted_gram_schmidt(&vecs, BASIS_DROP_TOL);
    let independent: Vec<DMatrix<f64>> = chosen.iter().map(|&i| generators[i].clone()).collect();
    let orthonormal: Vec<DMatrix<f64>> = ortho.iter().map(|v| smat(v, n)).collect();

    let identity = DMatrix::identity(n, n);
    let in_span = {
        let mut proj = DMatrix::zeros(n, n);
        for q in &orthonormal {
            proj += q * linalg::trace_inner(q, &identity);
        }
        (&identity - proj).norm() <= 1e-9 * (n as f64).sqrt()
    };
    let shift = if in_span { identity } else { &gramian / gramian.norm() };
    let shift_inv_sqrt = linalg::sym_inv_sqrt(&shift)?;
    let mut alphas: Vec<f64> = independent
        .iter()
        .map(|s| {
            let t = &shift_inv_sqrt * s * &shift_inv_sqrt;
            1.0 + (-linalg::min_sym_eigenvalue(&linalg::symmetrize(&t))).max(0.0)
        })
        .collect();

    for _ in 0..64 {
        let elements: Vec<DMatrix<f64>> = independent
            .iter()
            .zip(&alphas)
            .map(|(s, al)| linalg::symmetrize(&(s + &shift * *al)))
            .collect();
        let svecs: Vec<DVector<f64>> = elements.iter().map(svec).collect();
        let scaled: Vec<DVector<f64>> = svecs.iter().map(|v| v / v.norm()).collect();
        let (kept, _) = pivoted_gram_schmidt(&scaled, BASIS_DROP_TOL);
        if kept.len() == independent.len() {
            let k = elements.len();
            let gram = DMatrix::from_fn(k, k, |i, j| linalg::trace_inner(&elements[i], &elements[j]));
            let gram = Cholesky::new(gram)
                .ok_or_else(|| RerError::Numerical("basis Gram matrix is singular".into()))?;
            return Ok(GammaBasis {
                n,
                elements,
                orthonormal,
                gram,
            });
        }
        alphas.iter_mut().for_each(|a| *a *= 2.0);
    }
    Err(RerError::Numerical("could not shift the Range(Gamma) generators to an independent PD set".into()))
}

/// Best approximant of `sigma_hat` in `Range(Gamma)` under
/// `D(Sigma || Sigma_hat) = 1/2 [log det Sigma^{-1} Sigma_hat + tr Sigma_hat^{-1} Sigma - n]`.
pub fn project_covariance(
    sigma_hat: &DMatrix<f64>,
    basis: &GammaBasis,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<FeasibleCovariance> {
    let n = basis.state_dim();
    if sigma_hat.shape() != (n, n) {
        return Err(RerError::Dimension("project_covariance: Sigma_hat has wrong size".into()));
    }
    let hat_inv = linalg::sym_inverse(sigma_hat)?;
    let qs = basis.orthonormal();
    let k = qs.len();
    let combine = |c: &DVector<f64>| {
        let mut out = DMatrix::zeros(n, n);
        for (ci, q) in c.iter().zip(qs) {
            out += q * *ci;
        }
        out
    };
    let objective = |s: &DMatrix<f64>| -> Option<f64> {
        let ld = linalg::sym_logdet(s)?;
        Some(0.5 * (-ld + linalg::trace_inner(&hat_inv, s)))
    };

    let mut c = DVector::from_iterator(k, qs.iter().map(|q| linalg::trace_inner(q, sigma_hat)));
    if !linalg::is_positive_definite(&combine(&c)) {
        let s = basis.elements().iter().fold(DMatrix::zeros(n, n), |acc, e| acc + e);
        let t = n as f64 / linalg::trace_inner(&hat_inv, &s);
        let s = s * t;
        c = DVector::from_iterator(k, qs.iter().map(|q| linalg::trace_inner(q, &s)));
    }
    let mut sigma = combine(&c);
    let mut f = objective(&sigma).ok_or_else(|| RerError::NotPositiveDefinite("projection start".into()))?;
    let mut trace = Vec::new();
    let mut prev_decrement = None;
    let mut floor_steps = 0;
    for iter in 0..100 {
        let sigma_inv = linalg::sym_inverse(&sigma)?;
        let diff = &hat_inv - &sigma_inv;
        let grad = DVector::from_iterator(k, qs.iter().map(|q| 0.5 * linalg::trace_inner(&diff, q)));
        let gnorm = grad.amax();
        trace.push(gnorm);
        if gnorm <= 1e-12 * (1.0 + hat_inv.norm()) {
            return FeasibleCovariance::new(a, b, sigma);
        }
        let whitened: Vec<DMatrix<f64>> = qs.iter().map(|q| &sigma_inv * q).collect();
        let hess = DMatrix::from_fn(k, k, |i, j| 0.5 * (&whitened[i] * &whitened[j]).trace());
        let step = Cholesky::new(linalg::symmetrize(&hess))
            .ok_or_else(|| RerError::Numerical("projection Hessian is not positive definite".into()))?
            .solve(&(-&grad));
        let slope = grad.dot(&step);
        let decrement = -slope;
        if decrement <= 1e-13 * f.abs().max(1.0) {
            // Objective differences are rounding noise here: take the pure Newton step.
            let cand_c = &c + &step;
            let cand = combine(&cand_c);
            match objective(&cand) {
                Some(fc) if floor_steps < 3 => {
                    floor_steps += 1;
                    c = cand_c;
                    sigma = cand;
                    f = fc;
                    continue;
                }
                _ => return FeasibleCovariance::new(a, b, sigma),
            }
        }
        let stagnant = prev_decrement.is_some_and(|p: f64| decrement > 0.25 * p);
        if decrement <= 1e-8 * f.abs().max(1.0) && stagnant {
            return FeasibleCovariance::new(a, b, sigma);
        }
        prev_decrement = Some(decrement);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand_c = &c + &step * t;
            let cand = combine(&cand_c);
            if let Some(fc) = objective(&cand) {
                if fc <= f + 1e-4 * t * slope {
                    c = cand_c;
                    sigma = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            log::debug!("covariance projection line search stalled at iteration {iter}");
            return FeasibleCovariance::new(a, b, sigma);
        }
    }
    Err(RerError::NonConvergence {
        iterations: 100,
        grad_norm: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}

/// `D(Sigma || Sigma_hat)` for symmetric PD arguments.
pub fn gaussian_kl(sigma: &DMatrix<f64>, sigma_hat: &DMatrix<f64>) -> Result<f64> {
    let n = sigma.nrows() as f64;
    let ld = linalg::sym_logdet(sigma).ok_or_else(|| RerError::NotPositiveDefinite("Sigma".into()))?;
    let ld_hat = linalg::sym_logdet(sigma_hat).ok_or_else(|| RerError::NotPositiveDefinite("Sigma_hat".into()))?;
    let hat_inv = linalg::sym_inverse(sigma_hat)?;
    Ok(0.5 * (ld_hat - ld + linalg::trace_inner(&hat_inv, sigma) - n))
}

/// A problem rescaled so that its covariance target is the identity.
#[derive(Debug, Clone)]
pub struct Normalization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma_sqrt: DMatrix<f64>,
    pub sigma_inv_sqrt: DMatrix<f64>,
}

impl Normalization {
    /// `Lambda_orig = Sigma^{-1/2} Lambda' Sigma^{-1/2}`.
    pub fn lambda_to_original(&self, lambda: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.sigma_inv_sqrt * lambda * &self.sigma_inv_sqrt))
    }

    pub fn lambda_to_normalized(&self, lambda: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.sigma_sqrt * lambda * &self.sigma_sqrt))
    }

    pub fn bank(&self) -> Result<StateSpace> {
        StateSpace::filter_bank(self.a.clone(), self.b.clone())
    }
}

/// `A' = Sigma^{-1/2} A Sigma^{1/2}`, `B' = Sigma^{-1/2} B`.
pub fn normalize_problem(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<Normalization> {
    let sigma_sqrt = linalg::sym_sqrt(sigma)?;
    let sigma_inv_sqrt = linalg::sym_inv_sqrt(sigma)?;
    Ok(Normalization {
        a: &sigma_inv_sqrt * a * &sigma_sqrt,
        b: &sigma_inv_sqrt * b,
        sigma_sqrt,
        sigma_inv_sqrt,
    })
}
