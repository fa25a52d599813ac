//! Spectral factorization of `Q_Lambda = I + G1^* Lambda G1` through the
//! discrete algebraic Riccati equation, and the integrals the dual solver needs.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{RerError, Result};
use crate::linalg::{self, SteinSolver};
use crate::lti::StateSpace;

const MAX_NEWTON_STEPS: usize = 200;
const DARE_RESIDUAL_TOL: f64 = 1e-9;

/// Why a multiplier admits no stabilizing factorization.
#[derive(Debug, Clone, PartialEq)]
pub enum NotFactorizable {
    /// `B1^T P B1 + I` lost positive definiteness during the iteration.
    IndefiniteGain { step: usize },
    /// The closed loop of some Newton iterate is not stable.
    UnstableClosedLoop { step: usize, radius: f64 },
    /// The iteration did not settle or the final residual is too large.
    NoConvergence { steps: usize, residual: f64 },
}

/// Stabilizing DARE solution for a given `Lambda`.
#[derive(Debug, Clone)]
pub struct RiccatiCertificate {
    pub p: DMatrix<f64>,
    /// `Omega = B1^T P B1 + I`.
    pub omega: DMatrix<f64>,
    pub omega_inv_sqrt: DMatrix<f64>,
    /// `K = Omega^{-1} B1^T P A1`.
    pub gain: DMatrix<f64>,
    /// `Z1 = A1 - B1 K`.
    pub closed_loop: DMatrix<f64>,
    pub residual: f64,
    pub steps: usize,
    /// Diagnostic only; the stabilizing solution need not be definite.
    pub p_positive_definite: bool,
}

pub type DareOutcome = std::result::Result<RiccatiCertificate, NotFactorizable>;

/// `G1 = C1 (zI - A1)^{-1} B1` must be stable and strictly proper.
pub fn check_g1(g1: &StateSpace) -> Result<()> {
    if g1.d.iter().any(|x| *x != 0.0) {
        return Err(RerError::InvalidArgument("G1 must be strictly proper".into()));
    }
    let radius = g1.spectral_radius();
    if radius >= 1.0 {
        return Err(RerError::Unstable { radius });
    }
    Ok(())
}

fn dare_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, p: &DMatrix<f64>) -> Option<f64> {
    let omega = b.transpose() * p * b + DMatrix::identity(b.ncols(), b.ncols());
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(&omega))?;
    let bpa = b.transpose() * p * a;
    let r = a.transpose() * p * a - a.transpose() * p * b * chol.solve(&bpa) + q - p;
    Some(r.norm() / p.norm().max(1.0))
}

/// Stabilizing solution of
/// `P = A1^T P A1 - A1^T P B1 (B1^T P B1 + I)^{-1} B1^T P A1 + C1^T Lambda C1`
/// by Newton's method from `P = 0`.
///
/// Returns `Ok(Err(_))` when `Lambda` is outside the factorizable set.
pub fn solve_dare(g1: &StateSpace, lambda: &DMatrix<f64>) -> Result<DareOutcome> {
    check_g1(g1)?;
    let (a, b, c) = (&g1.a, &g1.b, &g1.c);
    let p_out = c.nrows();
    if lambda.shape() != (p_out, p_out) {
        return Err(RerError::Dimension(format!(
            "Lambda is {}x{}, G1 has {p_out} outputs",
            lambda.nrows(),
            lambda.ncols()
        )));
    }
    let m = b.ncols();
    let q = linalg::symmetrize(&(c.transpose() * linalg::symmetrize(lambda) * c));
    let mut gain = DMatrix::zeros(m, a.nrows());
    let mut closed = a.clone();
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    for step in 0..MAX_NEWTON_STEPS {
        let stein = match SteinSolver::new(&closed.transpose()) {
            Ok(s) => s,
            Err(RerError::Unstable { radius }) => {
                return Ok(Err(NotFactorizable::UnstableClosedLoop { step, radius }));
            }
            Err(e) => return Err(e),
        };
        let next = stein.solve_symmetric(&(&q + gain.transpose() * &gain))?;
        let omega = b.transpose() * &next * b + DMatrix::identity(m, m);
        let Some(chol) = nalgebra::Cholesky::new(linalg::symmetrize(&omega)) else {
            return Ok(Err(NotFactorizable::IndefiniteGain { step }));
        };
        gain = chol.solve(&(b.transpose() * &next * a));
        closed = a - b * &gain;
        let change = (&next - &p).norm();
        p = next;
        if change <= 1e-12 * p.norm().max(1.0) {
            return Ok(certify(g1, &q, p, step + 1));
        }
    }
    // Rounding can keep the step from settling; the residual test decides.
    Ok(certify(g1, &q, p, MAX_NEWTON_STEPS))
}

fn certify(g1: &StateSpace, q: &DMatrix<f64>, p: DMatrix<f64>, steps: usize) -> DareOutcome {
    let (a, b) = (&g1.a, &g1.b);
    let m = b.ncols();
    let omega = linalg::symmetrize(&(b.transpose() * &p * b + DMatrix::identity(m, m)));
    let Ok(omega_inv_sqrt) = linalg::sym_inv_sqrt(&omega) else {
        return Err(NotFactorizable::IndefiniteGain { step: steps });
    };
    let Ok(omega_inv) = linalg::sym_inverse(&omega) else {
        return Err(NotFactorizable::IndefiniteGain { step: steps });
    };
    let gain = omega_inv * b.transpose() * &p * a;
    let closed_loop = a - b * &gain;
    let radius = linalg::spectral_radius(&closed_loop);
    if radius >= 1.0 {
        return Err(NotFactorizable::UnstableClosedLoop { step: steps, radius });
    }
    let residual = dare_residual(a, b, q, &p).unwrap_or(f64::INFINITY);
    if !(residual <= DARE_RESIDUAL_TOL) {
        return Err(NotFactorizable::NoConvergence { steps, residual });
    }
    let p = linalg::symmetrize(&p);
    Ok(RiccatiCertificate {
        p_positive_definite: linalg::is_positive_definite(&p),
        p,
        omega,
        omega_inv_sqrt,
        gain,
        closed_loop,
        residual,
        steps,
    })
}

/// Minimum-phase factor `Delta` with `Delta^* Delta = I + G1^* Lambda G1` on the circle.
pub fn spectral_factor_delta(g1: &StateSpace, cert: &RiccatiCertificate) -> Result<StateSpace> {
    let omega_sqrt = linalg::sym_sqrt(&cert.omega)?;
    let c = &cert.omega_inv_sqrt * g1.b.transpose() * &cert.p * &g1.a;
    StateSpace::new(g1.a.clone(), g1.b.clone(), c, omega_sqrt)
}

/// `int log det(I + G1^* Lambda G1) = log det(B1^T P B1 + I)`.
pub fn logdet_integral(cert: &RiccatiCertificate) -> Result<f64> {
    linalg::sym_logdet(&cert.omega).ok_or_else(|| RerError::NotPositiveDefinite("Omega".into()))
}

/// Precomputed pieces for `Y` and `Y_k` at one certificate.
///
/// `W_Y = G1 Delta^{-1} = C1 (zI - Z1)^{-1} B1 Omega^{-1/2}` and `R` is its state covariance.
pub struct FactorIntegrals {
    c1: DMatrix<f64>,
    b_tilde: DMatrix<f64>,
    z: DMatrix<f64>,
    z_solver: SteinSolver,
    zt_solver: SteinSolver,
    r: DMatrix<f64>,
}

impl FactorIntegrals {
    pub fn new(g1: &StateSpace, cert: &RiccatiCertificate) -> Result<Self> {
        let z = cert.closed_loop.clone();
        let z_solver = SteinSolver::new(&z)?;
        let zt_solver = SteinSolver::new(&z.transpose())?;
        let b_tilde = &g1.b * &cert.omega_inv_sqrt;
        let r = z_solver.solve_symmetric(&(&b_tilde * b_tilde.transpose()))?;
        Ok(Self {
            c1: g1.c.clone(),
            b_tilde,
            z,
            z_solver,
            zt_solver,
            r,
        })
    }

    /// `int W_Y W_Y^*`.
    pub fn gamma_of_optimum(&self) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.c1 * &self.r * self.c1.transpose()))
    }

    /// `Y = int G1 Q^{-1} G1^* - I`.
    pub fn y(&self) -> DMatrix<f64> {
        let n = self.c1.nrows();
        self.gamma_of_optimum() - DMatrix::identity(n, n)
    }

    /// `Y_k = int W_Y W_Y^* Sigma_k W_Y W_Y^*`.
    ///
    /// `W_Y^* Sigma_k W_Y = N + N^*` with `N = D_k + H_k (zI - Z1)^{-1} B~`, so
    /// `Y_k` is the symmetric part of a cross covariance of two cascades.
    pub fn yk(&self, sigma_k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.c1.nrows();
        if sigma_k.shape() != (n, n) {
            return Err(RerError::Dimension(format!("Sigma_k must be {n}x{n}")));
        }
        let rk = self
            .zt_solver
            .solve_symmetric(&(self.c1.transpose() * sigma_k * &self.c1))?;
        let bt = &self.b_tilde;
        let h = bt.transpose() * &rk * &self.z;
        let cross = bt * h * &self.r * self.z.transpose();
        let rhs = &cross + cross.transpose() + bt * (bt.transpose() * &rk * bt) * bt.transpose();
        let s = self.z_solver.solve_symmetric(&rhs)?;
        Ok(linalg::symmetrize(&(&self.c1 * s * self.c1.transpose())))
    }

    /// `Y_k` for every element, computed in parallel, in input order.
    pub fn yk_all(&self, sigmas: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        sigmas.par_iter().map(|s| self.yk(s)).collect()
    }
}

pub fn compute_y(g1: &StateSpace, cert: &RiccatiCertificate) -> Result<DMatrix<f64>> {
    Ok(FactorIntegrals::new(g1, cert)?.y())
}

pub fn compute_yk(g1: &StateSpace, cert: &RiccatiCertificate, sigma_k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    FactorIntegrals::new(g1, cert)?.yk(sigma_k)
}

/// Smallest eigenvalue of `I + G1^* Lambda G1` over the given angles.
pub fn min_popov_eigenvalue(g1: &StateSpace, lambda: &DMatrix<f64>, thetas: &[f64]) -> Result<f64> {
    let lc = linalg::to_complex(lambda);
    let vals = thetas
        .par_iter()
        .map(|&t| {
            let g = g1.eval_transfer(t)?;
            let q = crate::linalg::CMatrix::identity(g.ncols(), g.ncols()) + g.adjoint() * &lc * &g;
            Ok(linalg::min_herm_eigenvalue(&linalg::hermitian_part(&q)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::lti::uniform_grid;
    use crate::quad;

    fn delay() -> StateSpace {
        StateSpace::filter_bank(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0)).unwrap()
    }

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn sample_g1() -> StateSpace {
        StateSpace::new(
            DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, -0.3, 0.4, 0.1, 0.0, 0.2, -0.6]),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 1.0, -0.5, 0.4]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, -0.2]),
            DMatrix::zeros(2, 2),
        )
        .unwrap()
    }

    fn sample_lambda() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.4, -0.15, -0.15, 0.25])
    }

    fn q_at(g1: &StateSpace, lambda: &DMatrix<f64>, t: f64) -> CMatrix {
        let g = g1.eval_transfer(t).unwrap();
        CMatrix::identity(g.ncols(), g.ncols()) + g.adjoint() * linalg::to_complex(lambda) * &g
    }

    #[test]
    fn zero_multiplier_gives_trivial_factor() {
        let g1 = sample_g1();
        let cert = solve_dare(&g1, &DMatrix::zeros(2, 2)).unwrap().unwrap();
        assert!(cert.p.norm() < 1e-15);
        assert!((&cert.closed_loop - &g1.a).norm() < 1e-15);
        assert!(!cert.p_positive_definite);
        let delta = spectral_factor_delta(&g1, &cert).unwrap();
        assert!((delta.eval_transfer(0.7).unwrap() - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert!(logdet_integral(&cert).unwrap().abs() < 1e-15);
    }

    #[test]
    fn scalar_delay_examples() {
        let g1 = delay();
        let cert = solve_dare(&g1, &scalar(3.0)).unwrap().unwrap();
        assert!((cert.p[(0, 0)] - 3.0).abs() < 1e-14);
        let delta = spectral_factor_delta(&g1, &cert).unwrap();
        assert!((delta.d[(0, 0)] - 2.0).abs() < 1e-14);
        let v = delta.eval_transfer(1.3).unwrap()[(0, 0)];
        assert!((v.norm_sqr() - 4.0).abs() < 1e-13);
        assert!((logdet_integral(&cert).unwrap() - 4f64.ln()).abs() < 1e-14);
        assert!((compute_y(&g1, &cert).unwrap()[(0, 0)] + 0.75).abs() < 1e-14);
        assert!((compute_yk(&g1, &cert, &scalar(1.0)).unwrap()[(0, 0)] - 1.0 / 16.0).abs() < 1e-14);

        let cert0 = solve_dare(&g1, &scalar(0.0)).unwrap().unwrap();
        assert!(compute_y(&g1, &cert0).unwrap()[(0, 0)].abs() < 1e-15);
        assert!((compute_yk(&g1, &cert0, &scalar(1.0)).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);

        assert!(solve_dare(&g1, &scalar(-1.0)).unwrap().is_err());
        assert!(solve_dare(&g1, &scalar(-1.5)).unwrap().is_err());
        assert!(solve_dare(&g1, &scalar(-0.999)).unwrap().is_ok());
    }

    #[test]
    fn factor_matches_popov_function_on_grid() {
        let g1 = sample_g1();
        let lambda = sample_lambda();
        let cert = solve_dare(&g1, &lambda).unwrap().unwrap();
        let delta = spectral_factor_delta(&g1, &cert).unwrap();
        assert!(delta.is_stable());
        assert!(linalg::spectral_radius(&cert.closed_loop) < 1.0);
        for t in uniform_grid(64) {
            let d = delta.eval_transfer(t).unwrap();
            assert!((d.adjoint() * &d - q_at(&g1, &lambda, t)).norm() < 1e-10);
        }
    }

    #[test]
    fn integrals_match_quadrature() {
        let g1 = sample_g1();
        let lambda = sample_lambda();
        let cert = solve_dare(&g1, &lambda).unwrap().unwrap();
        let ints = FactorIntegrals::new(&g1, &cert).unwrap();

        let ld = quad::circle_mean(2048, |t| Ok(linalg::herm_logdet(&q_at(&g1, &lambda, t)).unwrap())).unwrap();
        assert!((ld - logdet_integral(&cert).unwrap()).abs() < 1e-10);

        let inner = |t: f64| -> CMatrix {
            let g = g1.eval_transfer(t).unwrap();
            let qi = q_at(&g1, &lambda, t).try_inverse().unwrap();
            &g * qi * g.adjoint()
        };
        let y = quad::circle_mean_matrix(2048, 2, 2, |t| Ok(inner(t))).unwrap();
        let y = quad::real_part(&y) - DMatrix::identity(2, 2);
        assert!((ints.y() - y).norm() < 1e-10);

        let sk = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let skc = linalg::to_complex(&sk);
        let yk = quad::circle_mean_matrix(2048, 2, 2, |t| {
            let f = inner(t);
            Ok(&f * &skc * &f)
        })
        .unwrap();
        assert!((ints.yk(&sk).unwrap() - quad::real_part(&yk)).norm() < 1e-10);
    }

    #[test]
    fn hessian_form_is_symmetric() {
        let g1 = sample_g1();
        let cert = solve_dare(&g1, &sample_lambda()).unwrap().unwrap();
        let ints = FactorIntegrals::new(&g1, &cert).unwrap();
        let s1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let s2 = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, -0.1, 2.0]);
        let ys = ints.yk_all(&[s1.clone(), s2.clone()]).unwrap();
        let a = linalg::trace_inner(&ys[0], &s2);
        let b = linalg::trace_inner(&ys[1], &s1);
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn membership_agrees_with_grid_test() {
        let g1 = sample_g1();
        let grid = uniform_grid(512);
        let base = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.3, -0.6]);
        for k in 0..40 {
            let scale = 0.05 * k as f64;
            let lambda = &base * scale;
            let min_eig = min_popov_eigenvalue(&g1, &lambda, &grid).unwrap();
            let ok = solve_dare(&g1, &lambda).unwrap().is_ok();
            if min_eig > 1e-6 {
                assert!(ok, "scale {scale}: min eig {min_eig} but not factorizable");
            } else if min_eig < -1e-6 {
                assert!(!ok, "scale {scale}: min eig {min_eig} but factorizable");
            }
        }
    }
}
