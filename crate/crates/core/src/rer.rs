//! Dual Newton solver for the relative-entropy-rate spectral estimation problem:
//! minimize `d_RER(Phi, Psi)` subject to `int G Phi G^* = Sigma`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RerError, Result};
use crate::factor::{self, DareOutcome, FactorIntegrals, RiccatiCertificate};
use crate::gamma::{self, GammaBasis, Normalization};
use crate::linalg;
use crate::lti::{self, StateSpace};
use crate::spectra::SpectralDensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop when the Frobenius norm of the projected gradient falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo constant, in `(0, 0.5)`.
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            armijo: 0.3,
            max_halvings: 60,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(RerError::InvalidArgument(format!(
                "solver options need tol > 0 and armijo in (0, 0.5), got {} and {}",
                self.tol, self.armijo
            )));
        }
        Ok(())
    }
}

/// One accepted Newton iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dual_value: f64,
    pub grad_norm: f64,
    /// Step length accepted from this iterate, `None` at the final one.
    pub step: Option<f64>,
    /// Decrease of `J` achieved by that step. Below the rounding level of `J`
    /// it is the decrease predicted by the quadratic model.
    pub decrease: Option<f64>,
    /// Smallest eigenvalue of the Newton system matrix.
    pub hessian_min_eig: Option<f64>,
}

/// `J(Lambda) = tr Lambda - int log det(I + G1^* Lambda G1)` in normalized coordinates.
pub fn dual_value(lambda: &DMatrix<f64>, cert: &RiccatiCertificate) -> Result<f64> {
    Ok(lambda.trace() - factor::logdet_integral(cert)?)
}

/// Projected gradient `-proj_Range(Y)`.
pub fn dual_gradient(ints: &FactorIntegrals, basis: &GammaBasis) -> DMatrix<f64> {
    -basis.project_range(&ints.y())
}

/// Newton step in basis coordinates together with the system matrix.
#[derive(Debug, Clone)]
pub struct NewtonDirection {
    pub coords: DVector<f64>,
    pub direction: DMatrix<f64>,
    pub system: DMatrix<f64>,
    /// `<grad, direction>`.
    pub slope: f64,
    pub residual: f64,
}

/// Solve `M alpha = y` with `M_jk = <Y_k, Sigma_j>` and `y_j = <Y, Sigma_j>`.
pub fn newton_direction(ints: &FactorIntegrals, basis: &GammaBasis) -> Result<NewtonDirection> {
    let y = ints.y();
    let yks = ints.yk_all(basis.elements())?;
    let k = basis.len();
    let elems = basis.elements();
    let system = linalg::symmetrize(&DMatrix::from_fn(k, k, |j, l| linalg::trace_inner(&yks[l], &elems[j])));
    let rhs = basis.inner_products(&y);
    let chol = Cholesky::new(system.clone())
        .ok_or_else(|| RerError::Numerical("Newton system matrix is not positive definite".into()))?;
    let coords = chol.solve(&rhs);
    let residual = (&system * &coords - &rhs).norm();
    let slope = -coords.dot(&rhs);
    Ok(NewtonDirection {
        direction: basis.combine(&coords),
        coords,
        system,
        slope,
        residual,
    })
}

/// A factorizable multiplier with everything evaluated at it.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub coords: DVector<f64>,
    pub lambda: DMatrix<f64>,
    pub cert: RiccatiCertificate,
    pub value: f64,
}

/// Normalized problem data: `G1 = G' W_Psi` and the basis of `Range(Gamma)`.
pub struct DualProblem {
    pub g1: StateSpace,
    pub basis: GammaBasis,
}

impl DualProblem {
    pub fn new(bank: &StateSpace, prior: &StateSpace) -> Result<Self> {
        let g1 = lti::series(prior, bank)?;
        factor::check_g1(&g1)?;
        let basis = gamma::range_gamma_basis(&bank.a, &bank.b)?;
        Ok(Self { g1, basis })
    }

    pub fn evaluate(&self, coords: &DVector<f64>) -> Result<std::result::Result<DualPoint, factor::NotFactorizable>> {
        let lambda = self.basis.combine(coords);
        let outcome: DareOutcome = factor::solve_dare(&self.g1, &lambda)?;
        Ok(match outcome {
            Ok(cert) => {
                let value = dual_value(&lambda, &cert)?;
                Ok(DualPoint {
                    coords: coords.clone(),
                    lambda,
                    cert,
                    value,
                })
            }
            Err(e) => Err(e),
        })
    }

    /// Backtracking along `dir` from `point`: halve until the multiplier is
    /// factorizable and the Armijo condition holds.
    ///
    /// When the predicted decrease is below the rounding level of `J`, the
    /// full step is taken and `J` is advanced by the quadratic model.
    pub fn backtrack(&self, point: &DualPoint, dir: &NewtonDirection, opts: &SolverOptions) -> Result<LineSearchStep> {
        let floor = 1e-11 * (1.0 + point.value.abs());
        let mut t = 1.0;
        for _ in 0..=opts.max_halvings {
            let cand = &point.coords + &dir.coords * t;
            if let Ok(mut next) = self.evaluate(&cand)? {
                if -dir.slope * t <= floor {
                    let decrease = -(t * dir.slope + 0.5 * t * t * (-dir.slope));
                    next.value = point.value - decrease;
                    return Ok(LineSearchStep { point: next, t, decrease });
                }
                if next.value < point.value + opts.armijo * t * dir.slope {
                    let decrease = point.value - next.value;
                    return Ok(LineSearchStep { point: next, t, decrease });
                }
            }
            t *= 0.5;
        }
        Err(RerError::LineSearch {
            halvings: opts.max_halvings,
        })
    }
}

/// An accepted step of [`DualProblem::backtrack`].
#[derive(Debug, Clone)]
pub struct LineSearchStep {
    pub point: DualPoint,
    pub t: f64,
    pub decrease: f64,
}

/// Output of [`solve_rer`].
#[derive(Debug, Clone)]
pub struct RerSolution {
    /// Optimal multiplier in original coordinates.
    pub lambda: DMatrix<f64>,
    pub lambda_normalized: DMatrix<f64>,
    pub coords: DVector<f64>,
    pub spectrum: SpectralDensity,
    /// State dimension of the emitted factor `W°`.
    pub factor_states: usize,
    /// Rational degree of `Phi° = W° W°^*`, twice the factor's.
    pub degree: usize,
    /// `deg Psi + 2n` with `deg Psi = 2 deg W_Psi`.
    pub degree_bound: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub iterations: usize,
    pub dual_value: f64,
    pub grad_norm: f64,
    pub history: Vec<IterationRecord>,
}

/// Minimum-phase factor `W° = W_Psi Delta^{-1}` of `Phi° = W_Psi Q_Lambda^{-1} W_Psi^*`,
/// realized on the closed loop `Z1` of `G1 = G W_Psi`.
pub fn optimal_factor(prior: &StateSpace, g1: &StateSpace, cert: &RiccatiCertificate) -> Result<StateSpace> {
    let np = prior.states();
    let n1 = g1.states();
    let mut c_tilde = DMatrix::zeros(prior.outputs(), n1);
    c_tilde.view_mut((0, 0), (prior.outputs(), np)).copy_from(&prior.c);
    let c = c_tilde - &prior.d * &cert.gain;
    let b = &g1.b * &cert.omega_inv_sqrt;
    let d = &prior.d * &cert.omega_inv_sqrt;
    StateSpace::new(cert.closed_loop.clone(), b, c, d)
}

/// `Phi°` for a multiplier given in normalized coordinates, with its factor state count.
pub fn optimal_spectrum(
    lambda_normalized: &DMatrix<f64>,
    normalized_bank: &StateSpace,
    prior: &StateSpace,
) -> Result<(SpectralDensity, usize)> {
    let g1 = lti::series(prior, normalized_bank)?;
    match factor::solve_dare(&g1, lambda_normalized)? {
        Ok(cert) => {
            let w = optimal_factor(prior, &g1, &cert)?;
            let states = w.states();
            Ok((SpectralDensity::from_factor(w)?, states))
        }
        Err(e) => Err(RerError::Numerical(format!("multiplier is not factorizable: {e:?}"))),
    }
}

/// Solve the estimation problem for bank `bank = (zI - A)^{-1} B`, prior factor
/// `prior` and feasible positive definite target `sigma`.
pub fn solve_rer(bank: &StateSpace, prior: &StateSpace, sigma: &DMatrix<f64>, opts: &SolverOptions) -> Result<RerSolution> {
    opts.validate()?;
    let n = bank.states();
    if bank.outputs() != n || bank.inputs() != prior.outputs() || prior.inputs() != prior.outputs() {
        return Err(RerError::Dimension("bank, prior and target dimensions disagree".into()));
    }
    if sigma.shape() != (n, n) {
        return Err(RerError::Dimension(format!("Sigma must be {n}x{n}")));
    }
    if !linalg::is_positive_definite(sigma) {
        return Err(RerError::NotPositiveDefinite("Sigma".into()));
    }
    gamma::feasibility_solve(&bank.a, &bank.b, sigma)?;
    let norm: Normalization = gamma::normalize_problem(&bank.a, &bank.b, sigma)?;
    let bank_n = norm.bank()?;
    let problem = DualProblem::new(&bank_n, prior)?;

    let mut point = problem
        .evaluate(&DVector::zeros(problem.basis.len()))?
        .map_err(|e| RerError::Numerical(format!("zero multiplier not factorizable: {e:?}")))?;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut iteration = 0;
    loop {
        let ints = FactorIntegrals::new(&problem.g1, &point.cert)?;
        let grad = dual_gradient(&ints, &problem.basis);
        let grad_norm = grad.norm();
        log::debug!("iteration {iteration}: J = {:.15e}, |grad| = {grad_norm:.3e}", point.value);
        if grad_norm <= opts.tol {
            history.push(IterationRecord {
                iteration,
                dual_value: point.value,
                grad_norm,
                step: None,
                decrease: None,
                hessian_min_eig: None,
            });
            break;
        }
        if iteration >= opts.max_iter {
            let mut trace: Vec<f64> = history.iter().map(|h| h.grad_norm).collect();
            trace.push(grad_norm);
            return Err(RerError::NonConvergence {
                iterations: iteration,
                grad_norm,
                trace,
            });
        }
        let dir = newton_direction(&ints, &problem.basis)?;
        let hessian_min_eig = linalg::min_sym_eigenvalue(&dir.system);
        let step = problem.backtrack(&point, &dir, opts)?;
        history.push(IterationRecord {
            iteration,
            dual_value: point.value,
            grad_norm,
            step: Some(step.t),
            decrease: Some(step.decrease),
            hessian_min_eig: Some(hessian_min_eig),
        });
        point = step.point;
        iteration += 1;
    }

    let w = optimal_factor(prior, &problem.g1, &point.cert)?;
    let factor_states = w.states();
    let spectrum = SpectralDensity::from_factor(w)?;
    let achieved = gamma::gamma_apply(bank, &spectrum)?;
    let residual = (&achieved - sigma).norm();
    let last = history.last().expect("history is never empty");
    Ok(RerSolution {
        lambda: norm.lambda_to_original(&point.lambda),
        lambda_normalized: point.lambda.clone(),
        coords: point.coords.clone(),
        spectrum,
        factor_states,
        degree: 2 * factor_states,
        degree_bound: 2 * prior.states() + 2 * n,
        residual,
        relative_residual: residual / sigma.norm(),
        iterations: iteration,
        dual_value: point.value,
        grad_norm: last.grad_norm,
        history,
    })
}
