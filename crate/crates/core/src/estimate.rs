//! End-to-end estimation from data: bank, sample covariance, projection onto
//! `Range(Gamma)`, prior, and the dual solver.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{RerError, Result};
use crate::gamma::{self, FeasibleCovariance};
use crate::lti::{self, StateSpace};
use crate::rer::{self, RerSolution, SolverOptions};
use crate::sim;
use crate::spectra;

/// A filter-bank pole: a real pole or a conjugate pair `radius e^{±j angle}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleSpec {
    Real(f64),
    Pair { radius: f64, angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    pub poles: Vec<PoleSpec>,
}

impl BankSpec {
    pub fn pairs(radius: f64, angles: &[f64]) -> Self {
        Self {
            poles: angles.iter().map(|&angle| PoleSpec::Pair { radius, angle }).collect(),
        }
    }

    pub fn complex_poles(&self) -> Vec<Complex64> {
        self.poles
            .iter()
            .flat_map(|p| match *p {
                PoleSpec::Real(x) => vec![Complex64::new(x, 0.0)],
                PoleSpec::Pair { radius, angle } => lti::conjugate_pairs(radius, &[angle]),
            })
            .collect()
    }

    pub fn build(&self, m: usize) -> Result<StateSpace> {
        lti::build_filterbank(&self.complex_poles(), m)
    }

    /// Real poles `{0, 0.85, -0.85}` and five pairs at `0.9 e^{±j w}`, `w = 0.42, 0.44, ..., 0.50`.
    pub fn scalar_lines(radius: f64) -> Self {
        let mut poles = vec![PoleSpec::Real(0.0), PoleSpec::Real(0.85), PoleSpec::Real(-0.85)];
        poles.extend([0.42, 0.44, 0.46, 0.48, 0.50].iter().map(|&angle| PoleSpec::Pair { radius, angle }));
        Self { poles }
    }

    /// Four pairs of radius 0.7 at angles `k pi / 5`, `k = 1..4`.
    pub fn multivariate() -> Self {
        let angles: Vec<f64> = (1..=4).map(|k| k as f64 * std::f64::consts::PI / 5.0).collect();
        Self::pairs(0.7, &angles)
    }
}

/// How the prior `Psi` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Constant density equal to the sample covariance of the data.
    Constant,
    Identity,
    /// Least-squares vector AR model of the given order.
    Ar(usize),
    /// Given spectral factor `W_Psi`.
    Factor(StateSpace),
}

impl Prior {
    pub fn factor(&self, data: &DMatrix<f64>) -> Result<StateSpace> {
        let m = data.ncols();
        match self {
            Prior::Constant => Ok(spectra::fit_ar_prior(data, 0)?.density.factor().cloned().expect("factor form")),
            Prior::Identity => Ok(StateSpace::static_gain(DMatrix::identity(m, m))),
            Prior::Ar(p) => Ok(spectra::fit_ar_prior(data, *p)?.density.factor().cloned().expect("factor form")),
            Prior::Factor(w) => {
                if w.outputs() != m || w.inputs() != m {
                    return Err(RerError::Dimension(format!("prior factor is not {m}x{m}")));
                }
                Ok(w.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub bank: StateSpace,
    pub prior: StateSpace,
    pub sigma_hat: DMatrix<f64>,
    pub sigma: FeasibleCovariance,
    pub solution: RerSolution,
}

/// Estimate the spectrum of `data` (rows are time steps).
pub fn estimate(data: &DMatrix<f64>, bank: &BankSpec, prior: &Prior, opts: &SolverOptions) -> Result<Estimate> {
    let m = data.ncols();
    let g = bank.build(m)?;
    let sigma_hat = sim::sample_state_covariance(&g, data)?;
    let basis = gamma::range_gamma_basis(&g.a, &g.b)?;
    let sigma = gamma::project_covariance(&sigma_hat, &basis, &g.a, &g.b)?;
    let w = prior.factor(data)?;
    let solution = rer::solve_rer(&g, &w, &sigma.sigma, opts)?;
    Ok(Estimate {
        bank: g,
        prior: w,
        sigma_hat,
        sigma,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_specs() {
        assert_eq!(BankSpec::scalar_lines(0.9).build(1).unwrap().states(), 13);
        let g = BankSpec::multivariate().build(2).unwrap();
        assert_eq!((g.states(), g.inputs()), (8, 2));
        let text = r#"{"poles":[{"real":0.5},{"pair":{"radius":0.9,"angle":0.4}}]}"#;
        let spec: BankSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.build(1).unwrap().states(), 3);
    }
}
