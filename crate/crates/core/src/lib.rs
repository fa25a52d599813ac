//! Multivariate spectral estimation by relative-entropy-rate minimization.
//!
//! Given a filter bank `G(z) = (zI - A)^{-1} B`, a prior spectral density `Psi`
//! with spectral factor `W_Psi`, and a state covariance `Sigma`, the solver finds
//! the density closest to `Psi` in relative entropy rate among those with
//! `int G Phi G^* = Sigma`.

pub mod error;
pub mod linalg;
pub mod lti;
pub mod quad;
pub mod spectra;
pub mod gamma;
pub mod factor;
pub mod rer;
pub mod estimate;
pub mod sim;

pub use error::{RerError, Result};
pub use estimate::{estimate, BankSpec, Estimate, PoleSpec, Prior};
pub use factor::{solve_dare, DareOutcome, FactorIntegrals, NotFactorizable, RiccatiCertificate};
pub use gamma::{gamma_apply, project_covariance, range_gamma_basis, FeasibleCovariance, GammaBasis};
pub use linalg::CMatrix;
pub use lti::{build_filterbank, StateSpace};
pub use rer::{solve_rer, IterationRecord, RerSolution, SolverOptions};
pub use spectra::{GridDensity, SpectralDensity};
