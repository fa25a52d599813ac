//! Spectral densities on the unit circle and the entropy functionals built on them.
//!
//! Integrals over the circle are normalized: `int f` means `(1/2pi) int_{-pi}^{pi} f(theta) dtheta`.
//! Increment covariances over sub-intervals are *not* normalized.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{RerError, Result};
use crate::linalg::{self, CMatrix};
use crate::lti::StateSpace;
use crate::quad::{self, QuadratureOptions};

const HERMITIAN_TOL: f64 = 1e-10;

/// Spectral density values on a uniform grid of `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    thetas: Vec<f64>,
    values: Vec<CMatrix>,
}

impl GridDensity {
    pub fn new(thetas: Vec<f64>, values: Vec<CMatrix>) -> Result<Self> {
        if thetas.is_empty() || thetas.len() != values.len() {
            return Err(RerError::InvalidArgument(format!(
                "grid density needs matching non-empty angle/value lists ({} vs {})",
                thetas.len(),
                values.len()
            )));
        }
        let m = values[0].nrows();
        let h = 2.0 * PI / thetas.len() as f64;
        for (j, (t, v)) in thetas.iter().zip(&values).enumerate() {
            if v.nrows() != m || v.ncols() != m {
                return Err(RerError::Dimension(format!("grid value {j} is not {m}x{m}")));
            }
            if (v - v.adjoint()).norm() > HERMITIAN_TOL * (1.0 + v.norm()) {
                return Err(RerError::InvalidArgument(format!("grid value at theta={t} is not Hermitian")));
            }
            let expected = -PI + h * (j + 1) as f64;
            if (t - expected).abs() > 1e-9 {
                return Err(RerError::InvalidArgument(format!(
                    "grid angles must be uniform on (-pi, pi]; node {j} is {t}, expected {expected}"
                )));
            }
        }
        Ok(Self { thetas, values })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Value at the nearest grid node (periodic).
    pub fn nearest(&self, theta: f64) -> &CMatrix {
        let count = self.thetas.len();
        let h = 2.0 * PI / count as f64;
        let k = ((theta + PI) / h).round() as i64 - 1;
        let idx = k.rem_euclid(count as i64) as usize;
        &self.values[idx]
    }

    /// CSV: `theta`, then `(Re, Im)` of every entry in row-major order.
    pub fn to_csv(&self) -> String {
        let m = self.dim();
        let mut out = String::from("theta");
        for i in 0..m {
            for j in 0..m {
                let _ = write!(out, ",re_{i}_{j},im_{i}_{j}");
            }
        }
        out.push('\n');
        for (t, v) in self.thetas.iter().zip(&self.values) {
            let _ = write!(out, "{t}");
            for i in 0..m {
                for j in 0..m {
                    let c = v[(i, j)];
                    let _ = write!(out, ",{},{}", c.re, c.im);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut thetas = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let nums = match parsed {
                Ok(v) => v,
                Err(_) if lineno == 0 => continue,
                Err(e) => {
                    return Err(RerError::InvalidArgument(format!("line {}: {e}", lineno + 1)));
                }
            };
            let pairs = nums.len().saturating_sub(1) / 2;
            let m = (pairs as f64).sqrt().round() as usize;
            if nums.len() != 1 + 2 * m * m || m == 0 {
                return Err(RerError::InvalidArgument(format!(
                    "line {}: expected 1 + 2 m^2 columns, got {}",
                    lineno + 1,
                    nums.len()
                )));
            }
            thetas.push(nums[0]);
            values.push(CMatrix::from_fn(m, m, |i, j| {
                let k = 1 + 2 * (i * m + j);
                Complex64::new(nums[k], nums[k + 1])
            }));
        }
        Self::new(thetas, values)
    }
}

/// A bounded coercive spectral density, either as `W W^*` for a stable
/// square factor `W` with invertible feedthrough, or sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    Factor(StateSpace),
    Grid(GridDensity),
}

impl SpectralDensity {
    pub fn from_factor(w: StateSpace) -> Result<Self> {
        if w.outputs() != w.inputs() {
            return Err(RerError::Dimension(format!(
                "spectral factor must be square, got {}x{}",
                w.outputs(),
                w.inputs()
            )));
        }
        let radius = w.spectral_radius();
        if radius >= 1.0 {
            return Err(RerError::Unstable { radius });
        }
        if w.d.clone().try_inverse().is_none() {
            return Err(RerError::InvalidArgument("spectral factor feedthrough is singular".into()));
        }
        Ok(Self::Factor(w))
    }

    /// Constant density equal to the symmetric positive definite `cov`.
    pub fn constant(cov: &DMatrix<f64>) -> Result<Self> {
        let l = linalg::cholesky_lower(cov, "constant density")?;
        Ok(Self::Factor(StateSpace::static_gain(l)))
    }

    pub fn identity(m: usize) -> Self {
        Self::Factor(StateSpace::static_gain(DMatrix::identity(m, m)))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Factor(w) => w.outputs(),
            Self::Grid(g) => g.dim(),
        }
    }

    pub fn factor(&self) -> Option<&StateSpace> {
        match self {
            Self::Factor(w) => Some(w),
            Self::Grid(_) => None,
        }
    }

    pub fn eval(&self, theta: f64) -> Result<CMatrix> {
        match self {
            Self::Factor(w) => {
                let h = w.eval_transfer(theta)?;
                Ok(linalg::hermitian_part(&(&h * h.adjoint())))
            }
            Self::Grid(g) => Ok(g.nearest(theta).clone()),
        }
    }

    pub fn sample(&self, thetas: &[f64]) -> Result<GridDensity> {
        let values = thetas
            .par_iter()
            .map(|&t| self.eval(t))
            .collect::<Result<Vec<_>>>()?;
        GridDensity::new(thetas.to_vec(), values)
    }

    fn grid_len(&self) -> Option<usize> {
        match self {
            Self::Grid(g) => Some(g.len()),
            Self::Factor(_) => None,
        }
    }
}

fn normalized_mean<F>(densities: &[&SpectralDensity], f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    match densities.iter().filter_map(|d| d.grid_len()).max() {
        Some(count) => quad::circle_mean(count, f),
        None => quad::circle_mean_adaptive(&QuadratureOptions::default(), f),
    }
}

fn check_same_dim(a: &SpectralDensity, b: &SpectralDensity) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(RerError::Dimension(format!("densities are {}x{} and {}x{}", a.dim(), a.dim(), b.dim(), b.dim())));
    }
    Ok(a.dim())
}

/// `log det(Phi^{-1} Psi) + tr[Psi^{-1}(Phi - Psi)]` at one frequency.
fn rer_integrand(phi: &CMatrix, psi: &CMatrix, theta: f64) -> Result<f64> {
    let m = phi.nrows();
    let ld_phi = linalg::herm_logdet(phi).ok_or(RerError::DensityNotPositive { theta })?;
    let chol = nalgebra::Cholesky::new(linalg::hermitian_part(psi)).ok_or(RerError::DensityNotPositive { theta })?;
    let ld_psi = linalg::herm_logdet(psi).ok_or(RerError::DensityNotPositive { theta })?;
    let tr = chol.solve(phi).trace().re;
    Ok(ld_psi - ld_phi + tr - m as f64)
}

/// Relative-entropy-rate pseudo-distance `(1/4pi) int {log det(Phi^{-1}Psi) + tr[Psi^{-1}(Phi - Psi)]}`.
pub fn d_rer(phi: &SpectralDensity, psi: &SpectralDensity) -> Result<f64> {
    check_same_dim(phi, psi)?;
    let mean = normalized_mean(&[phi, psi], |t| rer_integrand(&phi.eval(t)?, &psi.eval(t)?, t))?;
    Ok(0.5 * mean)
}

/// Time-domain relative entropy rate between stationary Gaussian processes with
/// spectra `phi_y` and `phi_z`. Same integral as [`d_rer`] with `(Phi, Psi) = (Phi_y, Phi_z)`.
pub fn rer_time_domain(phi_y: &SpectralDensity, phi_z: &SpectralDensity) -> Result<f64> {
    d_rer(phi_y, phi_z)
}

/// Itakura-Saito distance `(1/2pi) int {phi/psi - log(phi/psi) - 1}` for scalar densities.
pub fn itakura_saito(phi: &SpectralDensity, psi: &SpectralDensity) -> Result<f64> {
    if phi.dim() != 1 || psi.dim() != 1 {
        return Err(RerError::Dimension("Itakura-Saito distance is defined for scalar densities".into()));
    }
    normalized_mean(&[phi, psi], |t| {
        let a = phi.eval(t)?[(0, 0)].re;
        let b = psi.eval(t)?[(0, 0)].re;
        if !(a > 0.0 && b > 0.0) {
            return Err(RerError::DensityNotPositive { theta: t });
        }
        let r = a / b;
        Ok(r - r.ln() - 1.0)
    })
}

/// Entropy rate `(m/2) log(2 pi e) + (1/4pi) int log det Phi`.
pub fn entropy_rate(phi: &SpectralDensity) -> Result<f64> {
    let m = phi.dim() as f64;
    let mean = normalized_mean(&[phi], |t| {
        linalg::herm_logdet(&phi.eval(t)?).ok_or(RerError::DensityNotPositive { theta: t })
    })?;
    Ok(0.5 * m * (2.0 * PI * std::f64::consts::E).ln() + 0.5 * mean)
}

/// Covariance of a spectral increment over `[lower, upper)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCovariance {
    pub lower: f64,
    pub upper: f64,
    pub q: CMatrix,
}

/// `Q = int_{lower}^{upper} Phi(e^{j xi}) d xi` by adaptive Gauss-Kronrod quadrature.
pub fn increment_covariance(phi: &SpectralDensity, lower: f64, upper: f64) -> Result<IncrementCovariance> {
    if !(upper > lower) {
        return Err(RerError::InvalidArgument(format!("empty interval [{lower}, {upper})")));
    }
    let q = linalg::hermitian_part(&quad::integrate_matrix(|t| phi.eval(t), lower, upper, 1e-12)?);
    if linalg::min_herm_eigenvalue(&q) <= 0.0 {
        return Err(RerError::NotPositiveDefinite(format!("increment covariance on [{lower}, {upper})")));
    }
    Ok(IncrementCovariance { lower, upper, q })
}

/// KL divergence between circularly-symmetric complex Gaussians with covariances
/// `p` and `q`: `log det(P^{-1}Q) + tr(Q^{-1}P) - m`.
pub fn circular_gauss_kl(p: &CMatrix, q: &CMatrix) -> Result<f64> {
    if p.shape() != q.shape() || !p.is_square() {
        return Err(RerError::Dimension("circular_gauss_kl needs equal square arguments".into()));
    }
    let ld_p = linalg::herm_logdet(p).ok_or_else(|| RerError::NotPositiveDefinite("P".into()))?;
    let ld_q = linalg::herm_logdet(q).ok_or_else(|| RerError::NotPositiveDefinite("Q".into()))?;
    let chol = nalgebra::Cholesky::new(linalg::hermitian_part(q))
        .ok_or_else(|| RerError::NotPositiveDefinite("Q".into()))?;
    Ok(ld_q - ld_p + chol.solve(p).trace().re - p.nrows() as f64)
}

/// Spectral relative entropy over an `n`-cell partition of `[0, pi]`:
/// `(1/2n) sum_k KL(Q_y(theta_k, theta_{k+1}) || Q_z(theta_k, theta_{k+1}))`, `theta_k = pi k / n`.
pub fn spectral_rer_partition(phi_y: &SpectralDensity, phi_z: &SpectralDensity, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(RerError::InvalidArgument("partition count must be positive".into()));
    }
    check_same_dim(phi_y, phi_z)?;
    let h = PI / n as f64;
    let terms = (0..n)
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = (h * k as f64, h * (k + 1) as f64);
            let qy = increment_covariance(phi_y, lo, hi)?;
            let qz = increment_covariance(phi_z, lo, hi)?;
            circular_gauss_kl(&qy.q, &qz.q)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>() / (2.0 * n as f64))
}

/// Vector autoregressive prior fitted by least squares.
#[derive(Debug, Clone)]
pub struct ArFit {
    pub density: SpectralDensity,
    /// Order actually used after any rank-deficiency fallback.
    pub order: usize,
    /// `A_1..A_p` in `y_t = sum_i A_i y_{t-i} + e_t`.
    pub coefficients: Vec<DMatrix<f64>>,
    pub innovation: DMatrix<f64>,
}

/// Fit `y_t = sum_{i=1}^p A_i y_{t-i} + e_t` to zero-mean data (rows are time steps).
///
/// The returned factor is `W(z) = (I - sum A_i z^{-i})^{-1} chol(S)` with `S`
/// the residual covariance. Unstable fits are pulled inside the disk by
/// scaling `A_i -> A_i s^i`; rank-deficient regressions drop to order `p-1`.
pub fn fit_ar_prior(data: &DMatrix<f64>, order: usize) -> Result<ArFit> {
    let (t_len, m) = data.shape();
    if m == 0 || t_len <= m * order + m {
        return Err(RerError::InvalidArgument(format!(
            "AR({order}) fit needs more than {} samples of {m} channels, got {t_len}",
            m * order + m
        )));
    }
    if order == 0 {
        let cov = linalg::symmetrize(&(data.transpose() * data / t_len as f64));
        let l = linalg::cholesky_lower(&cov, "sample covariance")?;
        return Ok(ArFit {
            density: SpectralDensity::Factor(StateSpace::static_gain(l)),
            order: 0,
            coefficients: Vec::new(),
            innovation: cov,
        });
    }
    let rows = t_len - order;
    let mut x = DMatrix::zeros(rows, m * order);
    let mut y = DMatrix::zeros(rows, m);
    for r in 0..rows {
        let t = r + order;
        y.row_mut(r).copy_from(&data.row(t));
        for i in 1..=order {
            x.view_mut((r, (i - 1) * m), (1, m)).copy_from(&data.row(t - i));
        }
    }
    let gram = linalg::symmetrize(&(x.transpose() * &x));
    let eigs = gram.symmetric_eigenvalues();
    if !(eigs.min() > 1e-12 * eigs.max()) {
        log::warn!("AR({order}) regression is rank deficient, falling back to order {}", order - 1);
        return fit_ar_prior(data, order - 1);
    }
    let theta = linalg::least_squares(&x, &y, 1e-14)?;
    let mut coefficients: Vec<DMatrix<f64>> =
        (0..order).map(|i| theta.view((i * m, 0), (m, m)).transpose()).collect();
    let resid = &y - &x * &theta;
    let innovation = linalg::symmetrize(&(resid.transpose() * &resid / rows as f64));

    let mut companion = ar_companion(&coefficients);
    let radius = linalg::spectral_radius(&companion);
    if radius >= 0.99 {
        let s = 0.98 / radius;
        for (i, a) in coefficients.iter_mut().enumerate() {
            *a *= s.powi(i as i32 + 1);
        }
        companion = ar_companion(&coefficients);
    }
    let l = linalg::cholesky_lower(&innovation, "AR innovation covariance")?;
    let n = m * order;
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((0, 0), (m, m)).copy_from(&l);
    let c = companion.rows(0, m).into_owned();
    let w = StateSpace::new(companion, b, c, l)?;
    Ok(ArFit {
        density: SpectralDensity::from_factor(w)?,
        order,
        coefficients,
        innovation,
    })
}

fn ar_companion(coefficients: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = coefficients.len();
    let m = coefficients[0].nrows();
    let n = m * p;
    let mut a = DMatrix::zeros(n, n);
    for (i, ai) in coefficients.iter().enumerate() {
        a.view_mut((0, i * m), (m, m)).copy_from(ai);
    }
    for i in 1..p {
        a.view_mut((i * m, (i - 1) * m), (m, m)).copy_from(&DMatrix::identity(m, m));
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::uniform_grid;

    fn scalar_const(v: f64) -> SpectralDensity {
        SpectralDensity::constant(&DMatrix::from_element(1, 1, v)).unwrap()
    }

    /// W(z) = 1 + 0.5 z^{-1}
    fn ma1() -> SpectralDensity {
        let w = StateSpace::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        SpectralDensity::from_factor(w).unwrap()
    }

    /// W(z) = 1 / (1 - 0.5 z^{-1})
    fn ar1() -> SpectralDensity {
        let w = StateSpace::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        SpectralDensity::from_factor(w).unwrap()
    }

    #[test]
    fn static_and_ma1_evaluation() {
        let w = SpectralDensity::Factor(StateSpace::static_gain(DMatrix::identity(2, 2) * 3.0));
        let v = w.eval(1.1).unwrap();
        assert!((v - CMatrix::identity(2, 2) * Complex64::new(9.0, 0.0)).norm() < 1e-14);
        assert!((ma1().eval(0.0).unwrap()[(0, 0)].re - 2.25).abs() < 1e-14);
    }

    #[test]
    fn real_process_symmetry() {
        let w = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.3, 0.5, -0.4, 0.2]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.3, 0.5]),
            DMatrix::from_row_slice(2, 2, &[0.7, 0.1, 0.0, -0.6]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.2]),
        )
        .unwrap();
        let phi = SpectralDensity::from_factor(w).unwrap();
        for t in [0.1, 0.9, 2.5] {
            let a = phi.eval(t).unwrap();
            let b = phi.eval(-t).unwrap();
            assert!((a - b.map(|c| c.conj())).norm() < 1e-13);
        }
    }

    #[test]
    fn d_rer_constant_cases() {
        assert!(d_rer(&ma1(), &ma1()).unwrap().abs() < 1e-14);
        let v = d_rer(&scalar_const(2.0), &scalar_const(1.0)).unwrap();
        assert!((v - (1.0 - 2f64.ln()) / 2.0).abs() < 1e-14);
        assert!((v - 0.153426).abs() < 1e-6);
    }

    #[test]
    fn scalar_d_rer_is_half_itakura_saito() {
        let d = d_rer(&ma1(), &ar1()).unwrap();
        let is = itakura_saito(&ma1(), &ar1()).unwrap();
        assert!((d - 0.5 * is).abs() < 1e-12);
        assert!(d > 0.0);
    }

    #[test]
    fn itakura_saito_cases() {
        assert!(itakura_saito(&ar1(), &ar1()).unwrap().abs() < 1e-14);
        let v = itakura_saito(&scalar_const(2.0), &scalar_const(1.0)).unwrap();
        assert!((v - (1.0 - 2f64.ln())).abs() < 1e-14);
        let a = itakura_saito(&scalar_const(6.0), &scalar_const(3.0)).unwrap();
        assert!((a - v).abs() < 1e-14);
    }

    #[test]
    fn entropy_rate_cases() {
        let base = (2.0 * PI * std::f64::consts::E).ln();
        let v = entropy_rate(&SpectralDensity::identity(3)).unwrap();
        assert!((v - 1.5 * base).abs() < 1e-13);
        let s = SpectralDensity::Factor(StateSpace::static_gain(DMatrix::identity(2, 2) * 0.5));
        assert!((entropy_rate(&s).unwrap() - (base + 2.0 * 0.5f64.ln())).abs() < 1e-13);
        // Szego: innovation variance of 1/(1 - 0.5 z^{-1}) is 1.
        assert!((entropy_rate(&ar1()).unwrap() - 0.5 * base).abs() < 1e-10);
    }

    #[test]
    fn increment_covariance_cases() {
        let q = increment_covariance(&SpectralDensity::identity(2), 0.0, PI / 4.0).unwrap();
        assert!((q.q - CMatrix::identity(2, 2) * Complex64::new(PI / 4.0, 0.0)).norm() < 1e-13);
        let q = increment_covariance(&scalar_const(3.0), 0.2, 0.9).unwrap();
        assert!((q.q[(0, 0)].re - 3.0 * 0.7).abs() < 1e-13);
        // |1 + 0.5 e^{-j t}|^2 = 1.25 + cos t, antiderivative 1.25 t + sin t.
        for (a, b) in [(0.0, PI), (0.0, PI / 2.0), (0.3, 1.7)] {
            let q = increment_covariance(&ma1(), a, b).unwrap();
            let exact = 1.25 * (b - a) + b.sin() - a.sin();
            assert!((q.q[(0, 0)].re - exact).abs() < 1e-12);
        }
        assert!(increment_covariance(&ma1(), 1.0, 1.0).is_err());
    }

    #[test]
    fn circular_kl_cases() {
        let p = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(2.0, 0.0), Complex64::new(0.3, 0.4), Complex64::new(0.3, -0.4), Complex64::new(1.0, 0.0)],
        );
        assert!(circular_gauss_kl(&p, &p).unwrap().abs() < 1e-14);
        let two = CMatrix::from_element(1, 1, Complex64::new(2.0, 0.0));
        let one = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        assert!((circular_gauss_kl(&two, &one).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-14);
        let q = CMatrix::identity(2, 2) * Complex64::new(1.5, 0.0);
        let t = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 1.0), Complex64::new(0.2, 0.0), Complex64::new(-0.5, 0.1), Complex64::new(0.7, 0.0)],
        );
        let a = circular_gauss_kl(&p, &q).unwrap();
        let b = circular_gauss_kl(&(&t * &p * t.adjoint()), &(&t * &q * t.adjoint())).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn partition_exact_for_constants() {
        for n in [1, 2, 7, 64] {
            let v = spectral_rer_partition(&scalar_const(2.0), &scalar_const(1.0), n).unwrap();
            assert!((v - (1.0 - 2f64.ln()) / 2.0).abs() < 1e-12);
            assert!(spectral_rer_partition(&ma1(), &ma1(), n).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn grid_density_nearest_and_csv() {
        let grid = uniform_grid(16);
        let g = ma1().sample(&grid).unwrap();
        assert_eq!(g.nearest(grid[3]), &g.values()[3]);
        assert_eq!(g.nearest(grid[3] + 0.01), &g.values()[3]);
        assert_eq!(g.nearest(PI), &g.values()[15]);
        let text = g.to_csv();
        let back = GridDensity::from_csv(&text).unwrap();
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn ar_order_zero_is_sample_covariance() {
        let data = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 2.0, 0.0]);
        let fit = fit_ar_prior(&data, 0).unwrap();
        assert!((fit.innovation[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((fit.density.eval(0.4).unwrap()[(0, 0)].re - 1.5).abs() < 1e-14);
        assert!(fit_ar_prior(&data, 3).is_err());
    }
}
