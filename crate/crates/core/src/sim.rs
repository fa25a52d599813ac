//! Synthetic data and Monte Carlo experiments: sinusoids in ARMA noise,
//! random shaping filters, sample state covariances and error curves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RerError, Result};
use crate::estimate::{self, BankSpec, Prior};
use crate::linalg::{self, CMatrix};
use crate::lti::{self, StateSpace};
use crate::rer::SolverOptions;
use crate::spectra::{GridDensity, SpectralDensity};

pub const ARMA_BURN_IN: usize = 1000;

/// Generator for run `run` of an experiment seeded with `seed`.
///
/// Each run has its own ChaCha stream, so the number of runs never changes
/// the data of an individual run.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Two sinusoids in ARMA(1,1) noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinesConfig {
    pub samples: usize,
    pub omega1: f64,
    pub omega2: f64,
    pub amplitude: f64,
}

impl LinesConfig {
    pub fn standard(samples: usize) -> Self {
        Self {
            samples,
            omega1: 0.42,
            omega2: 0.53,
            amplitude: 0.5,
        }
    }

    pub fn close(samples: usize) -> Self {
        Self {
            samples,
            omega1: 0.45,
            omega2: 0.47,
            amplitude: 0.5,
        }
    }
}

/// `y(t) = a sin(w1 t + phi1) + a sin(w2 t + phi2) + z(t)` with
/// `z(t) = 0.8 z(t-1) + 0.5 nu(t) + 0.25 nu(t-1)`; phases and `nu` are standard normal.
pub fn gen_lines_in_noise(cfg: &LinesConfig, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if cfg.samples == 0 {
        return Err(RerError::InvalidArgument("sample count must be positive".into()));
    }
    let phi1 = normal(rng);
    let phi2 = normal(rng);
    let mut z = 0.0;
    let mut nu_prev = 0.0;
    for _ in 0..ARMA_BURN_IN {
        let nu = normal(rng);
        z = 0.8 * z + 0.5 * nu + 0.25 * nu_prev;
        nu_prev = nu;
    }
    let mut y = DMatrix::zeros(cfg.samples, 1);
    for t in 0..cfg.samples {
        let nu = normal(rng);
        z = 0.8 * z + 0.5 * nu + 0.25 * nu_prev;
        nu_prev = nu;
        let tf = t as f64;
        y[(t, 0)] = cfg.amplitude * ((cfg.omega1 * tf + phi1).sin() + (cfg.omega2 * tf + phi2).sin()) + z;
    }
    Ok(y)
}

/// Square shaping filter: a fixed resonant pole pair on every channel, an
/// optional zero pair on the first channel and random stable dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingConfig {
    pub order: usize,
    pub channels: usize,
    pub pole_radius: f64,
    pub pole_angle: f64,
    pub zero: Option<(f64, f64)>,
    /// Largest radius of the random poles.
    pub max_random_radius: f64,
}

impl ShapingConfig {
    /// Bivariate order-40 filter with poles `0.9 e^{±j0.52}` and zeros `(1 - 1e-5) e^{±j0.2}`.
    pub fn standard() -> Self {
        Self {
            order: 40,
            channels: 2,
            pole_radius: 0.9,
            pole_angle: 0.52,
            zero: Some((1.0 - 1e-5, 0.2)),
            max_random_radius: 0.9,
        }
    }
}

/// `a(z)^{-1} I_m` with `a(z) = 1 - 2 r cos(w) z^{-1} + r^2 z^{-2}`.
fn resonator(radius: f64, angle: f64, m: usize) -> StateSpace {
    let a1 = 2.0 * radius * angle.cos();
    let a2 = -radius * radius;
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    let mut b = DMatrix::zeros(2 * m, m);
    let mut c = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        let k = 2 * i;
        a[(k, k)] = a1;
        a[(k, k + 1)] = a2;
        a[(k + 1, k)] = 1.0;
        b[(k, i)] = 1.0;
        c[(i, k)] = a1;
        c[(i, k + 1)] = a2;
    }
    StateSpace::new(a, b, c, DMatrix::identity(m, m)).expect("consistent dimensions")
}

/// `diag(q(z), 1, ..., 1)` with `q(z) = 1 - 2 rho cos(w) z^{-1} + rho^2 z^{-2}`.
fn zero_pair(rho: f64, angle: f64, m: usize) -> StateSpace {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let mut b = DMatrix::zeros(2, m);
    b[(0, 0)] = 1.0;
    let mut c = DMatrix::zeros(m, 2);
    c[(0, 0)] = -2.0 * rho * angle.cos();
    c[(0, 1)] = rho * rho;
    StateSpace::new(a, b, c, DMatrix::identity(m, m)).expect("consistent dimensions")
}

/// Random stable system with `states` states: conjugate pole pairs with
/// radius uniform on `[0, max_radius]` and angle uniform on `[0, pi]`, one real
/// pole when `states` is odd, Gaussian `B`, `C` and `D = I + 0.3 N(0, 1)`.
fn random_stable(states: usize, m: usize, max_radius: f64, rng: &mut impl Rng) -> Result<StateSpace> {
    let radius = Uniform::new_inclusive(0.0, max_radius).map_err(|e| RerError::InvalidArgument(e.to_string()))?;
    let angle = Uniform::new_inclusive(0.0, PI).map_err(|e| RerError::InvalidArgument(e.to_string()))?;
    let mut a = DMatrix::zeros(states, states);
    let mut k = 0;
    while k + 1 < states {
        let r = radius.sample(rng);
        let w = angle.sample(rng);
        a[(k, k)] = r * w.cos();
        a[(k, k + 1)] = r * w.sin();
        a[(k + 1, k)] = -r * w.sin();
        a[(k + 1, k + 1)] = r * w.cos();
        k += 2;
    }
    if k < states {
        let r = radius.sample(rng);
        a[(k, k)] = if rng.random_bool(0.5) { r } else { -r };
    }
    let b = DMatrix::from_fn(states, m, |_, _| normal(rng));
    let c = DMatrix::from_fn(m, states, |_, _| normal(rng) / (states.max(1) as f64).sqrt());
    for _ in 0..100 {
        let d = DMatrix::identity(m, m) + DMatrix::from_fn(m, m, |_, _| 0.3 * normal(rng));
        let svals = d.singular_values();
        if svals.min() > 0.05 * svals.max() {
            return StateSpace::new(a, b, c, d);
        }
    }
    Err(RerError::Numerical("could not draw a well-conditioned feedthrough".into()))
}

/// Shaping filter `W = a(z)^{-1} W_rand(z) diag(q(z), 1, ...)` with `cfg.order` states.
pub fn gen_shaping_filter(cfg: &ShapingConfig, rng: &mut impl Rng) -> Result<StateSpace> {
    let m = cfg.channels;
    let fixed = 2 * m + if cfg.zero.is_some() { 2 } else { 0 };
    if m == 0 || cfg.order < fixed {
        return Err(RerError::InvalidArgument(format!(
            "order {} is below the {fixed} states taken by the fixed poles and zeros",
            cfg.order
        )));
    }
    if !(cfg.pole_radius < 1.0 && cfg.max_random_radius < 1.0) {
        return Err(RerError::InvalidPoles("shaping filter poles must lie inside the unit disk".into()));
    }
    let mut w = random_stable(cfg.order - fixed, m, cfg.max_random_radius, rng)?;
    if let Some((rho, angle)) = cfg.zero {
        w = lti::series(&zero_pair(rho, angle, m), &w)?;
    }
    lti::series(&w, &resonator(cfg.pole_radius, cfg.pole_angle, m))
}

/// Drive `w` with unit white noise; the first `max(1000, 10/(1-rho))` samples are discarded.
pub fn simulate_filter(w: &StateSpace, samples: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let radius = w.spectral_radius();
    if radius >= 1.0 {
        return Err(RerError::Unstable { radius });
    }
    let burn = ARMA_BURN_IN.max((10.0 / (1.0 - radius)).ceil() as usize);
    let mut x = DVector::zeros(w.states());
    let mut out = DMatrix::zeros(samples, w.outputs());
    for t in 0..burn + samples {
        let e = DVector::from_fn(w.inputs(), |_, _| normal(rng));
        if t >= burn {
            let y = &w.c * &x + &w.d * &e;
            out.row_mut(t - burn).copy_from(&y.transpose());
        }
        x = &w.a * &x + &w.b * &e;
    }
    Ok(out)
}

/// Number of leading samples dropped by [`sample_state_covariance`].
pub fn transient_length(bank: &StateSpace) -> usize {
    let radius = bank.spectral_radius();
    (5.0 / (1.0 - radius)).ceil() as usize
}

/// Time average of `x x^T` for `x(k+1) = A x(k) + B y(k)`, `x(0) = 0`, after the transient.
pub fn sample_state_covariance(bank: &StateSpace, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let radius = bank.spectral_radius();
    if radius >= 1.0 {
        return Err(RerError::Unstable { radius });
    }
    if data.ncols() != bank.inputs() {
        return Err(RerError::Dimension(format!(
            "data has {} channels, bank has {} inputs",
            data.ncols(),
            bank.inputs()
        )));
    }
    let skip = transient_length(bank);
    let n = bank.states();
    if data.nrows() <= skip {
        return Err(RerError::InvalidArgument(format!(
            "{} samples do not exceed the transient of {skip}",
            data.nrows()
        )));
    }
    let mut x = DVector::zeros(n);
    let mut acc = DMatrix::zeros(n, n);
    for k in 0..data.nrows() {
        x = &bank.a * &x + &bank.b * data.row(k).transpose();
        if k + 1 >= skip {
            acc.ger(1.0, &x, &x, 1.0);
        }
    }
    let count = data.nrows() + 1 - skip;
    Ok(linalg::symmetrize(&(acc / count as f64)))
}

/// Pointwise mean over runs of the largest singular value of `estimate - truth`.
pub fn avg_error_curve(runs: &[(GridDensity, GridDensity)]) -> Result<Vec<f64>> {
    let first = runs
        .first()
        .ok_or_else(|| RerError::InvalidArgument("no runs to average".into()))?;
    let thetas = first.0.thetas();
    let mut curve = vec![0.0; thetas.len()];
    for (est, truth) in runs {
        if est.thetas() != thetas || truth.thetas() != thetas {
            return Err(RerError::InvalidArgument("error curves need a common grid".into()));
        }
        for (j, (a, b)) in est.values().iter().zip(truth.values()).enumerate() {
            curve[j] += linalg::herm_spectral_norm(&linalg::hermitian_part(&(a - b)));
        }
    }
    let count = runs.len() as f64;
    Ok(curve.into_iter().map(|e| e / count).collect())
}

/// Interior local maxima of `values` whose angle lies in `(lo, hi)`.
pub fn local_maxima(thetas: &[f64], values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| thetas[i])
        .filter(|t| *t > lo && *t < hi)
        .collect()
}

/// Uniform grid of `count` angles covering `[lo, hi]`.
pub fn band_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| lo + step * i as f64).collect()
}

/// Scalar density values (real part of the 1x1 matrix) at `thetas`.
pub fn scalar_values(phi: &SpectralDensity, thetas: &[f64]) -> Result<Vec<f64>> {
    thetas.iter().map(|&t| Ok(phi.eval(t)?[(0, 0)].re)).collect()
}

/// Lines experiment: per-run peaks of the estimate over a fine band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinesRun {
    pub run: u64,
    pub iterations: usize,
    pub peaks: Vec<f64>,
    pub resolved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinesExperiment {
    pub lines: LinesConfig,
    pub bank_radius: f64,
    /// Peaks are searched in this band ...
    pub band: (f64, f64),
    /// ... and must lie this close to the true frequencies.
    pub peak_tolerance: f64,
    pub band_points: usize,
}

impl LinesExperiment {
    pub fn standard() -> Self {
        Self {
            lines: LinesConfig::standard(300),
            bank_radius: 0.9,
            band: (0.3, 0.7),
            peak_tolerance: 0.02,
            band_points: 4001,
        }
    }

    pub fn close() -> Self {
        Self {
            lines: LinesConfig::close(300),
            bank_radius: 0.95,
            ..Self::standard()
        }
    }

    pub fn bank(&self) -> BankSpec {
        BankSpec::scalar_lines(self.bank_radius)
    }

    fn judge(&self, peaks: &[f64]) -> bool {
        let tol = self.peak_tolerance;
        peaks.len() == 2
            && (peaks[0] - self.lines.omega1).abs() <= tol
            && (peaks[1] - self.lines.omega2).abs() <= tol
    }

    /// One seeded run with a constant prior.
    pub fn run(&self, seed: u64, run: u64, opts: &SolverOptions) -> Result<(LinesRun, estimate::Estimate)> {
        let mut rng = run_rng(seed, run);
        let data = gen_lines_in_noise(&self.lines, &mut rng)?;
        let est = estimate::estimate(&data, &self.bank(), &Prior::Constant, opts)?;
        let grid = band_grid(self.band.0, self.band.1, self.band_points);
        let values = scalar_values(&est.solution.spectrum, &grid)?;
        let peaks = local_maxima(&grid, &values, self.band.0, self.band.1);
        Ok((
            LinesRun {
                run,
                iterations: est.solution.iterations,
                resolved: self.judge(&peaks),
                peaks,
            },
            est,
        ))
    }

    pub fn run_all(&self, seed: u64, runs: u64, opts: &SolverOptions) -> Vec<Result<LinesRun>> {
        (0..runs)
            .into_par_iter()
            .map(|r| self.run(seed, r, opts).map(|(run, _)| run))
            .collect()
    }
}

/// Shaping-filter experiment with an AR prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingExperiment {
    pub filter: ShapingConfig,
    pub samples: usize,
    pub ar_order: usize,
    pub grid_points: usize,
}

impl ShapingExperiment {
    pub fn standard() -> Self {
        Self {
            filter: ShapingConfig::standard(),
            samples: 300,
            ar_order: 3,
            grid_points: 256,
        }
    }

    /// The true filter is shared by all runs and drawn from a dedicated stream.
    pub fn true_filter(&self, seed: u64) -> Result<StateSpace> {
        gen_shaping_filter(&self.filter, &mut run_rng(seed, u64::MAX))
    }

    pub fn grid(&self) -> Vec<f64> {
        band_grid(0.0, PI, self.grid_points)
    }

    pub fn run(
        &self,
        truth: &StateSpace,
        seed: u64,
        run: u64,
        opts: &SolverOptions,
    ) -> Result<(ShapingRun, estimate::Estimate)> {
        let mut rng = run_rng(seed, run);
        let data = simulate_filter(truth, self.samples, &mut rng)?;
        let est = estimate::estimate(&data, &BankSpec::multivariate(), &Prior::Ar(self.ar_order), opts)?;
        let grid = self.grid();
        let true_phi = SpectralDensity::from_factor(truth.clone())?;
        let prior_phi = SpectralDensity::from_factor(est.prior.clone())?;
        let mut err_est = Vec::with_capacity(grid.len());
        let mut err_prior = Vec::with_capacity(grid.len());
        for &t in &grid {
            let phi = true_phi.eval(t)?;
            err_est.push(spectral_error(&est.solution.spectrum.eval(t)?, &phi));
            err_prior.push(spectral_error(&prior_phi.eval(t)?, &phi));
        }
        let summary = ShapingRun {
            run,
            iterations: est.solution.iterations,
            relative_residual: est.solution.relative_residual,
            factor_states: est.solution.factor_states,
            degree_bound: est.solution.degree_bound,
            error_estimate: err_est,
            error_prior: err_prior,
        };
        Ok((summary, est))
    }

    pub fn run_all(&self, truth: &StateSpace, seed: u64, runs: u64, opts: &SolverOptions) -> Vec<Result<ShapingRun>> {
        (0..runs)
            .into_par_iter()
            .map(|r| self.run(truth, seed, r, opts).map(|(run, _)| run))
            .collect()
    }
}

fn spectral_error(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::herm_spectral_norm(&linalg::hermitian_part(&(a - b)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapingRun {
    pub run: u64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub factor_states: usize,
    pub degree_bound: usize,
    /// Largest singular value of `Phi° - Phi` on the experiment grid.
    pub error_estimate: Vec<f64>,
    /// Same for the fitted prior.
    pub error_prior: Vec<f64>,
}

impl ShapingRun {
    pub fn mean_error_estimate(&self) -> f64 {
        self.error_estimate.iter().sum::<f64>() / self.error_estimate.len() as f64
    }

    pub fn mean_error_prior(&self) -> f64 {
        self.error_prior.iter().sum::<f64>() / self.error_prior.len() as f64
    }
}

/// Pointwise average of per-run error curves.
pub fn average_curves(curves: &[&[f64]]) -> Vec<f64> {
    let len = curves.first().map_or(0, |c| c.len());
    (0..len)
        .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / curves.len() as f64)
        .collect()
}
