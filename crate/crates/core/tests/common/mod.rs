#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rer_core::lti::{self, uniform_grid};
use rer_core::{linalg, CMatrix, SpectralDensity, StateSpace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Filter bank with `n` distinct poles of modulus in `[0.2, 0.85]`.
pub fn random_bank(rng: &mut impl Rng, n: usize, m: usize) -> StateSpace {
    loop {
        let mut poles: Vec<Complex64> = Vec::new();
        while poles.len() + 1 < n {
            let p = Complex64::from_polar(rng.random_range(0.2..0.85), rng.random_range(0.15..3.0));
            poles.extend([p, p.conj()]);
        }
        if poles.len() < n {
            poles.push(Complex64::new(rng.random_range(-0.85..0.85), 0.0));
        }
        let spread = poles
            .iter()
            .enumerate()
            .flat_map(|(i, p)| poles[i + 1..].iter().map(move |q| (p - q).norm()))
            .fold(f64::INFINITY, f64::min);
        if spread > 0.08 {
            return lti::build_filterbank(&poles, m).unwrap();
        }
    }
}

/// Stable, minimum-phase square factor with `states` states.
pub fn random_factor(rng: &mut impl Rng, m: usize, states: usize) -> StateSpace {
    loop {
        let d = DMatrix::identity(m, m) + DMatrix::from_fn(m, m, |_, _| 0.2 * normal(rng));
        if states == 0 {
            if d.singular_values().min() > 0.3 {
                return StateSpace::static_gain(d);
            }
            continue;
        }
        let mut a = DMatrix::from_fn(states, states, |_, _| normal(rng));
        let rho = linalg::spectral_radius(&a);
        a *= rng.random_range(0.3..0.8) / rho;
        let b = DMatrix::from_fn(states, m, |_, _| 0.5 * normal(rng));
        let c = DMatrix::from_fn(m, states, |_, _| 0.5 * normal(rng));
        let w = StateSpace::new(a, b, c, d).unwrap();
        if let Ok(inv) = w.inverse() {
            if inv.spectral_radius() < 0.9 {
                return w;
            }
        }
    }
}

/// `I + G1^* Lambda G1` at `theta`.
pub fn popov(g1: &StateSpace, lambda: &DMatrix<f64>, theta: f64) -> CMatrix {
    let g = g1.eval_transfer(theta).unwrap();
    CMatrix::identity(g.ncols(), g.ncols()) + g.adjoint() * linalg::to_complex(lambda) * &g
}

pub fn grid_mean_real(count: usize, f: impl Fn(f64) -> CMatrix) -> DMatrix<f64> {
    let grid = uniform_grid(count);
    let mut acc = f(grid[0]);
    for &t in &grid[1..] {
        acc += f(t);
    }
    linalg::symmetrize(&(acc / Complex64::new(count as f64, 0.0)).map(|c| c.re))
}

/// `int log det(I + G1^* Lambda G1)` on a uniform grid.
pub fn logdet_quad(g1: &StateSpace, lambda: &DMatrix<f64>, count: usize) -> f64 {
    uniform_grid(count)
        .iter()
        .map(|&t| linalg::herm_logdet(&linalg::hermitian_part(&popov(g1, lambda, t))).unwrap())
        .sum::<f64>()
        / count as f64
}

fn g1_qinv_g1(g1: &StateSpace, lambda: &DMatrix<f64>, t: f64) -> CMatrix {
    let g = g1.eval_transfer(t).unwrap();
    let q = popov(g1, lambda, t);
    let x = q.lu().solve(&g.adjoint()).unwrap();
    &g * x
}

/// `int G1 Q^{-1} G1^* - I`.
pub fn y_quad(g1: &StateSpace, lambda: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let n = g1.outputs();
    grid_mean_real(count, |t| g1_qinv_g1(g1, lambda, t)) - DMatrix::identity(n, n)
}

/// `int G1 Q^{-1} G1^* Sigma_k G1 Q^{-1} G1^*`.
pub fn yk_quad(g1: &StateSpace, lambda: &DMatrix<f64>, sigma_k: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let sk = linalg::to_complex(sigma_k);
    grid_mean_real(count, |t| {
        let w = g1_qinv_g1(g1, lambda, t);
        &w * &sk * &w
    })
}

/// `int G Phi G^*` on a uniform grid.
pub fn gamma_quad(bank: &StateSpace, phi: &SpectralDensity, count: usize) -> DMatrix<f64> {
    grid_mean_real(count, |t| {
        let g = bank.eval_transfer(t).unwrap();
        &g * phi.eval(t).unwrap() * g.adjoint()
    })
}

/// Largest pointwise spectral-norm gap between two densities on a grid, relative to `1 + ||b||`.
pub fn max_density_gap(a: &SpectralDensity, b: &SpectralDensity, count: usize) -> f64 {
    uniform_grid(count)
        .iter()
        .map(|&t| {
            let bt = b.eval(t).unwrap();
            let diff = linalg::hermitian_part(&(a.eval(t).unwrap() - &bt));
            linalg::herm_spectral_norm(&diff) / (1.0 + linalg::herm_spectral_norm(&bt))
        })
        .fold(0.0, f64::max)
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let x = DMatrix::from_fn(n, n, |_, _| normal(rng));
    linalg::symmetrize(&x)
}

pub fn random_coords(rng: &mut impl Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| normal(rng))
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Five rational pairs `(Phi_y, Phi_z)` of scalar and bivariate densities.
pub fn theorem_pairs() -> Vec<(SpectralDensity, SpectralDensity)> {
    let arma = |a: f64, c: f64, d: f64| {
        SpectralDensity::from_factor(StateSpace::new(scalar(a), scalar(1.0), scalar(c), scalar(d)).unwrap()).unwrap()
    };
    let bivariate = |a: [f64; 4], d: [f64; 4]| {
        let w = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &a),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 0.4,
            DMatrix::from_row_slice(2, 2, &d),
        )
        .unwrap();
        SpectralDensity::from_factor(w).unwrap()
    };
    vec![
        (arma(0.5, 0.5, 1.0), arma(-0.3, 0.2, 1.0)),
        (arma(0.8, 0.3, 1.0), arma(0.2, 0.1, 1.5)),
        (arma(-0.6, 0.4, 0.8), SpectralDensity::constant(&scalar(1.0)).unwrap()),
        (
            bivariate([0.5, 0.1, 0.0, -0.4], [1.0, 0.2, 0.0, 1.0]),
            bivariate([0.2, 0.0, 0.1, 0.3], [1.0, 0.0, 0.3, 1.2]),
        ),
        (
            bivariate([0.7, -0.2, 0.2, 0.6], [1.1, 0.0, 0.0, 0.9]),
            SpectralDensity::identity(2),
        ),
    ]
}
