//! Real state-space LTI systems `C (zI - A)^{-1} B + D`.
//!
//! Filter banks, prior spectral factors, cascades and Riccati factors are all
//! carried as [`StateSpace`] values; complex pole pairs are realized as real
//! 2x2 rotation-scaled blocks so that every matrix stays real.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{RerError, Result};
use crate::linalg::{self, CMatrix, SteinSolver};

const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceRepr", into = "StateSpaceRepr")]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(RerError::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(RerError::Dimension(format!(
                "B is {}x{}, C is {}x{}, state dimension {n}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(RerError::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Static gain `D` with an empty state.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (q, p) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, p),
            c: DMatrix::zeros(q, 0),
            d,
        }
    }

    /// Filter bank `(zI - A)^{-1} B`, i.e. `C = I`, `D = 0`.
    pub fn filter_bank(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        Self::new(a, b, DMatrix::identity(n, n), DMatrix::zeros(n, m))
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Transfer matrix at `z = e^{j theta}`.
    pub fn eval_transfer(&self, theta: f64) -> Result<CMatrix> {
        self.eval_at(Complex64::from_polar(1.0, theta))
            .ok_or(RerError::EigenvalueOnCircle { theta })
    }

    fn eval_at(&self, z: Complex64) -> Option<CMatrix> {
        let n = self.states();
        let d = linalg::to_complex(&self.d);
        if n == 0 {
            return Some(d);
        }
        let mut resolvent = linalg::to_complex(&self.a) * Complex64::new(-1.0, 0.0);
        for i in 0..n {
            resolvent[(i, i)] += z;
        }
        let lu = resolvent.lu();
        // Reject numerically singular resolvents rather than returning garbage.
        let u = lu.u();
        let scale = self.a.norm() + 1.0;
        if (0..n).any(|i| u[(i, i)].norm() <= 1e-14 * scale) {
            return None;
        }
        let x = lu.solve(&linalg::to_complex(&self.b))?;
        Some(linalg::to_complex(&self.c) * x + d)
    }

    /// Inverse system for square `D` invertible: `(A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1})`.
    pub fn inverse(&self) -> Result<Self> {
        let d_inv = self
            .d
            .clone()
            .try_inverse()
            .ok_or_else(|| RerError::InvalidArgument("feedthrough D is not invertible".into()))?;
        let a = &self.a - &self.b * &d_inv * &self.c;
        let b = &self.b * &d_inv;
        let c = -(&d_inv * &self.c);
        Self::new(a, b, c, d_inv)
    }

    /// Steady-state output covariance `int W W^*` under unit white-noise input.
    pub fn output_covariance(&self) -> Result<DMatrix<f64>> {
        let x = solve_discrete_lyapunov(&self.a, &(&self.b * self.b.transpose()))?;
        Ok(linalg::symmetrize(
            &(&self.c * x * self.c.transpose() + &self.d * self.d.transpose()),
        ))
    }
}

/// JSON layout: every matrix as a list of rows. `D` fixes the input/output
/// counts, so empty `B`/`C` are unambiguous for static systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateSpaceRepr {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(RerError::Dimension(format!("matrix {name} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<StateSpaceRepr> for StateSpace {
    type Error = RerError;

    fn try_from(r: StateSpaceRepr) -> Result<Self> {
        let n = r.a.len();
        let q = r.d.len();
        let p = r.d.first().map_or(0, |row| row.len());
        StateSpace::new(
            rows_to_matrix(&r.a, n, n, "A")?,
            rows_to_matrix(&r.b, n, p, "B")?,
            rows_to_matrix(&r.c, q, n, "C")?,
            rows_to_matrix(&r.d, q, p, "D")?,
        )
    }
}

impl From<StateSpace> for StateSpaceRepr {
    fn from(s: StateSpace) -> Self {
        Self {
            a: matrix_to_rows(&s.a),
            b: matrix_to_rows(&s.b),
            c: matrix_to_rows(&s.c),
            d: matrix_to_rows(&s.d),
        }
    }
}

/// Solve `X - F X F^T = Q` for stable `F`.
pub fn solve_discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SteinSolver::new(f)?.solve_symmetric(q)
}

/// Reachability Gramian `X - A X A^T = B B^T`; errors when it is not positive definite.
pub fn reachability_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != a.nrows() {
        return Err(RerError::Dimension("B rows must match A".into()));
    }
    let x = solve_discrete_lyapunov(a, &(b * b.transpose()))?;
    let min_eig = linalg::min_sym_eigenvalue(&x);
    if !(min_eig > 1e-12 * x.norm().max(1.0)) {
        return Err(RerError::Unreachable { min_eig });
    }
    Ok(x)
}

/// Cascade: the output of `first` feeds `second`, so the transfer is `second(z) first(z)`.
pub fn series(first: &StateSpace, second: &StateSpace) -> Result<StateSpace> {
    if first.outputs() != second.inputs() {
        return Err(RerError::Dimension(format!(
            "series: first has {} outputs, second has {} inputs",
            first.outputs(),
            second.inputs()
        )));
    }
    let (n1, n2) = (first.states(), second.states());
    let n = n1 + n2;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&first.a);
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(&second.b * &first.c));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&second.a);
    let mut b = DMatrix::zeros(n, first.inputs());
    b.view_mut((0, 0), (n1, first.inputs())).copy_from(&first.b);
    b.view_mut((n1, 0), (n2, first.inputs())).copy_from(&(&second.b * &first.d));
    let mut c = DMatrix::zeros(second.outputs(), n);
    c.view_mut((0, 0), (second.outputs(), n1)).copy_from(&(&second.d * &first.c));
    c.view_mut((0, n1), (second.outputs(), n2)).copy_from(&second.c);
    let d = &second.d * &first.d;
    StateSpace::new(a, b, c, d)
}

/// Block-diagonal filter bank with `B = ones(n, m)`, `C = I`, `D = 0`.
///
/// Real poles become 1x1 blocks; each conjugate pair `r e^{±jw}` becomes
/// `[[r cos w, r sin w], [-r sin w, r cos w]]`. Blocks follow the order of
/// first appearance in `poles`.
pub fn build_filterbank(poles: &[Complex64], m: usize) -> Result<StateSpace> {
    if m == 0 {
        return Err(RerError::InvalidArgument("filter bank needs at least one channel".into()));
    }
    if poles.is_empty() {
        return Err(RerError::InvalidPoles("empty pole list".into()));
    }
    if let Some(p) = poles.iter().find(|p| !(p.norm() < 1.0)) {
        return Err(RerError::InvalidPoles(format!("pole {p} is not strictly inside the unit disk")));
    }
    let mut used = vec![false; poles.len()];
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let p = poles[i];
        if p.im.abs() <= PAIR_TOL {
            blocks.push(DMatrix::from_element(1, 1, p.re));
            continue;
        }
        let partner = (0..poles.len())
            .find(|&k| !used[k] && (poles[k] - p.conj()).norm() <= PAIR_TOL * (1.0 + p.norm()))
            .ok_or_else(|| RerError::InvalidPoles(format!("complex pole {p} has no conjugate partner")))?;
        used[partner] = true;
        let (r, w) = (p.norm(), p.arg().abs());
        blocks.push(DMatrix::from_row_slice(
            2,
            2,
            &[r * w.cos(), r * w.sin(), -r * w.sin(), r * w.cos()],
        ));
    }
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut a = DMatrix::zeros(n, n);
    let mut off = 0;
    for blk in &blocks {
        let k = blk.nrows();
        a.view_mut((off, off), (k, k)).copy_from(blk);
        off += k;
    }
    StateSpace::filter_bank(a, DMatrix::from_element(n, m, 1.0))
}

/// Pole set `{r e^{±j w}}` for each angle, as a flat conjugate-paired list.
pub fn conjugate_pairs(radius: f64, angles: &[f64]) -> Vec<Complex64> {
    angles
        .iter()
        .flat_map(|&w| {
            let p = Complex64::from_polar(radius, w);
            [p, p.conj()]
        })
        .collect()
}

/// Uniform grid of `count` angles on `(-pi, pi]`.
pub fn uniform_grid(count: usize) -> Vec<f64> {
    let h = 2.0 * std::f64::consts::PI / count as f64;
    (1..=count).map(|j| -std::f64::consts::PI + h * j as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn delay() -> StateSpace {
        StateSpace::filter_bank(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0)).unwrap()
    }

    fn two_pole_block(r: f64, w: f64) -> StateSpace {
        let bank = build_filterbank(&conjugate_pairs(r, &[w]), 1).unwrap();
        StateSpace::new(
            bank.a,
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn delay_transfer_values() {
        let g = delay();
        let v0 = g.eval_transfer(0.0).unwrap()[(0, 0)];
        assert!((v0 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let v1 = g.eval_transfer(PI / 2.0).unwrap()[(0, 0)];
        assert!((v1 - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn resonance_peak_on_grid() {
        // Oracle: brute-force scan of |G| over a 1024-point grid.
        let g = two_pole_block(0.9, 0.52);
        let grid = uniform_grid(1024);
        let (best, _) = grid
            .iter()
            .map(|&t| (t, g.eval_transfer(t).unwrap()[(0, 0)].norm()))
            .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let at_pole = g.eval_transfer(0.52).unwrap()[(0, 0)].norm();
        let grid_max = g.eval_transfer(best).unwrap()[(0, 0)].norm();
        let h = 2.0 * PI / 1024.0;
        assert!((best.abs() - 0.52).abs() <= 2.0 * h, "peak at {best}");
        assert!(at_pole >= grid_max * 0.99);
    }

    #[test]
    fn transfer_on_circle_eigenvalue_errors() {
        let g = StateSpace::filter_bank(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0))
            .unwrap();
        assert!(matches!(g.eval_transfer(0.0), Err(RerError::EigenvalueOnCircle { .. })));
    }

    #[test]
    fn lyapunov_trivial_cases() {
        let x = solve_discrete_lyapunov(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 3)).unwrap();
        assert!((x - DMatrix::identity(3, 3)).norm() < 1e-15);
        let x = solve_discrete_lyapunov(&DMatrix::from_element(1, 1, 0.5), &DMatrix::from_element(1, 1, 1.0))
            .unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        assert!(solve_discrete_lyapunov(&DMatrix::from_element(1, 1, 1.0), &DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn lyapunov_matches_truncated_series() {
        let f = DMatrix::from_row_slice(
            4,
            4,
            &[0.5, 0.2, 0.0, -0.1, -0.3, 0.4, 0.1, 0.0, 0.0, 0.2, -0.6, 0.3, 0.1, 0.0, 0.2, 0.3],
        );
        assert!(linalg::spectral_radius(&f) < 0.9);
        let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, -1.0, 0.0, 2.0, -0.3, 0.7]);
        let q = &b * b.transpose();
        // Oracle: sum_{k <= K} F^k Q (F^T)^k.
        let mut term = q.clone();
        let mut sum = q.clone();
        for _ in 0..400 {
            term = &f * term * f.transpose();
            sum += &term;
        }
        let x = solve_discrete_lyapunov(&f, &q).unwrap();
        assert!((x - sum).norm() < 1e-11);
    }

    #[test]
    fn gramian_cases() {
        let g = reachability_gramian(&DMatrix::zeros(1, 1), &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
        let a = DMatrix::from_diagonal_element(2, 2, 0.5);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        // rank [B AB] = 1 < 2
        assert!(matches!(reachability_gramian(&a, &b), Err(RerError::Unreachable { .. })));
    }

    #[test]
    fn series_with_static_gains() {
        let g = delay();
        let id = StateSpace::static_gain(DMatrix::identity(1, 1));
        let s = series(&g, &id).unwrap();
        for t in uniform_grid(64) {
            assert!((s.eval_transfer(t).unwrap() - g.eval_transfer(t).unwrap()).norm() < 1e-15);
        }
        let sigma = StateSpace::static_gain(DMatrix::from_element(1, 1, 3.0));
        let g1 = series(&sigma, &g).unwrap();
        assert_eq!(g1.states(), 1);
        let v = g1.eval_transfer(0.3).unwrap()[(0, 0)];
        assert!((v - Complex64::from_polar(3.0, -0.3)).norm() < 1e-14);
    }

    #[test]
    fn series_dimension_mismatch() {
        let g = build_filterbank(&[Complex64::new(0.1, 0.0), Complex64::new(0.2, 0.0)], 1).unwrap();
        assert!(series(&g, &g).is_err());
    }

    #[test]
    fn filterbank_shapes() {
        let g = build_filterbank(&[Complex64::new(0.0, 0.0)], 1).unwrap();
        assert_eq!(g.a, DMatrix::zeros(1, 1));
        assert_eq!(g.b, DMatrix::from_element(1, 1, 1.0));

        let mut poles = vec![Complex64::new(0.0, 0.0), Complex64::new(0.85, 0.0), Complex64::new(-0.85, 0.0)];
        poles.extend(conjugate_pairs(0.9, &[0.42, 0.44, 0.46, 0.48, 0.50]));
        let g = build_filterbank(&poles, 1).unwrap();
        assert_eq!(g.states(), 13);
        assert!(g.is_stable());
        reachability_gramian(&g.a, &g.b).unwrap();

        let angles: Vec<f64> = (1..=4).map(|k| k as f64 * PI / 5.0).collect();
        let g = build_filterbank(&conjugate_pairs(0.7, &angles), 2).unwrap();
        assert_eq!((g.states(), g.inputs()), (8, 2));
        reachability_gramian(&g.a, &g.b).unwrap();
    }

    #[test]
    fn filterbank_rejects_bad_poles() {
        assert!(build_filterbank(&[Complex64::new(1.0, 0.0)], 1).is_err());
        assert!(build_filterbank(&[Complex64::new(0.3, 0.4)], 1).is_err());
    }

    #[test]
    fn inverse_system_cancels() {
        let w = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[0.2, -0.4]),
            DMatrix::from_element(1, 1, 2.0),
        )
        .unwrap();
        let wi = w.inverse().unwrap();
        let s = series(&w, &wi).unwrap();
        for t in uniform_grid(32) {
            assert!((s.eval_transfer(t).unwrap()[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}
