//! Quadrature on the unit circle and on sub-intervals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::CMatrix;
use crate::lti::uniform_grid;

/// Periodic rectangle rule, doubled until the relative change drops below `rel_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub initial_points: usize,
    pub rel_tol: f64,
    pub max_points: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            initial_points: 2048,
            rel_tol: 1e-10,
            max_points: 1 << 16,
        }
    }
}

/// Mean of `f` over a uniform `count`-point grid on `(-pi, pi]`, i.e. the
/// normalized integral `(1/2pi) int f`. Reduction order is fixed.
pub fn circle_mean<F>(count: usize, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let vals: Vec<f64> = uniform_grid(count)
        .into_par_iter()
        .map(|t| f(t))
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / count as f64)
}

/// [`circle_mean`] with grid doubling.
pub fn circle_mean_adaptive<F>(opts: &QuadratureOptions, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut count = opts.initial_points.max(1);
    let mut prev = circle_mean(count, &f)?;
    while count * 2 <= opts.max_points {
        // New nodes of the doubled grid are the midpoints of the old one.
        let h = 2.0 * std::f64::consts::PI / count as f64;
        let mids: Vec<f64> = uniform_grid(count)
            .into_par_iter()
            .map(|t| f(t - 0.5 * h))
            .collect::<Result<_>>()?;
        let next = 0.5 * (prev + mids.iter().sum::<f64>() / count as f64);
        count *= 2;
        let change = (next - prev).abs();
        prev = next;
        if change <= opts.rel_tol * next.abs().max(1e-300) || change <= 1e-15 {
            return Ok(prev);
        }
    }
    log::warn!("circle quadrature reached {count} points without meeting rel_tol");
    Ok(prev)
}

/// Matrix-valued circle mean `(1/2pi) int F`.
pub fn circle_mean_matrix<F>(count: usize, rows: usize, cols: usize, f: F) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<CMatrix> + Sync,
{
    let vals: Vec<CMatrix> = uniform_grid(count)
        .into_par_iter()
        .map(|t| f(t))
        .collect::<Result<_>>()?;
    let mut acc = CMatrix::zeros(rows, cols);
    for v in &vals {
        acc += v;
    }
    Ok(acc / Complex64::new(count as f64, 0.0))
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<(CMatrix, f64)>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = &fc * Complex64::new(WGK[7], 0.0);
    let mut gauss = &fc * Complex64::new(WG[3], 0.0);
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x)? + f(c + x)?;
        kron += &s * Complex64::new(WGK[i], 0.0);
        if i % 2 == 1 {
            gauss += &s * Complex64::new(WG[i / 2], 0.0);
        }
    }
    let hk = Complex64::new(h, 0.0);
    let kron = kron * hk;
    let err = (&kron - gauss * hk).norm();
    Ok((kron, err))
}

/// Adaptive Gauss-Kronrod (7/15) integral `int_a^b F(x) dx` of a matrix function.
pub fn integrate_matrix<F>(f: F, a: f64, b: f64, tol: f64) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    let (total, err) = gk15(&f, a, b)?;
    let target = tol * total.norm().max(1e-300);
    if err <= target {
        return Ok(total);
    }
    let mut stack = vec![(a, b, total.clone(), err)];
    let mut done = CMatrix::zeros(total.nrows(), total.ncols());
    let mut depth_guard = 0usize;
    while let Some((lo, hi, val, e)) = stack.pop() {
        depth_guard += 1;
        let width_frac = (hi - lo) / (b - a);
        if e <= target * width_frac.max(1e-6) || depth_guard > 20_000 || hi - lo < 1e-12 * (b - a) {
            done += val;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid)?;
        let (v2, e2) = gk15(&f, mid, hi)?;
        stack.push((lo, mid, v1, e1));
        stack.push((mid, hi, v2, e2));
    }
    Ok(done)
}

/// Real symmetric part of a complex matrix, used once a circle integral is known to be real.
pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    crate::linalg::symmetrize(&m.map(|c| c.re))
}
