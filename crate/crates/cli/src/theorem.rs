use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::anyhow;
use clap::Args;
use nalgebra::DMatrix;
use rer_core::spectra::{rer_time_domain, spectral_rer_partition};
use rer_core::{SolverOptions, SpectralDensity, StateSpace};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::Manifest;

pub const GAP_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Args)]
pub struct TheoremArgs {
    /// JSON with factors `phi_y`, `phi_z` and optionally the partition sizes `n`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for the table and a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub phi_y: StateSpace,
    pub phi_z: StateSpace,
    #[serde(default = "dyadic")]
    pub n: Vec<usize>,
}

fn dyadic() -> Vec<usize> {
    (3..=10).map(|k| 1usize << k).collect()
}

fn first_order(pole: f64, c: f64, d: f64) -> StateSpace {
    StateSpace::new(
        DMatrix::from_element(1, 1, pole),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, c),
        DMatrix::from_element(1, 1, d),
    )
    .expect("scalar realization")
}

impl Default for PairConfig {
    /// `(1 + 0.5 z^-1) / (1 - 0.8 z^-1)` against `(1.2 - 0.4 z^-1) / (1 + 0.5 z^-1)`.
    fn default() -> Self {
        Self {
            phi_y: first_order(0.8, 1.3, 1.0),
            phi_z: first_order(-0.5, -1.0, 1.2),
            n: dyadic(),
        }
    }
}

/// True when the gaps over the trailing half of the table never increase by more than `floor`.
pub fn trailing_non_increasing(gaps: &[f64], floor: f64) -> bool {
    let tail = &gaps[gaps.len() / 2..];
    tail.windows(2).all(|w| w[1] <= w[0] + floor)
}

pub fn run(args: &TheoremArgs) -> CliResult<()> {
    let start = Instant::now();
    let cfg = match &args.config {
        Some(p) => io::read_json::<PairConfig>(p)?,
        None => PairConfig::default(),
    };
    if cfg.n.is_empty() || cfg.n.contains(&0) {
        return Err(CliError::input(anyhow!("partition sizes must be positive")));
    }
    let phi_y = SpectralDensity::from_factor(cfg.phi_y.clone())?;
    let phi_z = SpectralDensity::from_factor(cfg.phi_z.clone())?;
    let limit = rer_time_domain(&phi_y, &phi_z)?;

    let mut table = String::from("n,partition,gap\n");
    let mut gaps = Vec::with_capacity(cfg.n.len());
    println!("time-domain rate {limit:.12}");
    println!("{:>8}  {:>16}  {:>12}", "n", "partition", "gap");
    for &n in &cfg.n {
        let value = spectral_rer_partition(&phi_y, &phi_z, n)?;
        let gap = (limit - value).abs();
        println!("{n:>8}  {value:>16.12}  {gap:>12.4e}");
        let _ = writeln!(table, "{n},{value},{gap}");
        gaps.push(gap);
    }
    let monotone = trailing_non_increasing(&gaps, 1e-12 * limit.abs().max(1.0));
    let final_gap = *gaps.last().expect("non-empty");
    let pass = monotone && final_gap <= GAP_TOLERANCE;

    if let Some(out) = &args.out {
        io::write_text(out, "theorem.csv", &table)?;
        let echo = serde_json::to_value(&cfg).map_err(|e| CliError::Other(e.into()))?;
        let mut manifest = Manifest::new("verify-theorem", echo, SolverOptions::default(), 0);
        manifest.results = json!({
            "limit": limit,
            "final_gap": final_gap,
            "trailing_non_increasing": monotone,
            "pass": pass,
        });
        manifest.wall_time_s = start.elapsed().as_secs_f64();
        io::write_json(out, "manifest.json", &manifest)?;
    }

    if pass {
        println!("gap non-increasing and final gap {final_gap:.3e} <= {GAP_TOLERANCE:.0e}");
        Ok(())
    } else {
        Err(CliError::Theorem(format!(
            "partition check failed: trailing half non-increasing {monotone}, final gap {final_gap:.3e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pair_is_valid() {
        let cfg = PairConfig::default();
        assert!(SpectralDensity::from_factor(cfg.phi_y).is_ok());
        assert!(SpectralDensity::from_factor(cfg.phi_z).is_ok());
        assert_eq!(cfg.n.first(), Some(&8));
        assert_eq!(cfg.n.last(), Some(&1024));
    }

    #[test]
    fn trailing_monotonicity() {
        assert!(trailing_non_increasing(&[1.0, 5.0, 3.0, 2.0], 0.0));
        assert!(!trailing_non_increasing(&[1.0, 0.5, 0.2, 0.3], 0.0));
        assert!(trailing_non_increasing(&[0.0, 2e-13, 1e-13], 1e-12));
    }
}
