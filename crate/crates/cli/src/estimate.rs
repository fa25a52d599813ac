use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rer_core::lti::uniform_grid;
use serde_json::json;

use crate::config::{EstimateConfig, DEFAULT_GRID};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::{DataDigest, Manifest};

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Bank, prior and solver settings (JSON). A manifest from an earlier run also works.
    #[arg(long)]
    pub config: PathBuf,
    /// Samples, one row per time step and one column per channel.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of frequencies in the written spectrum.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub fn run(args: &EstimateArgs) -> CliResult<()> {
    let start = Instant::now();
    let mut cfg = EstimateConfig::load(&args.config)?;
    if let Some(tol) = args.tol {
        cfg.solver.tol = tol;
    }
    if let Some(k) = args.max_iter {
        cfg.solver.max_iter = k;
    }
    if args.grid.is_some() {
        cfg.grid = args.grid;
    }
    let grid = cfg.grid.unwrap_or(DEFAULT_GRID);
    if grid == 0 {
        return Err(CliError::input(anyhow::anyhow!("grid must be positive")));
    }

    let text = io::read_text(&args.data)?;
    let data = io::parse_data_csv(&text)?;
    log::info!("read {} samples of {} channels", data.nrows(), data.ncols());

    let prior = cfg.prior()?;
    let est = rer_core::estimate(&data, &cfg.bank, &prior, &cfg.solver)?;
    let sol = &est.solution;
    log::info!("converged in {} iterations, residual {:.3e}", sol.iterations, sol.residual);

    let spectrum = sol.spectrum.sample(&uniform_grid(grid))?;
    io::write_text(&args.out, "spectrum.csv", &spectrum.to_csv())?;

    let mut manifest = Manifest::new(
        "estimate",
        serde_json::to_value(&cfg).map_err(|e| CliError::Other(e.into()))?,
        cfg.solver,
        grid,
    );
    manifest.data = Some(DataDigest {
        sha256: io::sha256_hex(text.as_bytes()),
        rows: data.nrows(),
        cols: data.ncols(),
    });
    manifest.results = json!({
        "iterations": sol.iterations,
        "dual_value": sol.dual_value,
        "grad_norm": sol.grad_norm,
        "residual": sol.residual,
        "relative_residual": sol.relative_residual,
        "degree": sol.degree,
        "degree_bound": sol.degree_bound,
        "factor_states": sol.factor_states,
        "projection_distance": (&est.sigma.sigma - &est.sigma_hat).norm(),
    });
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    io::write_json(&args.out, "manifest.json", &manifest)?;

    println!(
        "iterations {}  dual {:.6e}  relative residual {:.3e}  degree {} (bound {})",
        sol.iterations, sol.dual_value, sol.relative_residual, sol.degree, sol.degree_bound
    );
    Ok(())
}
