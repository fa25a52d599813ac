use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use rer_core::lti::uniform_grid;
use rer_core::sim::{self, LinesExperiment, ShapingExperiment};
use rer_core::{RerError, SolverOptions, SpectralDensity};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, DEFAULT_GRID};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Two well separated sinusoids in colored noise.
    Lines,
    /// Two closely spaced sinusoids in colored noise.
    LinesClose,
    /// Bivariate output of a fixed shaping filter, AR prior.
    Shaping,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Lines => "lines",
            Experiment::LinesClose => "lines-close",
            Experiment::Shaping => "shaping",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub runs: u64,
    /// Number of frequencies in the per-run spectra.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// JSON overrides merged into the experiment defaults; a `solver` key sets solver options.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn configure<T: Serialize + DeserializeOwned>(default: T, overrides: &Value) -> CliResult<(T, Value)> {
    let mut value = serde_json::to_value(default).map_err(|e| CliError::Other(e.into()))?;
    config::merge(&mut value, overrides, "")?;
    let parsed = serde_json::from_value(value.clone()).map_err(|e| CliError::input(anyhow::anyhow!("overrides: {e}")))?;
    Ok((parsed, value))
}

struct Outcome {
    runs_csv: String,
    spectra: Vec<(u64, String)>,
    extra: Vec<(&'static str, String)>,
    results: Value,
    first_error: Option<RerError>,
    failures: usize,
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let start = Instant::now();
    let overrides = match &args.config {
        Some(p) => io::read_json::<Value>(p)?,
        None => json!({}),
    };
    let (overrides, solver) = config::split_overrides(overrides)?;
    let mut opts = solver.unwrap_or_default();
    if let Some(tol) = args.tol {
        opts.tol = tol;
    }
    if let Some(k) = args.max_iter {
        opts.max_iter = k;
    }
    let grid = args.grid.unwrap_or(DEFAULT_GRID);
    if grid == 0 || args.runs == 0 {
        return Err(CliError::input(anyhow::anyhow!("grid and runs must be positive")));
    }
    let thetas = uniform_grid(grid);

    let (outcome, echo) = match args.experiment {
        Experiment::Lines | Experiment::LinesClose => {
            let default = if args.experiment == Experiment::Lines {
                LinesExperiment::standard()
            } else {
                LinesExperiment::close()
            };
            let (exp, echo) = configure(default, &overrides)?;
            (lines(&exp, args, &opts, &thetas)?, echo)
        }
        Experiment::Shaping => {
            let (exp, echo) = configure(ShapingExperiment::standard(), &overrides)?;
            (shaping(&exp, args, &opts, &thetas)?, echo)
        }
    };

    if outcome.failures as u64 == args.runs {
        return Err(outcome.first_error.map(CliError::from).unwrap_or_else(|| {
            CliError::Other(anyhow::anyhow!("all runs failed"))
        }));
    }

    io::write_text(&args.out, "runs.csv", &outcome.runs_csv)?;
    for (run, text) in &outcome.spectra {
        io::write_text(&args.out, &format!("run_{run:03}.csv"), text)?;
    }
    for (name, text) in &outcome.extra {
        io::write_text(&args.out, name, text)?;
    }
    let mut manifest = Manifest::new(&format!("simulate {}", args.experiment.name()), echo, opts, grid);
    manifest.seed = Some(args.seed);
    manifest.runs = Some(args.runs);
    manifest.results = outcome.results;
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    io::write_json(&args.out, "manifest.json", &manifest)?;
    Ok(())
}

fn lines(exp: &LinesExperiment, args: &SimulateArgs, opts: &SolverOptions, thetas: &[f64]) -> CliResult<Outcome> {
    let results: Vec<_> = (0..args.runs)
        .into_par_iter()
        .map(|r| {
            let (summary, est) = exp.run(args.seed, r, opts)?;
            let csv = est.solution.spectrum.sample(thetas)?.to_csv();
            Ok::<_, RerError>((summary, csv))
        })
        .collect();

    let mut csv = String::from("run,status,iterations,resolved,peaks\n");
    let mut spectra = Vec::new();
    let (mut resolved, mut failures, mut first_error) = (0usize, 0usize, None);
    for (r, res) in (0..args.runs).zip(results) {
        match res {
            Ok((run, text)) => {
                let peaks: Vec<String> = run.peaks.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(csv, "{r},ok,{},{},{}", run.iterations, run.resolved, peaks.join(";"));
                resolved += usize::from(run.resolved);
                spectra.push((r, text));
            }
            Err(e) => {
                let _ = writeln!(csv, "{r},{},,,", csv_field(&e.to_string()));
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    println!("resolved {resolved}/{} runs ({failures} failed)", args.runs);
    Ok(Outcome {
        runs_csv: csv,
        spectra,
        extra: Vec::new(),
        results: json!({"resolved": resolved, "failed": failures}),
        first_error,
        failures,
    })
}

fn shaping(exp: &ShapingExperiment, args: &SimulateArgs, opts: &SolverOptions, thetas: &[f64]) -> CliResult<Outcome> {
    let truth = exp.true_filter(args.seed)?;
    let results: Vec<_> = (0..args.runs)
        .into_par_iter()
        .map(|r| {
            let (summary, est) = exp.run(&truth, args.seed, r, opts)?;
            let csv = est.solution.spectrum.sample(thetas)?.to_csv();
            Ok::<_, RerError>((summary, csv))
        })
        .collect();

    let mut csv = String::from(
        "run,status,iterations,relative_residual,factor_states,degree_bound,mean_error_rer,mean_error_prior\n",
    );
    let mut spectra = Vec::new();
    let mut ok = Vec::new();
    let (mut failures, mut first_error) = (0usize, None);
    for (r, res) in (0..args.runs).zip(results) {
        match res {
            Ok((run, text)) => {
                let _ = writeln!(
                    csv,
                    "{r},ok,{},{},{},{},{},{}",
                    run.iterations,
                    run.relative_residual,
                    run.factor_states,
                    run.degree_bound,
                    run.mean_error_estimate(),
                    run.mean_error_prior()
                );
                spectra.push((r, text));
                ok.push(run);
            }
            Err(e) => {
                let _ = writeln!(csv, "{r},{},,,,,,", csv_field(&e.to_string()));
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }

    let est_curves: Vec<&[f64]> = ok.iter().map(|r| r.error_estimate.as_slice()).collect();
    let prior_curves: Vec<&[f64]> = ok.iter().map(|r| r.error_prior.as_slice()).collect();
    let avg_est = sim::average_curves(&est_curves);
    let avg_prior = sim::average_curves(&prior_curves);
    let mut curve = String::from("theta,rer,prior\n");
    for ((t, a), b) in exp.grid().iter().zip(&avg_est).zip(&avg_prior) {
        let _ = writeln!(curve, "{t},{a},{b}");
    }
    let truth_csv = SpectralDensity::from_factor(truth)?.sample(thetas)?.to_csv();

    let improved = ok.iter().filter(|r| r.mean_error_estimate() < r.mean_error_prior()).count();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    println!(
        "improved on the prior in {improved}/{} runs ({failures} failed); mean error {:.4} vs prior {:.4}",
        args.runs,
        mean(&avg_est),
        mean(&avg_prior)
    );
    Ok(Outcome {
        runs_csv: csv,
        spectra,
        extra: vec![("error_curve.csv", curve), ("truth.csv", truth_csv)],
        results: json!({
            "converged": ok.len(),
            "improved": improved,
            "failed": failures,
            "mean_error_rer": mean(&avg_est),
            "mean_error_prior": mean(&avg_prior),
        }),
        first_error,
        failures,
    })
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}
