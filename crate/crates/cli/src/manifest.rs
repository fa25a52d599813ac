use rer_core::SolverOptions;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct DataDigest {
    pub sha256: String,
    pub rows: usize,
    pub cols: usize,
}

/// Everything needed to reproduce a run. Holds no file system paths.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub solver: SolverOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<u64>,
    pub grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataDigest>,
    pub results: Value,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(command: &str, config: Value, solver: SolverOptions, grid: usize) -> Self {
        Self {
            tool: "rer",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            solver,
            seed: None,
            runs: None,
            grid,
            data: None,
            results: Value::Null,
            wall_time_s: 0.0,
        }
    }
}
