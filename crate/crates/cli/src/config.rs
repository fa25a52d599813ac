use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rer_core::{BankSpec, Prior, SolverOptions, StateSpace};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::io;

pub const DEFAULT_GRID: usize = 512;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    /// Constant at the sample covariance.
    #[default]
    Constant,
    Identity,
    Ar { order: usize },
    Factor(StateSpace),
    /// Factor stored in a separate JSON file, relative to the config file.
    FactorFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub bank: BankSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl EstimateConfig {
    /// Read a config file, or the `config` section of a manifest written by an earlier run.
    pub fn load(path: &Path) -> CliResult<Self> {
        let value: Value = io::read_json(path)?;
        let value = unwrap_manifest(value);
        let mut cfg: EstimateConfig = serde_json::from_value(value)
            .map_err(|e| CliError::input(anyhow!("config {}: {e}", path.display())))?;
        if let PriorSpec::FactorFile(rel) = &cfg.prior {
            let base = path.parent().unwrap_or(Path::new("."));
            let w: StateSpace = io::read_json(&base.join(rel))?;
            cfg.prior = PriorSpec::Factor(w);
        }
        Ok(cfg)
    }

    pub fn prior(&self) -> CliResult<Prior> {
        Ok(match &self.prior {
            PriorSpec::Constant => Prior::Constant,
            PriorSpec::Identity => Prior::Identity,
            PriorSpec::Ar { order } => Prior::Ar(*order),
            PriorSpec::Factor(w) => Prior::Factor(w.clone()),
            PriorSpec::FactorFile(p) => {
                return Err(CliError::input(anyhow!("unresolved prior file {}", p.display())));
            }
        })
    }
}

fn unwrap_manifest(value: Value) -> Value {
    match value {
        Value::Object(mut map) if map.contains_key("command") && map.contains_key("config") => {
            map.remove("config").unwrap_or(Value::Null)
        }
        other => other,
    }
}

/// Merge `overrides` into `base`. Every key of `overrides` must already exist in `base`.
pub fn merge(base: &mut Value, overrides: &Value, at: &str) -> CliResult<()> {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                let slot = b
                    .get_mut(k)
                    .ok_or_else(|| CliError::input(anyhow!("unknown override key {path}")))?;
                merge(slot, v, &path)?;
            }
            Ok(())
        }
        (b, o) => {
            *b = o.clone();
            Ok(())
        }
    }
}

/// Split an overrides document into experiment overrides and solver options.
pub fn split_overrides(mut value: Value) -> CliResult<(Value, Option<SolverOptions>)> {
    let solver = match value.as_object_mut().and_then(|m| m.remove("solver")) {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| CliError::input(anyhow!("solver options: {e}")))?),
        None => None,
    };
    Ok((value, solver))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn prior_spellings() {
        let cfg: EstimateConfig = serde_json::from_value(json!({
            "bank": {"poles": [{"real": 0.5}]},
            "prior": {"ar": {"order": 2}}
        }))
        .unwrap();
        assert_eq!(cfg.prior, PriorSpec::Ar { order: 2 });
        let cfg: EstimateConfig =
            serde_json::from_value(json!({"bank": {"poles": []}, "prior": "identity"})).unwrap();
        assert_eq!(cfg.prior, PriorSpec::Identity);
        assert!(serde_json::from_value::<EstimateConfig>(json!({"bank": {"poles": []}, "typo": 1})).is_err());
    }

    #[test]
    fn merge_rejects_unknown_keys() {
        let mut base = json!({"a": {"b": 1, "c": 2}, "d": [1, 2]});
        merge(&mut base, &json!({"a": {"c": 5}, "d": [3]}), "").unwrap();
        assert_eq!(base, json!({"a": {"b": 1, "c": 5}, "d": [3]}));
        assert!(merge(&mut base, &json!({"a": {"x": 0}}), "").is_err());
    }

    #[test]
    fn manifest_section_is_unwrapped() {
        let v = unwrap_manifest(json!({"command": "estimate", "config": {"bank": 1}}));
        assert_eq!(v, json!({"bank": 1}));
        let v = unwrap_manifest(json!({"bank": 1}));
        assert_eq!(v, json!({"bank": 1}));
    }
}
