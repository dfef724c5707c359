use std::fs;
use std::path::Path;

use isbpol::params::ConfigError;
use isbpol::{load_config, DeviceConfig, LoadedConfig};

/// Environment variable capping the number of memoized correlator keys.
pub const CACHE_LIMIT_VAR: &str = "ISBPOL_CACHE_LIMIT";

/// A validated config plus where it came from.
pub struct Resolved {
    pub loaded: LoadedConfig,
    /// Config file path, or `gaas-preset` when none was given.
    pub source: String,
    pub overrides: Vec<(String, String)>,
}

impl Resolved {
    pub fn config(&self) -> &DeviceConfig {
        &self.loaded.config
    }
}

/// Reads the config file (if any), applies `key=value` overrides on top and validates.
pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Resolved, ConfigError> {
    let text = match path {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", p.display())))?
        }
        None => String::new(),
    };
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut applied = Vec::new();
    for raw in overrides {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse(format!("override `{raw}` is not of the form key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        insert(&mut table, key, parse_value(value))?;
        applied.push((key.to_string(), value.to_string()));
    }
    let merged = toml::to_string(&table).map_err(|e| ConfigError::Parse(e.to_string()))?;
    Ok(Resolved {
        loaded: load_config(&merged)?,
        source: path.map_or_else(|| "gaas-preset".to_string(), |p| p.display().to_string()),
        overrides: applied,
    })
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn insert(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
            Ok(())
        }
        Some((head, rest)) => {
            let entry = table.entry(head.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(sub) => insert(sub, rest, value),
                _ => Err(ConfigError::Parse(format!("`{head}` is not a table"))),
            }
        }
    }
}

/// Correlator cache budget from the environment, if set.
pub fn cache_budget() -> Result<usize, ConfigError> {
    match std::env::var(CACHE_LIMIT_VAR) {
        Err(_) => Ok(isbpol::cbalg::DEFAULT_BUDGET),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ConfigError::Parse(format!("{CACHE_LIMIT_VAR} must be a positive integer, got `{raw}`"))),
        },
    }
}
