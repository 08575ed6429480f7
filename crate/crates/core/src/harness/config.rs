//! Layered configuration: defaults < TOML file < environment < flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use super::HarnessError;

/// Environment variables starting with this prefix override config keys.
/// `LINEGUIDE_DEADBAND__EPSILON=0.2` sets `deadband.epsilon`.
pub const ENV_PREFIX: &str = "LINEGUIDE_";

/// Builds a `T` from its defaults, then an optional TOML file, then
/// environment variables, then `key.path=value` overrides. Values are parsed
/// as TOML literals and fall back to plain strings.
pub fn layered<T: Serialize + DeserializeOwned + Default>(
    file: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    overrides: &[String],
) -> Result<T, HarnessError> {
    let mut root = to_table(&T::default())?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
        let doc: Table = text.parse().map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut root, doc);
    }
    let mut env: Vec<(String, String)> =
        env.into_iter().filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_string(), v))).collect();
    env.sort();
    for (key, value) in env {
        let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
        set_path(&mut root, &path, parse_literal(&value))?;
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("override {item:?} is not key=value")))?;
        let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
        set_path(&mut root, &path, parse_literal(value.trim()))?;
    }
    Value::Table(root).try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))
}

pub fn to_table<T: Serialize>(value: &T) -> Result<Table, HarnessError> {
    match Value::try_from(value).map_err(|e| HarnessError::Config(e.to_string()))? {
        Value::Table(t) => Ok(t),
        _ => Err(HarnessError::Config("configuration must serialize to a table".into())),
    }
}

/// Renders a config as TOML, the format `--show-config` prints.
pub fn to_toml<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    toml::to_string_pretty(value).map_err(|e| HarnessError::Config(e.to_string()))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(root: &mut Table, path: &[String], value: Value) -> Result<(), HarnessError> {
    let (last, parents) = path.split_last().ok_or_else(|| HarnessError::Config("empty key".into()))?;
    let mut node = root;
    for key in parents {
        let entry = node.entry(key.clone()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => return Err(HarnessError::Config(format!("{} is not a table", path.join(".")))),
        };
    }
    node.insert(last.clone(), value);
    Ok(())
}

fn parse_literal(s: &str) -> Value {
    format!("v = {s}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(s.to_string()))
}
