//! JSON configuration files overlaid on materialized defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::io::{read_bytes, sha256_hex};
use crate::manifest::InputDigest;

fn merge(base: &mut Map<String, Value>, patch: Map<String, Value>, at: &str) -> CliResult<()> {
    for (key, value) in patch {
        let path = if at.is_empty() { key.clone() } else { format!("{at}.{key}") };
        match base.get_mut(&key) {
            None => return Err(CliError::Input(format!("unknown config key {path:?}"))),
            Some(Value::Object(inner)) if value.is_object() => {
                let Value::Object(patch) = value else { unreachable!() };
                merge(inner, patch, &path)?;
            }
            Some(slot) => *slot = value,
        }
    }
    Ok(())
}

/// Applies the keys of the JSON object `patch` to `defaults`; nested objects
/// merge key by key, everything else is replaced.
pub fn overlay_value<T: Serialize + DeserializeOwned>(defaults: &T, patch: Value) -> CliResult<T> {
    let Value::Object(mut base) = serde_json::to_value(defaults).map_err(|e| CliError::Internal(e.to_string()))? else {
        return Err(CliError::Internal("config defaults are not an object".into()));
    };
    let Value::Object(patch) = patch else {
        return Err(CliError::Input("config must be a JSON object".into()));
    };
    merge(&mut base, patch, "")?;
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Input(format!("config: {e}")))
}

pub fn read_json(path: &Path) -> CliResult<(Value, InputDigest)> {
    let bytes = read_bytes(path)?;
    let value = serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((value, InputDigest::new("config", path, &sha256_hex(&bytes))))
}

/// `defaults` overlaid with the optional config file.
pub fn load<T: Serialize + DeserializeOwned>(defaults: T, file: Option<&Path>) -> CliResult<(T, Vec<InputDigest>)> {
    match file {
        None => Ok((defaults, Vec::new())),
        Some(path) => {
            let (value, digest) = read_json(path)?;
            Ok((overlay_value(&defaults, value)?, vec![digest]))
        }
    }
}
