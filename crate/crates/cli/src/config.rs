//! Config loading: a JSON file, deep-merged over optional defaults, then
//! `key.path=value` overrides, then strict deserialization.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

pub fn read(path: Option<&Path>) -> Result<Value> {
    match path {
        None => Ok(Value::Object(Map::new())),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

/// Recursively overlays `top` onto `base`; arrays and scalars replace.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, t) => *slot = t,
    }
}

/// Applies `a.b.0.c=value`. The value is parsed as JSON, falling back to a
/// plain string. Missing object keys are created; array indices must exist.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let bad = |reason: &str| CliError::Override {
        spec: spec.to_owned(),
        reason: reason.to_owned(),
    };
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| bad("expected key=value"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(bad("empty key segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    for seg in path.split('.') {
        node = match node {
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| bad("array segment must be an index"))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| bad(&format!("index {i} out of range for length {len}")))?
            }
            Value::Object(map) => map.entry(seg.to_owned()).or_insert(Value::Null),
            Value::Null => {
                *node = Value::Object(Map::new());
                node.as_object_mut()
                    .expect("just created")
                    .entry(seg.to_owned())
                    .or_insert(Value::Null)
            }
            _ => return Err(bad(&format!("`{seg}` descends into a scalar"))),
        };
    }
    *node = value;
    Ok(())
}

pub fn parse<T: DeserializeOwned>(value: Value) -> Result<T> {
    Ok(serde_json::from_value(value)?)
}
