use std::path::Path;

use serde_json::{Map, Value};

use crate::error::CliError;

/// Reads the JSON config file, or an empty object when none is given.
pub fn load(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Validation(format!(
            "config {} must hold a JSON object",
            path.display()
        )));
    }
    Ok(value)
}

/// Parses the right-hand side of `--set`: JSON scalars as such, anything else
/// as a string.
fn parse_scalar(raw: &str) -> Result<Value, CliError> {
    match serde_json::from_str::<Value>(raw) {
        Ok(v @ (Value::Array(_) | Value::Object(_))) => Err(CliError::Validation(format!(
            "--set only overrides scalar leaves, got the structured value {v}"
        ))),
        Ok(v) => Ok(v),
        Err(_) => Ok(Value::String(raw.to_owned())),
    }
}

/// Applies `path=value`, where `path` is dot-separated and numeric segments
/// index existing arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set expects path=value, got {assignment:?}")))?;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Validation(format!(
            "--set path {path:?} has an empty segment"
        )));
    }
    set_path(root, &segments, parse_scalar(raw)?, path)
}

/// Sets `path` to `value` unconditionally, creating objects on the way.
pub fn set_scalar(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let segments: Vec<&str> = path.split('.').collect();
    set_path(root, &segments, value, path)
}

fn set_path(node: &mut Value, segments: &[&str], value: Value, full: &str) -> Result<(), CliError> {
    let (head, rest) = segments.split_first().expect("paths have at least one segment");
    let slot = match node {
        Value::Object(map) => map.entry(head.to_string()).or_insert(if rest.is_empty() {
            Value::Null
        } else {
            Value::Object(Map::new())
        }),
        Value::Array(items) => {
            let idx: usize = head
                .parse()
                .map_err(|_| CliError::Validation(format!("--set path {full:?}: {head:?} is not an array index")))?;
            let len = items.len();
            items.get_mut(idx).ok_or_else(|| {
                CliError::Validation(format!(
                    "--set path {full:?}: index {idx} is out of range (length {len})"
                ))
            })?
        }
        _ => {
            return Err(CliError::Validation(format!(
                "--set path {full:?} descends into a scalar at {head:?}"
            )))
        }
    };
    if rest.is_empty() {
        if slot.is_object() || slot.is_array() {
            return Err(CliError::Validation(format!(
                "--set path {full:?} names a structured value; only scalar leaves can be overridden"
            )));
        }
        *slot = value;
        Ok(())
    } else {
        set_path(slot, rest, value, full)
    }
}

pub fn get_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(root, |node, seg| match node {
        Value::Object(map) => map.get(seg),
        Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => None,
    })
}
