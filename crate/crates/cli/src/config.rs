//! `--config <file.json>` support: the document's keys are turned into flags
//! placed ahead of the ones typed on the command line, so typed flags win.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Removes `--config <path>` (or `--config=<path>`) from `args` and splices
/// the flags it describes in right after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => match iter.next() {
                Some(p) => path = Some(p),
                None => bail!("--config needs a file path"),
            },
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let doc: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.to_string_lossy()))?;
    let flags = flags_from_json(&doc)?;

    // program name, then the subcommand (first non-flag), then file flags
    let sub = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 2);
    let at = sub.unwrap_or(rest.len());
    rest.splice(at..at, flags);
    Ok(rest)
}

/// `{"trials": 10, "delta": [10, "inf"], "viterbi": true}` becomes
/// `--trials 10 --delta 10,inf --viterbi`.
pub fn flags_from_json(doc: &Value) -> Result<Vec<OsString>> {
    let Value::Object(map) = doc else {
        bail!("config must be a JSON object");
    };
    let mut out = Vec::new();
    for (key, value) in map {
        let flag = OsString::from(format!("--{}", key.replace('_', "-")));
        match value {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Result<Vec<String>> = items.iter().map(|v| scalar(key, v)).collect();
                out.push(flag);
                out.push(parts?.join(",").into());
            }
            v => {
                out.push(flag);
                out.push(scalar(key, v)?.into());
            }
        }
    }
    Ok(out)
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => bail!("config key {key:?}: unsupported value {v}"),
    }
}
