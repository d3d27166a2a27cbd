//! Config-file expansion. A config is a JSON object keyed by subcommand
//! name; each entry maps flag names (without dashes) to values:
//!
//! ```json
//! { "train-attr": { "epochs": 50, "ensemble": 3 }, "extract": { "stem": true } }
//! ```
//!
//! The entries of the running subcommand are spliced in as flags right after
//! the subcommand name, so anything given on the command line overrides them.

use serde_json::Value;

use crate::Failure;

pub fn expand(args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(sub) = args.iter().position(|a| !a.starts_with('-')) else {
        return Ok(args);
    };
    let Some(path) = config_path(&args[sub + 1..])? else {
        return Ok(args);
    };
    let text =
        std::fs::read(&path).map_err(|e| Failure::Data(format!("config file {path}: {e}")))?;
    let spliced = flags_for(&text, &args[sub])?;
    let mut out = args[..=sub].to_vec();
    out.extend(spliced);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn config_path(args: &[String]) -> Result<Option<String>, Failure> {
    let mut found = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            let v = it
                .next()
                .ok_or_else(|| Failure::Usage("--config needs a value".into()))?;
            found = Some(v.clone());
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(v.to_string());
        }
    }
    Ok(found)
}

pub fn flags_for(text: &[u8], subcommand: &str) -> Result<Vec<String>, Failure> {
    let bad = |msg: String| Failure::Data(format!("config file: {msg}"));
    let root: Value = serde_json::from_slice(text).map_err(|e| bad(e.to_string()))?;
    let root = root
        .as_object()
        .ok_or_else(|| bad("top level must be an object".into()))?;
    let Some(section) = root.get(subcommand) else {
        return Ok(Vec::new());
    };
    let section = section
        .as_object()
        .ok_or_else(|| bad(format!("section {subcommand:?} must be an object")))?;
    let mut flags = Vec::new();
    for (key, value) in section {
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
        {
            return Err(bad(format!("{key:?} is not a flag name")));
        }
        if key == "config" {
            return Err(bad("a config file cannot name another config".into()));
        }
        let flag = format!("--{key}");
        match value {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => flags.extend([flag, n.to_string()]),
            Value::String(s) => flags.extend([flag, s.clone()]),
            Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        _ => Err(bad(format!("{key}: list items must be numbers or strings"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                flags.extend([flag, parts.join(",")]);
            }
            Value::Object(_) => return Err(bad(format!("{key}: nested objects are not flags"))),
        }
    }
    Ok(flags)
}
