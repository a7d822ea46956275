//! `key = value` configuration files and overrides.
//!
//! Values are typed by their spelling: integers, floats and `true`/`false`
//! keep their type, anything else is a string. Nested fields use dotted
//! keys such as `collapse.window`.

use omnigan::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;

/// Ordered `(key, value)` pairs.
pub type Assignments = Vec<(String, String)>;

pub fn parse_assignments(text: &str) -> Result<Assignments> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_assignment(line).map_err(|_| {
            Error::Format(format!(
                "line {}: expected `key = value`, got {raw:?}",
                n + 1
            ))
        })?);
    }
    Ok(out)
}

pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Format(format!("expected key=value, got {s:?}")))?;
    let (k, v) = (k.trim(), v.trim().trim_matches('"'));
    if k.is_empty() {
        return Err(Error::Format(format!("empty key in {s:?}")));
    }
    Ok((k.to_string(), v.to_string()))
}

pub fn read_assignments(path: &Path) -> Result<Assignments> {
    parse_assignments(&std::fs::read_to_string(path)?)
}

fn typed(v: &str) -> toml::Value {
    if let Ok(i) = v.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = v.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = v.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(v.to_string())
    }
}

/// Applies `assignments` on top of `base`, rejecting unknown keys.
pub fn apply<T: Serialize + DeserializeOwned>(
    base: &T,
    assignments: &[(String, String)],
) -> Result<T> {
    let mut root = toml::Value::try_from(base).map_err(|e| Error::Format(e.to_string()))?;
    for (key, value) in assignments {
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("unknown configuration key {key:?}"))
                })?;
        }
        let mut v = typed(value);
        // integers are valid wherever a float is expected
        if let (toml::Value::Float(_), toml::Value::Integer(i)) = (&*slot, &v) {
            v = toml::Value::Float(*i as f64);
        }
        *slot = v;
    }
    root.try_into().map_err(|e: toml::de::Error| {
        Error::InvalidParameter(format!("invalid configuration: {}", e.message()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use omnigan::trainer::{TrainConfig, Variant};

    #[test]
    fn file_then_override() {
        let text = "# toy run\nvariant = projection\nlr_d = 1\n\ncollapse.window = 6  # longer\n";
        let mut a = parse_assignments(text).unwrap();
        a.push(parse_assignment("variant=omni").unwrap());
        let cfg = apply(&TrainConfig::default(), &a).unwrap();
        assert_eq!(cfg.variant, Variant::Omni);
        assert_eq!(cfg.lr_d, 1.0);
        assert_eq!(cfg.collapse.window, 6);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let cfg = TrainConfig::default();
        assert!(apply(&cfg, &[("nope".into(), "1".into())]).is_err());
        assert!(apply(&cfg, &[("variant".into(), "bogus".into())]).is_err());
        assert!(parse_assignments("just words").is_err());
    }
}
