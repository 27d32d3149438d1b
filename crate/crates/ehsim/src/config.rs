//! Scenario documents and `key=value` overrides.
//!
//! Overrides address the fully expanded document, so fields left at their
//! defaults in the file can still be set; a path that names no existing field
//! is an error.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use ehsim_core::ScenarioConfig;
use serde_json::Value;

use crate::error::{Error, Result};

/// One `--set a.b.0.c=value` assignment. The value is read as JSON when it
/// parses, otherwise as a bare string (`sleep_time=auto`).
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: Value,
}

impl FromStr for Override {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, raw) = s.split_once('=').ok_or_else(|| Error::Override {
            key: s.to_owned(),
            reason: "expected KEY=VALUE".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Override {
                key: s.to_owned(),
                reason: "empty key".into(),
            });
        }
        Ok(Override {
            key: key.to_owned(),
            value: parse_value(raw.trim()),
        })
    }
}

pub(crate) fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

impl std::fmt::Display for Override {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.value {
            Value::String(s) => write!(f, "{}={}", self.key, s),
            v => write!(f, "{}={}", self.key, v),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(Error::file(path))?;
    parse_config(&text)
}

fn slot<'a>(doc: &'a mut Value, key: &str) -> Result<&'a mut Value> {
    let err = |reason: String| Error::Override {
        key: key.to_owned(),
        reason,
    };
    let mut node = doc;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map
                .get_mut(part)
                .ok_or_else(|| err(format!("no field `{part}`")))?,
            Value::Array(items) => {
                let len = items.len();
                let idx: usize = part
                    .parse()
                    .map_err(|_| err(format!("`{part}` is not a list index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| err(format!("index {idx} out of range (length {len})")))?
            }
            _ => return Err(err(format!("`{part}` goes below a scalar"))),
        };
    }
    Ok(node)
}

pub fn apply_overrides(cfg: &ScenarioConfig, overrides: &[Override]) -> Result<ScenarioConfig> {
    if overrides.is_empty() {
        return Ok(cfg.clone());
    }
    let mut doc = serde_json::to_value(cfg)?;
    for o in overrides {
        *slot(&mut doc, &o.key)? = o.value.clone();
    }
    let cfg: ScenarioConfig = serde_json::from_value(doc).map_err(|e| Error::Override {
        key: overrides
            .iter()
            .map(|o| o.key.as_str())
            .collect::<Vec<_>>()
            .join(", "),
        reason: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ehsim_core::presets::scenario_preset;
    use ehsim_core::SleepTime;

    fn base() -> ScenarioConfig {
        scenario_preset("node-700lx").unwrap()
    }

    #[test]
    fn sets_nested_and_indexed_fields() {
        let o: Vec<Override> = ["illumination.segments.0.lux=600", "sleep_time=auto", "circuit.w_pm=1.2"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let cfg = apply_overrides(&base(), &o).unwrap();
        assert_eq!(cfg.illumination.segments[0].lux, 600.0);
        assert_eq!(cfg.sleep_time, SleepTime::Auto);
        assert_eq!(cfg.circuit.w_pm, 1.2);
    }

    #[test]
    fn defaulted_fields_are_addressable() {
        let o: Override = "options.seed=9".parse().unwrap();
        assert_eq!(apply_overrides(&base(), &[o]).unwrap().options.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in ["circuit.nope=1", "illumination.segments.5.lux=1", "initial_voltage.x=1"] {
            let o: Override = bad.parse().unwrap();
            assert!(matches!(apply_overrides(&base(), &[o]), Err(Error::Override { .. })), "{bad}");
        }
        assert!("no_equals".parse::<Override>().is_err());
    }

    #[test]
    fn type_errors_and_invalid_values_are_rejected() {
        let o: Override = "circuit.capacitance=big".parse().unwrap();
        assert!(apply_overrides(&base(), &[o]).is_err());
        let o: Override = "circuit.capacitance=-1".parse().unwrap();
        assert!(matches!(apply_overrides(&base(), &[o]), Err(Error::Model(_))));
    }

    #[test]
    fn documents_round_trip() {
        let text = serde_json::to_string_pretty(&base()).unwrap();
        assert_eq!(parse_config(&text).unwrap(), base());
        let extra = text.replacen('{', "{\"bogus\": 1,", 1);
        assert!(parse_config(&extra).is_err());
    }
}
