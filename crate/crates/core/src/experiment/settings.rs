//! Flat `dotted.key = value` settings with layered overrides.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Result, SeldError};

const BASE: &str = include_str!("../../presets/base.conf");

/// Bundled presets by name.
pub const PRESETS: [(&str, &str); 5] = [
    ("ansyn-mini", include_str!("../../presets/ansyn-mini.conf")),
    ("resyn-mini", include_str!("../../presets/resyn-mini.conf")),
    ("cansyn-mini", include_str!("../../presets/cansyn-mini.conf")),
    ("ambiance-mini", include_str!("../../presets/ambiance-mini.conf")),
    ("shifted-grid", include_str!("../../presets/shifted-grid.conf")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn parse_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    /// All keys at their defaults.
    pub fn base() -> Self {
        let values = parse_lines(BASE).expect("bundled defaults parse").into_iter().collect();
        Self { values }
    }

    /// Defaults overlaid with a bundled preset.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| invalid(format!("unknown preset {name:?}; available: {}", preset_names().join(", "))))?;
        let mut s = Self::base();
        s.merge_text(text)?;
        Ok(s)
    }

    /// Defaults overlaid with a preset name or a config file. A file may
    /// start from a preset with `preset = <name>`.
    pub fn load(source: &str) -> Result<Self> {
        let path = Path::new(source);
        if !path.exists() {
            if PRESETS.iter().any(|(n, _)| *n == source) {
                return Self::preset(source);
            }
            return Err(SeldError::MissingData(format!(
                "config {source:?} is neither a file nor a preset ({})",
                preset_names().join(", ")
            )));
        }
        let text = std::fs::read_to_string(path)?;
        let lines = parse_lines(&text)?;
        let mut s = match lines.iter().find(|(k, _)| k == "preset") {
            Some((_, name)) => Self::preset(name)?,
            None => Self::base(),
        };
        for (k, v) in lines.into_iter().filter(|(k, _)| k != "preset") {
            s.set(&k, &v)?;
        }
        Ok(s)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_lines(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Replaces a known key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(invalid(format!("unknown setting {key:?}"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, item: &str) -> Result<()> {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| invalid(format!("override {item:?} is not of the form key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| invalid(format!("unknown setting {key:?}")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse().map_err(|_| invalid(format!("setting {key} = {v:?} is not valid")))
    }

    /// Comma-separated list; `none` or empty gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.get(key)?;
        if v.is_empty() || v == "none" {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|p| p.trim().parse().map_err(|_| invalid(format!("setting {key} = {v:?} is not a valid list"))))
            .collect()
    }

    /// Resolved settings, one per line in key order.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_only_touch_known_keys() {
        for name in preset_names() {
            Settings::preset(name).unwrap();
        }
    }

    #[test]
    fn overrides_replace_values() {
        let mut s = Settings::preset("ansyn-mini").unwrap();
        assert_eq!(s.get("dataset.train").unwrap(), "24");
        s.apply_override("model.seq_len=64").unwrap();
        assert_eq!(s.parse::<usize>("model.seq_len").unwrap(), 64);
        assert!(s.apply_override("model.nope=1").is_err());
        assert!(s.apply_override("missing_equals").is_err());
    }

    #[test]
    fn resolved_text_reloads_identically() {
        let s = Settings::preset("shifted-grid").unwrap();
        let mut t = Settings::base();
        t.merge_text(&s.to_text()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn lists() {
        let mut s = Settings::base();
        assert!(s.list::<f64>("dataset.snr_db").unwrap().is_empty());
        s.set("dataset.snr_db", "0, 10,20").unwrap();
        assert_eq!(s.list::<f64>("dataset.snr_db").unwrap(), vec![0.0, 10.0, 20.0]);
    }
}
