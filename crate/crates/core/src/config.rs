//! Line-oriented `key = value` configuration files and the precedence rules
//! between command-line flags, config values and profile defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::asm::{Airlight, Interval, SceneKind, SceneProfile};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// later keys override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", n + 1)))?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(Error::invalid(format!("config line {}: empty key", n + 1)));
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Config { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::invalid(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

/// Parses `r,g,b` into an airlight.
pub fn parse_airlight(s: &str) -> Result<Airlight> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let values: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("airlight '{s}' is not a number list")))?;
    match values.as_slice() {
        [v] => Airlight::gray(*v),
        [r, g, b] => Airlight::new([*r, *g, *b]),
        _ => Err(Error::invalid(format!("airlight '{s}' needs 1 or 3 values"))),
    }
}

/// Sampling-range overrides; `None` falls through to the next source.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProfileOverrides {
    pub kind: Option<SceneKind>,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub delta_beta_min: Option<f64>,
    pub delta_beta_max: Option<f64>,
}

impl ProfileOverrides {
    pub fn from_config(config: &Config) -> Result<Self> {
        Ok(ProfileOverrides {
            kind: config.get("profile")?,
            beta_min: config.get("beta-min")?,
            beta_max: config.get("beta-max")?,
            a_min: config.get("a-min")?,
            a_max: config.get("a-max")?,
            delta_beta_min: config.get("delta-beta-min")?,
            delta_beta_max: config.get("delta-beta-max")?,
        })
    }

    /// Field-wise `self` if set, else `fallback`.
    pub fn or(self, fallback: ProfileOverrides) -> Self {
        ProfileOverrides {
            kind: self.kind.or(fallback.kind),
            beta_min: self.beta_min.or(fallback.beta_min),
            beta_max: self.beta_max.or(fallback.beta_max),
            a_min: self.a_min.or(fallback.a_min),
            a_max: self.a_max.or(fallback.a_max),
            delta_beta_min: self.delta_beta_min.or(fallback.delta_beta_min),
            delta_beta_max: self.delta_beta_max.or(fallback.delta_beta_max),
        }
    }

    /// Starts from the built-in profile for `kind` (indoor if unset) and
    /// applies every set bound.
    pub fn resolve(&self) -> Result<SceneProfile> {
        let base = SceneProfile::for_kind(self.kind.unwrap_or(SceneKind::Indoor));
        let pick = |r: Interval, lo: Option<f64>, hi: Option<f64>| {
            Interval::new(lo.unwrap_or(r.min), hi.unwrap_or(r.max))
        };
        let profile = SceneProfile {
            kind: base.kind,
            airlight: pick(base.airlight, self.a_min, self.a_max),
            beta: pick(base.beta, self.beta_min, self.beta_max),
            delta_beta: pick(base.delta_beta, self.delta_beta_min, self.delta_beta_max),
        };
        profile.validate()?;
        Ok(profile)
    }
}
