//! Plain-text `key = value` configuration.
//!
//! ```text
//! # comment
//! omega0 = 1.0e3
//! theta2 = 0.5, 0, 0          # vectors are comma separated
//! seeds  = 1.9 0.1; 1.9 -0.1  # point lists: coordinates by spaces, points by `;`
//! ```
//!
//! Consumers read the keys they understand; [`Config::finish`] then rejects
//! whatever was left over, so a misspelt key is an error rather than a
//! silently ignored setting.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::solution::{SolutionParams, Thresholds};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown keys: {0}")]
    Unknown(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    used: Cell<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: k + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line: k + 1,
                    msg: format!("bad key `{key}`"),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                used: Cell::new(false),
            };
            if entries.insert(key.to_string(), entry).is_some() {
                return Err(ConfigError::Syntax {
                    line: k + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Overrides (or adds) a key, e.g. from a command-line flag.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                used: Cell::new(false),
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Raw string value, marking the key as consumed.
    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| {
            e.used.set(true);
            e.value.as_str()
        })
    }

    fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn parse_real(key: &str, s: &str) -> Result<f64, ConfigError> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| Self::bad(key, format!("`{s}` is not a number")))?;
        if !x.is_finite() {
            return Err(Self::bad(key, "value must be finite"));
        }
        Ok(x)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.str(key).map(|s| Self::parse_real(key, s)).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.str(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Self::bad(key, format!("`{s}` is not a count"))),
        }
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.str(key)
            .map(|s| s.parse().map_err(|_| Self::bad(key, format!("`{s}` is not a count"))))
            .transpose()
    }

    /// Comma-separated reals.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.str(key)
            .map(|s| s.split(',').map(|t| Self::parse_real(key, t)).collect())
            .transpose()
    }

    /// Comma-separated vector of exactly `N` reals.
    pub fn array<const N: usize>(&self, key: &str) -> Result<Option<[f64; N]>, ConfigError> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|v: Vec<f64>| Self::bad(key, format!("expected {N} components, got {}", v.len()))),
        }
    }

    /// Points `x y; x y; …`.
    pub fn points2(&self, key: &str) -> Result<Option<Vec<[f64; 2]>>, ConfigError> {
        let Some(s) = self.str(key) else {
            return Ok(None);
        };
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let c: Vec<f64> = p
                    .split_whitespace()
                    .map(|t| Self::parse_real(key, t))
                    .collect::<Result<_, _>>()?;
                match c.as_slice() {
                    [x, y] => Ok([*x, *y]),
                    _ => Err(Self::bad(key, format!("point `{}` needs two coordinates", p.trim()))),
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Errors if any key was never read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let unused: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used.get())
            .map(|(k, _)| k.as_str())
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown(unused.join(", ")))
        }
    }
}

/// Reads the coefficients of the parametric solution.
///
/// Keys: `omega0` (required), `theta2` (required, magnitude 1/2), `p_l`,
/// `theta1`, `vartheta`, `mu_rot`, `theta3` (default zero) and optional
/// `segment_length`.
pub fn solution_params(cfg: &Config) -> Result<SolutionParams, ConfigError> {
    let p = SolutionParams {
        omega0: cfg.f64_req("omega0")?,
        p_l: cfg.f64_or("p_l", 0.0)?,
        theta1: cfg.array("theta1")?.unwrap_or([0.0; 3]),
        theta2: cfg
            .array("theta2")?
            .ok_or_else(|| ConfigError::Missing("theta2".into()))?,
        vartheta: cfg.f64_or("vartheta", 0.0)?,
        mu_rot: cfg.array("mu_rot")?.unwrap_or([0.0; 3]),
        theta3: cfg.array("theta3")?.unwrap_or([0.0; 3]),
        segment_length: cfg.f64("segment_length")?,
    };
    p.validate().map_err(|e| ConfigError::Value {
        key: "solution parameters".into(),
        msg: e.to_string(),
    })?;
    Ok(p)
}

/// Keys `threshold_rho_l`, `threshold_rho_s` (default 1e-9).
pub fn thresholds(cfg: &Config) -> Result<Thresholds, ConfigError> {
    let d = Thresholds::default();
    Ok(Thresholds {
        rho_l: cfg.f64_or("threshold_rho_l", d.rho_l)?,
        rho_s: cfg.f64_or("threshold_rho_s", d.rho_s)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_rejects_leftovers() {
        let cfg = Config::parse("# header\nomega0 = 2.5\ntheta2 = 0.5, 0, 0 # along x\nseeds = 1 2; 3 4\nbogus = 1\n")
            .unwrap();
        assert_eq!(cfg.f64("omega0").unwrap(), Some(2.5));
        assert_eq!(cfg.array::<3>("theta2").unwrap(), Some([0.5, 0.0, 0.0]));
        assert_eq!(cfg.points2("seeds").unwrap(), Some(vec![[1.0, 2.0], [3.0, 4.0]]));
        match cfg.finish() {
            Err(ConfigError::Unknown(k)) => assert_eq!(k, "bogus"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_lines_fail() {
        assert!(matches!(
            Config::parse("a = 1\na = 2"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            Config::parse("just words"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        let cfg = Config::parse("x = 1, 2").unwrap();
        assert!(cfg.array::<3>("x").is_err());
    }

    #[test]
    fn solution_params_from_text() {
        let cfg = Config::parse("omega0 = 1\np_l = 1\ntheta1 = 1,0,0\ntheta2 = 0.5,0,0").unwrap();
        let p = solution_params(&cfg).unwrap();
        cfg.finish().unwrap();
        assert_eq!(p.theta1, [1.0, 0.0, 0.0]);
        assert_eq!(p.mu_rot, [0.0; 3]);
        let bad = Config::parse("omega0 = 1\ntheta2 = 1,0,0").unwrap();
        assert!(solution_params(&bad).is_err());
    }
}
