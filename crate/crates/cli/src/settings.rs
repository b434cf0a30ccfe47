//! Flag, config-file and default resolution.
//!
//! Every setting is looked up in that order: an explicit flag wins over a
//! `key=value` line of the `--config` file, which wins over the built-in
//! default. The effective values are remembered in order so they can be
//! echoed into output headers.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use neurocomm::paramfile::Manifest;

use crate::error::{config_err, CliError, CliResult};

#[derive(Debug, Default)]
pub struct Settings {
    file: Manifest,
    effective: Vec<(String, String)>,
    consulted: Vec<String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("--config {}: {e}", p.display())))?;
                Manifest::parse(&text)?
            }
            None => Manifest::default(),
        };
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        self.consulted.push(key.to_string());
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("--{key}: invalid value {raw:?} in config file"))),
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.consulted.push(key.to_string());
        self.effective.push((key.to_string(), value));
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    /// A setting without a default; "none" in the config file means unset.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None if self.file.get(key) == Some("none") => {
                self.consulted.push(key.to_string());
                None
            }
            None => self.from_file(key)?,
        };
        self.record(key, v.as_ref().map_or("none".into(), |v| v.to_string()));
        Ok(v)
    }

    pub fn list<T: FromStr + Display>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> CliResult<Vec<T>> {
        self.consulted.push(key.to_string());
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                None => default,
                Some(raw) => raw
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CliError::Config(format!("--{key}: invalid list {raw:?} in config file")))?,
            },
        };
        let rendered: Vec<String> = v.iter().map(T::to_string).collect();
        self.record(key, rendered.join(","));
        Ok(v)
    }

    /// A required path; output paths are not echoed into headers so that
    /// the same run written to two places gives identical bytes.
    pub fn path(&mut self, key: &str, flag: Option<std::path::PathBuf>, echo: bool) -> CliResult<std::path::PathBuf> {
        self.consulted.push(key.to_string());
        let p = match flag {
            Some(p) => p,
            None => match self.file.get(key) {
                Some(raw) => raw.into(),
                None => return config_err(format!("--{key} is required")),
            },
        };
        if echo {
            self.record(key, p.display().to_string());
        }
        Ok(p)
    }

    /// Fails on config-file keys that no setting looked up.
    pub fn check_unused(&self) -> CliResult<()> {
        match self.file.0.keys().find(|k| !self.consulted.contains(k)) {
            Some(key) => config_err(format!("unknown config key {key:?}")),
            None => Ok(()),
        }
    }

    /// `# neurocomm <command> key=value ...` provenance line.
    pub fn header(&self, command: &str) -> String {
        let mut line = format!("# neurocomm {command}");
        for (k, v) in &self.effective {
            line.push_str(&format!(" {k}={v}"));
        }
        line
    }
}

/// Requires `value` in `[0, 1]`, naming the flag otherwise.
pub fn probability(key: &str, value: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        config_err(format!("--{key} must lie in [0, 1], got {value}"))
    }
}

pub fn positive(key: &str, value: usize) -> CliResult<usize> {
    if value > 0 {
        Ok(value)
    } else {
        config_err(format!("--{key} must be positive"))
    }
}
