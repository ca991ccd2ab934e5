//! Flag/config-file merging. Each subcommand reads the `[subcommand]` section of
//! the config file, falling back to top-level keys; flags win over both. Every
//! value that ends up used is recorded so the run can be echoed and replayed.

use super::CliError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;
use toml::{Table, Value};

pub struct Settings {
    section: String,
    file: Table,
    top: Table,
    resolved: Table,
}

impl Settings {
    pub fn load(section: &str, path: Option<&Path>) -> Result<Self, CliError> {
        let mut top = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?;
                text.parse::<Table>().map_err(|e| CliError::usage(format!("malformed config {}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        let file = match top.remove(section) {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(CliError::usage(format!("config: [{section}] must be a section"))),
            None => Table::new(),
        };
        top.retain(|_, v| !v.is_table());
        Ok(Self { section: section.into(), file, top, resolved: Table::new() })
    }

    fn lookup(&self, key: &str) -> Option<&Value> {
        self.file.get(key).or_else(|| self.top.get(key))
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &T) {
        if let Ok(val) = Value::try_from(v) {
            self.resolved.insert(key.into(), val);
        }
    }

    pub fn get<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.lookup(key) {
                Some(raw) => Some(
                    raw.clone()
                        .try_into::<T>()
                        .map_err(|e| CliError::usage(format!("config [{}] {key}: {e}", self.section)))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn or<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = self.get(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn require<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        self.get(key, flag)?
            .ok_or_else(|| CliError::usage(format!("missing required option --{key} (flag or [{}] {key} in config)", self.section)))
    }

    /// A list of numbers given as `a,b,c` on the command line or as an array or string in the config.
    pub fn numbers(&mut self, key: &str, flag: Option<&str>) -> Result<Option<Vec<f64>>, CliError> {
        let v = match flag {
            Some(s) => Some(parse_list(s).map_err(|e| CliError::usage(format!("--{key}: {e}")))?),
            None => match self.lookup(key) {
                Some(Value::String(s)) => Some(parse_list(s).map_err(|e| CliError::usage(format!("config {key}: {e}")))?),
                Some(raw) => Some(
                    raw.clone()
                        .try_into::<Vec<f64>>()
                        .map_err(|e| CliError::usage(format!("config [{}] {key}: {e}", self.section)))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn words(&mut self, key: &str, flag: Option<&str>) -> Result<Option<Vec<String>>, CliError> {
        let v = match flag {
            Some(s) => Some(split_words(s)),
            None => match self.lookup(key) {
                Some(Value::String(s)) => Some(split_words(s)),
                Some(raw) => Some(
                    raw.clone()
                        .try_into::<Vec<String>>()
                        .map_err(|e| CliError::usage(format!("config [{}] {key}: {e}", self.section)))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        root.insert(self.section.clone(), Value::Table(self.resolved.clone()));
        format!("# resolved configuration; rerun with --config <this file>\n{}", toml::to_string(&root).unwrap_or_default())
    }

    pub fn write_echo(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_toml()).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect()
}

fn split_words(s: &str) -> Vec<String> {
    s.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_sections_shadow_top_level() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 3\nT = 100\n[simulate]\nT = 200\ntheta = \"1,2\"\n").unwrap();
        let mut s = Settings::load("simulate", Some(&p)).unwrap();
        assert_eq!(s.require::<usize>("T", None).unwrap(), 200);
        assert_eq!(s.require::<u64>("seed", None).unwrap(), 3);
        assert_eq!(s.require::<u64>("seed", Some(9)).unwrap(), 9);
        assert_eq!(s.numbers("theta", None).unwrap().unwrap(), vec![1.0, 2.0]);
        let echo = s.to_toml();
        assert!(echo.contains("[simulate]") && echo.contains("seed = 9"));
        assert!(s.require::<String>("model", None).is_err());
    }
}
