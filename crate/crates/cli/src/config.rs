//! Flat `key = value` config files plus the flag-override resolution the
//! commands share. Flags always win over file values; file values win
//! over built-in defaults.

use crate::CliError;
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {}: expected `key = value`, got {line:?}",
                    number + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }
}

/// flag value, else file value, else default
pub fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    Ok(flag
        .or(cfg.get_parsed::<T>(key)?)
        .unwrap_or(default))
}

/// flag value, else file value, else None
pub fn resolve_opt<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<Option<T>, CliError> {
    Ok(flag.or(cfg.get_parsed::<T>(key)?))
}

/// flag value, else file value, else a usage error naming the key
pub fn require<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<T, CliError> {
    resolve_opt(flag, cfg, key)?
        .ok_or_else(|| CliError::Usage(format!("missing required setting `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_lines_with_comments() {
        let cfg = ConfigFile::parse("# run settings\nseed = 7\nobjective = piecewise\n").unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.get_parsed::<u64>("seed").unwrap(), Some(7));
        assert_eq!(cfg.get("objective"), Some("piecewise"));
        assert_eq!(cfg.get("missing"), None);
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(ConfigFile::parse("just some words\n").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let cfg = ConfigFile::parse("seed = 7\n").unwrap();
        assert_eq!(resolve(Some(9u64), &cfg, "seed", 0).unwrap(), 9);
        assert_eq!(resolve(None, &cfg, "seed", 0).unwrap(), 7);
        assert_eq!(resolve::<u64>(None, &cfg, "other", 3).unwrap(), 3);
    }

    #[test]
    fn bad_typed_value_is_a_usage_error() {
        let cfg = ConfigFile::parse("seed = notanumber\n").unwrap();
        assert!(matches!(
            resolve::<u64>(None, &cfg, "seed", 0),
            Err(CliError::Usage(_))
        ));
    }
}
