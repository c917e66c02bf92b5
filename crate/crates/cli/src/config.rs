//! `key = value` configuration files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Parsed configuration file. Keys are normalized to dashes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected `key = value`",
                    i + 1
                )));
            };
            let key = normalize(key.trim());
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
            }
            if entries.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(ConfigFile { entries })
    }
}

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

/// Resolves settings with precedence flag > config file > default and
/// records the effective values for `--print-config`.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    used: Vec<String>,
    effective: Vec<(String, String)>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Resolver {
            file,
            used: Vec::new(),
            effective: Vec::new(),
        }
    }

    pub fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        let value = match self.pick_opt(key, flag)? {
            Some(v) => v,
            None => {
                self.effective.pop();
                self.effective.push((key.to_string(), default.to_string()));
                default
            }
        };
        Ok(value)
    }

    pub fn pick_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
    {
        self.used.push(key.to_string());
        let value =
            match flag {
                Some(v) => Some(v),
                None => match self.file.entries.get(key) {
                    Some((line, text)) => Some(text.parse::<T>().map_err(|_| {
                        CliError::Usage(format!("config line {line}: invalid value `{text}` for `{key}`"))
                    })?),
                    None => None,
                },
            };
        let shown = value.as_ref().map(|v| v.to_string()).unwrap_or_default();
        self.effective.push((key.to_string(), shown));
        Ok(value)
    }

    pub fn pick_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        let text = self.pick_opt(key, flag.map(|p| p.to_string_lossy().into_owned()))?;
        Ok(text.map(PathBuf::from))
    }

    /// Rejects config keys no setting consumed.
    pub fn finish(self) -> Result<Effective, CliError> {
        for (key, (line, _)) in &self.file.entries {
            if !self.used.iter().any(|u| u == key) {
                return Err(CliError::Usage(format!("config line {line}: unknown key `{key}`")));
            }
        }
        Ok(Effective(self.effective))
    }
}

/// Effective configuration, printable as a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Effective(Vec<(String, String)>);

impl Display for Effective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Comma-separated list value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let items = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<T>()
                    .map_err(|_| format!("invalid list item `{}`", p.trim()))
            })
            .collect::<Result<Vec<T>, String>>()?;
        if items.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(items))
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
