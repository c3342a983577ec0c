//! Plain-text run configuration: one `key = value` per line, `#` comments,
//! section headers in brackets. Unknown sections and unknown keys are hard
//! errors that name the offender and its line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

/// Configuration / usage error; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

const KNOWN_SECTIONS: [&str; 6] = [
    "general",
    "topo-curve",
    "ib-frontier",
    "adapt-sim",
    "glvm-train",
    "glvm-eval",
];

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    /// section -> key -> (value, line number)
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl RawConfig {
    pub fn load(path: &Path) -> ConfigResult<RawConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> ConfigResult<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, (String, usize)>> = BTreeMap::new();
        // Keys before any header land in [general].
        let mut current = "general".to_string();
        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {lineno}: unterminated section header")))?
                    .trim()
                    .to_string();
                if !KNOWN_SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError(format!(
                        "line {lineno}: unknown section `[{name}]` (known: {})",
                        KNOWN_SECTIONS.join(", ")
                    )));
                }
                current = name;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {lineno}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError(format!("line {lineno}: empty key")));
            }
            let section = sections.entry(current.clone()).or_default();
            if let Some((_, prev)) = section.get(&key) {
                return Err(ConfigError(format!(
                    "line {lineno}: key `{key}` already set on line {prev}"
                )));
            }
            section.insert(key, (value, lineno));
        }
        Ok(RawConfig { sections })
    }

    /// Typed reader over one section. Every key the command understands must
    /// be pulled through the reader; `finish()` then rejects leftovers.
    pub fn section(&self, name: &str) -> SectionReader<'_> {
        SectionReader {
            name: name.to_string(),
            entries: self.sections.get(name),
            used: BTreeSet::new(),
        }
    }
}

pub struct SectionReader<'a> {
    name: String,
    entries: Option<&'a BTreeMap<String, (String, usize)>>,
    used: BTreeSet<String>,
}

impl<'a> SectionReader<'a> {
    pub fn get_str(&mut self, key: &str) -> Option<&'a str> {
        self.used.insert(key.to_string());
        self.entries
            .and_then(|m| m.get(key))
            .map(|(v, _)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> ConfigResult<Option<T>> {
        let line = self
            .entries
            .and_then(|m| m.get(key))
            .map(|(_, l)| *l)
            .unwrap_or(0);
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => s.parse::<T>().map(Some).map_err(|_| {
                ConfigError(format!(
                    "line {line}: key `{key}` in [{}] is not a valid {what}: `{s}`",
                    self.name
                ))
            }),
        }
    }

    pub fn get_f64(&mut self, key: &str) -> ConfigResult<Option<f64>> {
        self.parse(key, "number")
    }

    pub fn get_usize(&mut self, key: &str) -> ConfigResult<Option<usize>> {
        self.parse(key, "integer")
    }

    pub fn get_u64(&mut self, key: &str) -> ConfigResult<Option<u64>> {
        self.parse(key, "integer")
    }

    pub fn get_bool(&mut self, key: &str) -> ConfigResult<Option<bool>> {
        self.parse(key, "boolean (true/false)")
    }

    pub fn get_f64_list(&mut self, key: &str) -> ConfigResult<Option<Vec<f64>>> {
        let line = self
            .entries
            .and_then(|m| m.get(key))
            .map(|(_, l)| *l)
            .unwrap_or(0);
        let name = self.name.clone();
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map(Some)
                .map_err(|_| {
                    ConfigError(format!(
                        "line {line}: key `{key}` in [{name}] is not a comma-separated number list: `{s}`"
                    ))
                }),
        }
    }

    pub fn get_usize_list(&mut self, key: &str) -> ConfigResult<Option<Vec<usize>>> {
        let line = self
            .entries
            .and_then(|m| m.get(key))
            .map(|(_, l)| *l)
            .unwrap_or(0);
        let name = self.name.clone();
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<usize>, _>>()
                .map(Some)
                .map_err(|_| {
                    ConfigError(format!(
                        "line {line}: key `{key}` in [{name}] is not a comma-separated integer list: `{s}`"
                    ))
                }),
        }
    }

    /// Fails on any key in the section that the command did not consume.
    pub fn finish(self) -> ConfigResult<()> {
        if let Some(entries) = self.entries {
            for (key, (_, line)) in entries {
                if !self.used.contains(key) {
                    return Err(ConfigError(format!(
                        "line {line}: unknown key `{key}` in section [{}]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}
