//! Flat sectioned key-value configuration.
//!
//! ```text
//! # comment
//! [lattice]
//! sites = 8
//! ```
//!
//! Every key must appear in the schema of the selected subcommand, may be
//! given at most once per file, and keeps the line it came from so that
//! later type and range errors can point at it. Command-line overrides
//! replace file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;
use crate::Subcommand;

/// Keys accepted in each section.
const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["seed", "threads", "out"]),
    (
        "lattice",
        &["statistics", "sites", "up", "down", "particles", "n_max", "boundary", "hopping", "interaction"],
    ),
    ("scatter", &["theta_in", "wavelength", "angles", "method"]),
    (
        "trajectory",
        &["prior", "min", "max", "illuminated", "alternating", "kappa", "coupling", "duration", "trajectories", "logged"],
    ),
    (
        "homodyne",
        &[
            "flux",
            "phase_difference",
            "kappa",
            "coupling",
            "rotation",
            "count",
            "time",
            "weight_plus",
            "miss_probability",
            "samples",
            "duration",
            "trajectories",
            "logged",
        ],
    ),
    (
        "entropy",
        &["family", "mean", "trials", "probability", "min", "max", "coupling", "base", "count", "tau_max", "tau_points"],
    ),
    (
        "phasediagram",
        &["mu_min", "mu_max", "mu_step", "alpha_min", "alpha_max", "alpha_points", "sites", "n_max", "hopping", "route"],
    ),
];

fn sections_for(sub: Subcommand) -> &'static [&'static str] {
    match sub {
        Subcommand::Scatter => &["run", "lattice", "scatter"],
        Subcommand::Trajectory => &["run", "lattice", "trajectory"],
        Subcommand::Homodyne => &["run", "homodyne"],
        Subcommand::Entropy => &["run", "entropy"],
        Subcommand::Phasediagram => &["run", "phasediagram"],
    }
}

/// Where a value was set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line { file: String, line: usize },
    Flag(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line { file, line } => write!(f, "{file}:{line}"),
            Origin::Flag(flag) => write!(f, "{flag}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// A parsed configuration, restricted to one subcommand's schema.
#[derive(Debug, Clone)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

/// A value type that can be read from the configuration.
pub trait ConfigValue: Sized {
    const EXPECTED: &'static str;
    fn parse(text: &str) -> Option<Self>;
}

impl ConfigValue for f64 {
    const EXPECTED: &'static str = "a finite number";
    fn parse(text: &str) -> Option<Self> {
        f64::from_str(text).ok().filter(|x| x.is_finite())
    }
}

impl ConfigValue for u64 {
    const EXPECTED: &'static str = "a nonnegative integer";
    fn parse(text: &str) -> Option<Self> {
        u64::from_str(text).ok()
    }
}

impl ConfigValue for usize {
    const EXPECTED: &'static str = "a nonnegative integer";
    fn parse(text: &str) -> Option<Self> {
        usize::from_str(text).ok()
    }
}

impl ConfigValue for bool {
    const EXPECTED: &'static str = "true or false";
    fn parse(text: &str) -> Option<Self> {
        bool::from_str(text).ok()
    }
}

impl ConfigValue for String {
    const EXPECTED: &'static str = "a string";
    fn parse(text: &str) -> Option<Self> {
        Some(text.to_owned())
    }
}

impl Config {
    /// Reads `path` (if any), applies `overrides` as `(section.key, value, flag)`
    /// and checks every key against the schema of `sub`.
    pub fn load(sub: Subcommand, path: Option<&Path>, overrides: &[(String, String, String)]) -> Result<Self, CliError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                Self::parse(&text, &path.display().to_string())?
            }
            None => Self {
                sections: BTreeMap::new(),
            },
        };
        for (dotted, value, flag) in overrides {
            let (section, key) = dotted
                .split_once('.')
                .ok_or_else(|| CliError::Config(format!("{flag}: expected section.key=value, got `{dotted}`")))?;
            config.sections.entry(section.trim().to_owned()).or_default().insert(
                key.trim().to_owned(),
                Entry {
                    value: value.trim().to_owned(),
                    origin: Origin::Flag(flag.clone()),
                },
            );
        }
        config.check_schema(sub)?;
        Ok(config)
    }

    /// Parses the text of one file; duplicate keys report both lines.
    pub fn parse(text: &str, file: &str) -> Result<Self, CliError> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let origin = Origin::Line {
                file: file.to_owned(),
                line,
            };
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') || content.starts_with(';') {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| CliError::Config(format!("{origin}: malformed section header `{content}`")))?;
                sections.entry(name.to_owned()).or_default();
                current = Some(name.to_owned());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}: expected key = value, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(CliError::Config(format!("{origin}: missing key before `=`")));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| CliError::Config(format!("{origin}: key `{key}` appears before any [section]")))?;
            let table = sections.get_mut(section).expect("section registered on header");
            if let Some(previous) = table.get(key) {
                return Err(CliError::Config(format!(
                    "duplicate key {section}.{key} at {} and {origin}",
                    previous.origin
                )));
            }
            table.insert(
                key.to_owned(),
                Entry {
                    value: value.to_owned(),
                    origin,
                },
            );
        }
        Ok(Self { sections })
    }

    fn check_schema(&self, sub: Subcommand) -> Result<(), CliError> {
        let allowed = sections_for(sub);
        for (section, table) in &self.sections {
            let keys = SCHEMA
                .iter()
                .find(|(name, _)| name == section)
                .map(|(_, keys)| *keys)
                .filter(|_| allowed.contains(&section.as_str()));
            for (key, entry) in table {
                match keys {
                    None => {
                        return Err(CliError::Config(format!(
                            "{}: unknown section [{section}] for `{}` (allowed: {})",
                            entry.origin,
                            sub.name(),
                            allowed.join(", ")
                        )))
                    }
                    Some(keys) if !keys.contains(&key.as_str()) => {
                        return Err(CliError::Config(format!(
                            "{}: unknown key {section}.{key} (allowed: {})",
                            entry.origin,
                            keys.join(", ")
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|t| t.get(key))
    }

    pub fn get<T: ConfigValue>(&self, section: &str, key: &str) -> Result<Option<T>, CliError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(entry) => T::parse(&entry.value).map(Some).ok_or_else(|| {
                CliError::Config(format!(
                    "{}: {section}.{key}: expected {}, got `{}`",
                    entry.origin,
                    T::EXPECTED,
                    entry.value
                ))
            }),
        }
    }

    pub fn get_or<T: ConfigValue>(&self, section: &str, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// One of `choices`, defaulting to the first.
    pub fn choice(&self, section: &str, key: &str, choices: &[&'static str]) -> Result<&'static str, CliError> {
        match self.entry(section, key) {
            None => Ok(choices[0]),
            Some(entry) => choices.iter().copied().find(|c| *c == entry.value).ok_or_else(|| {
                CliError::Config(format!(
                    "{}: {section}.{key}: expected one of {}, got `{}`",
                    entry.origin,
                    choices.join(", "),
                    entry.value
                ))
            }),
        }
    }

    /// A located constraint error for `section.key` unless `ok`.
    pub fn ensure(&self, ok: bool, section: &str, key: &str, message: &str) -> Result<(), CliError> {
        if ok {
            return Ok(());
        }
        let location = self
            .entry(section, key)
            .map(|e| format!("{}: ", e.origin))
            .unwrap_or_default();
        Err(CliError::Config(format!("{location}{section}.{key}: {message}")))
    }

    /// Rejects keys that the chosen variant of a section does not use.
    pub fn forbid(&self, section: &str, keys: &[&str], reason: &str) -> Result<(), CliError> {
        for key in keys {
            if let Some(entry) = self.entry(section, key) {
                return Err(CliError::Config(format!(
                    "{}: {section}.{key} is not used {reason}",
                    entry.origin
                )));
            }
        }
        Ok(())
    }

    /// All values as given, for the metadata sidecar.
    pub fn inputs(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections
            .iter()
            .map(|(s, t)| (s.clone(), t.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCATTER: &str = "\
# half-filled ring
[lattice]
sites = 8
up = 4
down = 4
interaction = 10

[scatter]
angles = 181
";

    #[test]
    fn minimal_scatter_config_parses() {
        let cfg = Config::parse(SCATTER, "a.ini").unwrap();
        cfg.check_schema(Subcommand::Scatter).unwrap();
        assert_eq!(cfg.get::<usize>("lattice", "sites").unwrap().unwrap(), 8);
        assert_eq!(cfg.get::<f64>("lattice", "interaction").unwrap(), Some(10.0));
        assert_eq!(cfg.get_or("lattice", "hopping", 1.0).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_keys_report_both_lines() {
        let err = Config::parse("[lattice]\nsites = 8\n\nsites = 6\n", "dup.ini").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dup.ini:2") && msg.contains("dup.ini:4"), "{msg}");
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let cfg = Config::parse("[lattice]\nsitez = 8\n", "u.ini").unwrap();
        let msg = cfg.check_schema(Subcommand::Scatter).unwrap_err().to_string();
        assert!(msg.contains("u.ini:2") && msg.contains("sitez"), "{msg}");
        let cfg = Config::parse("[homodyne]\nflux = 1\n", "u.ini").unwrap();
        assert!(cfg.check_schema(Subcommand::Scatter).is_err());
        assert!(cfg.check_schema(Subcommand::Homodyne).is_ok());
    }

    #[test]
    fn type_errors_carry_the_line() {
        let cfg = Config::parse("[lattice]\n\nsites = eight\n", "t.ini").unwrap();
        let msg = cfg.get::<usize>("lattice", "sites").unwrap_err().to_string();
        assert!(msg.contains("t.ini:3") && msg.contains("nonnegative integer"), "{msg}");
        let cfg = Config::parse("[scatter]\nmethod = fast\n", "t.ini").unwrap();
        assert!(cfg.choice("scatter", "method", &["auto", "dense"]).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ini");
        std::fs::write(&path, SCATTER).unwrap();
        let overrides = vec![("lattice.sites".to_owned(), "6".to_owned(), "--set".to_owned())];
        let cfg = Config::load(Subcommand::Scatter, Some(&path), &overrides).unwrap();
        assert_eq!(cfg.get::<usize>("lattice", "sites").unwrap().unwrap(), 6);
        let bad = vec![("lattice.bogus".to_owned(), "1".to_owned(), "--set".to_owned())];
        let msg = Config::load(Subcommand::Scatter, Some(&path), &bad).unwrap_err().to_string();
        assert!(msg.contains("--set"), "{msg}");
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(Config::parse("sites = 8\n", "m.ini").is_err());
        assert!(Config::parse("[lattice]\nsites\n", "m.ini").is_err());
        assert!(Config::parse("[lattice\n", "m.ini").is_err());
    }
}
