//! Line-oriented `key = value` configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Keys accepted in each section. The empty section holds top-level keys.
const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["seed", "output_dir"]),
    (
        "target",
        &["name", "dim", "diag", "b", "l0", "width", "lambda", "mean"],
    ),
    (
        "assumption",
        &[
            "regime",
            "beta",
            "kl_init",
            "w2_init",
            "c_lsi",
            "c_pi",
            "chi2_init",
        ],
    ),
    ("plan", &["delta", "metric", "mode"]),
    ("sample", &["x0", "steps", "record_stride", "closed_form"]),
    (
        "rgo",
        &["y", "zeta", "eta", "n_samples", "max_proposals", "bins"],
    ),
    (
        "conc",
        &[
            "eta",
            "epsilon",
            "n_samples",
            "center",
            "quantiles",
            "r_values",
            "variant",
            "s_offset",
            "rate_scale",
        ],
    ),
    ("benchmark", &["chains", "budget", "langevin_eta", "x0"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed configuration. Values stay as text until a command asks for them.
#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<(String, String), Entry>,
    digest: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return err(Some(n), format!("malformed section header `{line}`"));
                };
                let name = name.trim();
                if name.is_empty() || !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return err(Some(n), format!("unknown section [{name}]"));
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(Some(n), format!("expected `key = value`, got `{line}`"));
            };
            let key = key.trim();
            let value = value.trim();
            let allowed = SCHEMA.iter().find(|(s, _)| *s == section).unwrap().1;
            if !allowed.contains(&key) {
                let place = if section.is_empty() {
                    "at top level".to_string()
                } else {
                    format!("in [{section}]")
                };
                return err(Some(n), format!("unknown key `{key}` {place}"));
            }
            if value.is_empty() {
                return err(Some(n), format!("empty value for `{key}`"));
            }
            let k = (section.clone(), key.to_string());
            if let Some(prev) = entries.get(&k) {
                let prev: &Entry = prev;
                return err(
                    Some(n),
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                );
            }
            entries.insert(
                k,
                Entry {
                    value: value.to_string(),
                    line: n,
                },
            );
        }
        let digest = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Config { entries, digest })
    }

    /// SHA-256 of the raw configuration text, hex encoded.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn describe(section: &str, key: &str) -> String {
        if section.is_empty() {
            format!("`{key}`")
        } else {
            format!("`{key}` in [{section}]")
        }
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).or_else(|_| {
                err(
                    Some(e.line),
                    format!(
                        "cannot parse {} from `{}`",
                        Self::describe(section, key),
                        e.value
                    ),
                )
            }),
        }
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError> {
        self.get(section, key)?.map_or_else(
            || err(None, format!("missing {}", Self::describe(section, key))),
            Ok,
        )
    }

    pub fn get_or<T: FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|v| {
                v.trim().parse().or_else(|_| {
                    err(
                        Some(e.line),
                        format!(
                            "cannot parse list item `{}` of {}",
                            v.trim(),
                            Self::describe(section, key)
                        ),
                    )
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Wraps a validation failure with the line of the offending key.
    pub fn invalid<T>(
        &self,
        section: &str,
        key: &str,
        message: impl Into<String>,
    ) -> Result<T, ConfigError> {
        err(self.entry(section, key).map(|e| e.line), message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_lists() {
        let c =
            Config::parse("seed = 3 # root\n\n[target]\nname = huber\ndiag = 1, 2.5\n").unwrap();
        assert_eq!(c.require::<u64>("", "seed").unwrap(), 3);
        assert_eq!(c.require::<String>("target", "name").unwrap(), "huber");
        assert_eq!(
            c.get_list::<f64>("target", "diag").unwrap(),
            Some(vec![1.0, 2.5])
        );
        assert_eq!(c.get::<f64>("target", "width").unwrap(), None);
        assert_eq!(c.digest().len(), 64);
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = Config::parse("[plan]\ndelta = 0.1\nstep = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("step"));
    }

    #[test]
    fn unknown_section_and_malformed_lines() {
        assert_eq!(Config::parse("[nope]\n").unwrap_err().line, Some(1));
        assert_eq!(Config::parse("seed 3\n").unwrap_err().line, Some(1));
        assert_eq!(Config::parse("[plan\n").unwrap_err().line, Some(1));
        assert_eq!(
            Config::parse("seed = 1\nseed = 2\n").unwrap_err().line,
            Some(2)
        );
    }

    #[test]
    fn bad_value_reports_line() {
        let c = Config::parse("\n[plan]\ndelta = abc\n").unwrap();
        assert_eq!(c.get::<f64>("plan", "delta").unwrap_err().line, Some(3));
    }

    #[test]
    fn digest_tracks_content() {
        let a = Config::parse("seed = 1\n").unwrap();
        let b = Config::parse("seed = 2\n").unwrap();
        assert_ne!(a.digest(), b.digest());
    }
}
