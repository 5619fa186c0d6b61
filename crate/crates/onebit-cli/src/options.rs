//! Option merging and string parsing for the binary.
//!
//! Every value option can come from a command-line flag or from a TOML
//! config file (`--config`); flags win. Config values may be TOML strings,
//! numbers, or booleans; list-valued options use comma separation either
//! way (for example `flip = "0.05,0.15"`).

use std::collections::BTreeMap;
use std::path::Path;

use onebit_core::data::MatrixType;
use onebit_core::{Error, Result};

use crate::protocol::SolverChoice;

/// Key/value pairs loaded from a config file.
#[derive(Debug, Default)]
pub struct OptionSource {
    values: BTreeMap<String, String>,
}

impl OptionSource {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let rendered = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(Error::Invalid(format!(
                        "config key '{key}' has unsupported type {}",
                        other.type_str()
                    )));
                }
            };
            values.insert(key, rendered);
        }
        Ok(OptionSource { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag value if present, else the config-file value.
pub fn pick(flag: &Option<String>, src: &OptionSource, key: &str) -> Option<String> {
    flag.clone().or_else(|| src.get(key).map(str::to_string))
}

fn invalid(key: &str, raw: &str, what: &str) -> Error {
    Error::Invalid(format!("option '{key}': cannot parse '{raw}' as {what}"))
}

pub fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse()
        .map_err(|_| invalid(key, raw, "a number"))
}

pub fn parse_usize(key: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse()
        .map_err(|_| invalid(key, raw, "an unsigned integer"))
}

pub fn parse_u64(key: &str, raw: &str) -> Result<u64> {
    raw.trim()
        .parse()
        .map_err(|_| invalid(key, raw, "an unsigned integer"))
}

fn split_list(raw: &str) -> Vec<&str> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    split_list(raw)
        .into_iter()
        .map(|s| parse_f64(key, s))
        .collect()
}

pub fn parse_usize_list(key: &str, raw: &str) -> Result<Vec<usize>> {
    split_list(raw)
        .into_iter()
        .map(|s| parse_usize(key, s))
        .collect()
}

pub fn parse_matrix_types(key: &str, raw: &str) -> Result<Vec<MatrixType>> {
    split_list(raw)
        .into_iter()
        .map(|s| match s {
            "1" => Ok(MatrixType::TypeI),
            "2" => Ok(MatrixType::TypeII),
            other => Err(invalid(key, other, "a matrix type (1 or 2)")),
        })
        .collect()
}

pub fn parse_solvers(raw: &str) -> Result<Vec<SolverChoice>> {
    let list = split_list(raw);
    if list.is_empty() {
        return Err(Error::Invalid("solver list is empty".into()));
    }
    list.into_iter().map(SolverChoice::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_lists() {
        assert_eq!(parse_f64_list("flip", "0.05, 0.15").unwrap(), vec![0.05, 0.15]);
        assert_eq!(parse_usize_list("m", "800").unwrap(), vec![800]);
        assert!(parse_f64_list("mu", "0.3,zebra").is_err());
        assert_eq!(
            parse_matrix_types("matrix-type", "1,2").unwrap(),
            vec![MatrixType::TypeI, MatrixType::TypeII]
        );
        assert!(parse_matrix_types("matrix-type", "3").is_err());
        assert!(parse_solvers("").is_err());
        assert_eq!(parse_solvers("znorm,mcp").unwrap().len(), 2);
    }

    #[test]
    fn config_file_and_flag_precedence() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "mu = 0.5\ntrials = 7\nsolver = \"scad\"").unwrap();
        let src = OptionSource::load(Some(file.path())).unwrap();
        assert_eq!(src.get("mu"), Some("0.5"));
        assert_eq!(src.get("trials"), Some("7"));

        let flag = Some("0.1".to_string());
        assert_eq!(pick(&flag, &src, "mu").unwrap(), "0.1");
        assert_eq!(pick(&None, &src, "mu").unwrap(), "0.5");
        assert_eq!(pick(&None, &src, "absent"), None);
    }

    #[test]
    fn config_rejects_tables() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "[section]\nkey = 1").unwrap();
        assert!(OptionSource::load(Some(file.path())).is_err());
    }
}
