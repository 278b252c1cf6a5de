//! `key = value` service configuration.
//!
//! Keys: `port`, `log`, `max_level`, `model` (repeatable), `critical.<repository>`
//! (comma-separated concept, predicate or meta names) and repeatable `grant` / `revoke`
//! lines in the model-language form without the leading keyword.

use std::path::PathBuf;

use thiserror::Error;

use crate::dsl::{parse_statement, Statement};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    pub port: Option<u16>,
    pub log: Option<PathBuf>,
    pub max_level: Option<u32>,
    pub models: Vec<PathBuf>,
    pub critical: Vec<(String, Vec<String>)>,
    /// Grant and revoke statements, in file order.
    pub matrix: Vec<Statement>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ConfigError { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "port" => cfg.port = Some(value.parse().map_err(|_| err(format!("bad port `{value}`")))?),
                "log" => cfg.log = Some(PathBuf::from(value)),
                "max_level" => cfg.max_level = Some(value.parse().map_err(|_| err(format!("bad level `{value}`")))?),
                "model" => cfg.models.push(PathBuf::from(value)),
                "grant" | "revoke" => {
                    let stmt = parse_statement(&format!("{key} {value}")).map_err(|e| err(e.message))?;
                    cfg.matrix.push(stmt);
                }
                k => match k.strip_prefix("critical.") {
                    Some(repo) if !repo.is_empty() => {
                        let names: Vec<String> =
                            value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                        cfg.critical.push((repo.to_string(), names));
                    }
                    _ => return Err(err(format!("unknown key `{k}`"))),
                },
            }
        }
        Ok(cfg)
    }
}
