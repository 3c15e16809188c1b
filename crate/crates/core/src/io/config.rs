//! `key=value` configuration files with dotted section prefixes.

use std::path::Path;

use super::atomic::read_text;
use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, SetError};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CODEDCAM_CONFIG";

/// Parses config text on top of the defaults. Unknown keys are collected and
/// reported together; values are validated after all lines are applied.
pub fn parse_config_str(text: &str) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    let mut unknown = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Syntax {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            });
        };
        let key = key.trim();
        match config.set(key, value) {
            Ok(()) => {}
            Err(SetError::UnknownKey) => unknown.push(key.to_string()),
            Err(SetError::BadValue(message)) => {
                return Err(Error::Syntax {
                    line: i + 1,
                    message: format!("{key}: {message}"),
                })
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<PipelineConfig> {
    parse_config_str(&read_text(path)?)
}

/// Applies command-line `section.key=value` overrides, then revalidates.
pub fn apply_overrides(config: &mut PipelineConfig, overrides: &[(String, String)]) -> Result<()> {
    let mut unknown = Vec::new();
    for (key, value) in overrides {
        match config.set(key, value) {
            Ok(()) => {}
            Err(SetError::UnknownKey) => unknown.push(key.clone()),
            Err(SetError::BadValue(message)) => {
                return Err(Error::InvalidArgument(format!("--{key}: {message}")))
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    config.validate()
}
