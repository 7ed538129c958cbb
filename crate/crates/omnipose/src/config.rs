//! TOML pipeline configuration. The documented schema with every default is
//! `configs/default.toml`, also available as [`DEFAULT_CONFIG`].

use std::fs;
use std::path::Path;

use omnipose_core::pipeline::PipelineConfig;

use crate::error::{format, io, Result};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

pub fn parse_config(text: &str) -> Result<PipelineConfig, String> {
    let cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    parse_config(&text).map_err(|m| format(path, m))
}

pub fn to_toml(cfg: &PipelineConfig) -> String {
    toml::to_string(cfg).expect("config is representable in TOML")
}
