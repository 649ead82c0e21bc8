use std::path::Path;

use serde::Deserialize;

use tadrefine_core::curve_refine::RefinementConfig;
use tadrefine_core::proposal_pipeline::SoftNmsConfig;
use tadrefine_core::Error;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub refine: RefinementConfig,
    pub soft_nms: SoftNmsConfig,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Unreadable {
        path: path.to_owned(),
        source,
    })?;
    let cfg: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::invalid(path)(Error::Config(e.to_string())))?;
    cfg.refine.validate().map_err(CliError::invalid(path))?;
    Ok(cfg)
}
