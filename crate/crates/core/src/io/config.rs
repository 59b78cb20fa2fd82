use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::PopulationSpec;
use crate::assigner::AssignerConfig;
use crate::error::{Error, Result};
use crate::priors::FpnConfig;

/// Top-level JSON configuration. Unknown keys at any level are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub fpn: FpnConfig,
    pub assigner: AssignerConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationSpec>,
    pub seed: u64,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.fpn.validate()?;
        self.assigner.validate()?;
        if let Some(p) = &self.population {
            p.validate()?;
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::InvalidConfig(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json_str(&text)
    }

    /// The population to sweep, falling back to the standard one.
    pub fn population_or_default(&self) -> PopulationSpec {
        self.population.clone().unwrap_or_default()
    }
}
