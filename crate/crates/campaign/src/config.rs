//! Service settings from an optional TOML file, then `MONOBO_*` environment
//! overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use monobo::engine::AlgoConfig;

use crate::error::{CampaignError, Result};

pub const ENV_LISTEN: &str = "MONOBO_LISTEN";
pub const ENV_DATA_DIR: &str = "MONOBO_DATA_DIR";
pub const ENV_SUGGEST_BUDGET: &str = "MONOBO_SUGGEST_BUDGET_SECS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Wall-clock allowance for one model-based suggestion.
    pub suggest_budget_secs: f64,
    /// Algorithm parameters for campaigns created without their own.
    pub defaults: AlgoConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("monobo-data"),
            suggest_budget_secs: 30.0,
            defaults: AlgoConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
    }

    /// Reads `path` if given, then applies overrides from `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CampaignError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(v) = env(ENV_LISTEN) {
            cfg.listen = v;
        }
        if let Some(v) = env(ENV_DATA_DIR) {
            cfg.data_dir = v.into();
        }
        if let Some(v) = env(ENV_SUGGEST_BUDGET) {
            cfg.suggest_budget_secs = v
                .parse()
                .map_err(|_| CampaignError::Config(format!("{ENV_SUGGEST_BUDGET}: not a number: {v}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self> {
        Self::load(path, |k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.suggest_budget_secs.is_finite() && self.suggest_budget_secs > 0.0) {
            return Err(CampaignError::Config("suggest_budget_secs must be positive".into()));
        }
        if let Some(mg) = &self.defaults.mg {
            mg.validate().map_err(|e| CampaignError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn suggest_budget(&self) -> Duration {
        Duration::from_secs_f64(self.suggest_budget_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_then_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("monobo.toml");
        std::fs::write(
            &path,
            "listen = \"0.0.0.0:9000\"\nsuggest_budget_secs = 5\n[defaults]\nnum_candidates = 64\n",
        )
        .unwrap();
        let cfg = ServiceConfig::load(Some(&path), |k| (k == ENV_DATA_DIR).then(|| "/tmp/x".to_string())).unwrap();
        assert_eq!(cfg.listen, "0.0.0.0:9000");
        assert_eq!(cfg.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.suggest_budget(), Duration::from_secs(5));
        assert_eq!(cfg.defaults.num_candidates, 64);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml("listen = 3").is_err());
        assert!(ServiceConfig::from_toml("bogus = 1").is_err());
        let r = ServiceConfig::load(None, |k| (k == ENV_SUGGEST_BUDGET).then(|| "-1".to_string()));
        assert!(matches!(r, Err(CampaignError::Config(_))));
    }
}
