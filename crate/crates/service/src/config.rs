use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tutorloop_core::gateway::{GatewayConfig, MockScript};
use tutorloop_core::irt::io::ParamsDocument;
use tutorloop_core::item_bank::ItemBank;
use tutorloop_core::orchestrator::{JourneyContext, OrchestratorConfig};
use tutorloop_core::prompt::{PromptEngine, PromptOptions};

pub const ENV_LISTEN: &str = "TUTORLOOP_LISTEN";
pub const ENV_DATA_DIR: &str = "TUTORLOOP_DATA_DIR";

/// Scripted tutor used when no other script is configured.
pub const DEMO_MOCK_SCRIPT: &str = include_str!("../assets/demo_mock_script.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Bank document; the bundled bank when absent.
    pub bank: Option<PathBuf>,
    /// Calibrated parameters applied on top of the bank.
    pub params: Option<PathBuf>,
    /// Directory with editable prompt templates.
    pub templates: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    pub token_ttl_hours: i64,
    pub gateway: GatewayConfig,
    pub orchestrator: OrchestratorConfig,
    pub prompt: PromptOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("tutorloop-data"),
            bank: None,
            params: None,
            templates: None,
            mock_script: None,
            token_ttl_hours: 24,
            gateway: GatewayConfig::default(),
            orchestrator: OrchestratorConfig::default(),
            prompt: PromptOptions::default(),
        }
    }
}

impl ServiceConfig {
    /// Reads a TOML file (if given) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut config: ServiceConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ServiceConfig::default(),
        };
        if let Ok(listen) = std::env::var(ENV_LISTEN) {
            config.listen = listen;
        }
        if let Ok(dir) = std::env::var(ENV_DATA_DIR) {
            config.data_dir = dir.into();
        }
        config.gateway = config.gateway.with_env_overrides();
        Ok(config)
    }

    pub fn load_bank(&self) -> anyhow::Result<ItemBank> {
        load_bank(self.bank.as_deref(), self.params.as_deref())
    }

    pub fn journey_context(&self) -> anyhow::Result<JourneyContext> {
        let engine = match &self.templates {
            Some(dir) => PromptEngine::from_dir(dir, self.prompt)?,
            None => {
                let mut e = PromptEngine::default();
                e.options = self.prompt;
                e
            }
        };
        Ok(JourneyContext {
            bank: self.load_bank()?,
            engine,
            config: self.orchestrator,
        })
    }

    pub fn mock_script(&self) -> anyhow::Result<MockScript> {
        let text = match &self.mock_script {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => DEMO_MOCK_SCRIPT.to_string(),
        };
        Ok(MockScript::load(&text)?)
    }
}

pub fn load_bank(bank: Option<&Path>, params: Option<&Path>) -> anyhow::Result<ItemBank> {
    let mut bank = match bank {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ItemBank::load(&text).with_context(|| format!("loading bank {}", p.display()))?
        }
        None => ItemBank::bundled(),
    };
    if let Some(p) = params {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        bank.apply_params(&ParamsDocument::from_json(&text)?);
    }
    Ok(bank)
}
