//! Trained-policy files: network parameters plus everything needed to check
//! that a loading domain lays out states and actions the same way.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dqn::DqnAgent;
use super::network::QNetwork;
use super::TrainerConfig;
use crate::dst::{ActionSpace, AgentAction, FeatureLayout};
use crate::error::{Error, Result};
use crate::schema::DomainSchema;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub layout: FeatureLayout,
    pub actions: Vec<AgentAction>,
    pub max_turn: u32,
    pub kb_len: usize,
    pub config: TrainerConfig,
    pub network: QNetwork,
}

impl Checkpoint {
    pub fn from_agent(agent: &DqnAgent, schema: &DomainSchema, max_turn: u32, kb_len: usize, config: &TrainerConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            layout: FeatureLayout::new(schema),
            actions: agent.actions().actions().to_vec(),
            max_turn,
            kb_len,
            config: config.clone(),
            network: agent.network().clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        if ckpt.network.input_dim() != ckpt.layout.dim() || ckpt.network.output_dim() != ckpt.actions.len() {
            return Err(Error::Checkpoint("network shape disagrees with layout".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks the stored layout and action list against `schema`.
    pub fn check_compatible(&self, schema: &DomainSchema) -> Result<()> {
        if self.layout != FeatureLayout::new(schema) {
            return Err(Error::Checkpoint("state layout differs from the loaded schema".into()));
        }
        if self.actions != ActionSpace::new(schema).actions() {
            return Err(Error::Checkpoint("action space differs from the loaded schema".into()));
        }
        Ok(())
    }

    /// Rebuilds a greedy agent over `schema`.
    pub fn into_agent(self, schema: Arc<DomainSchema>, kb_len: usize) -> Result<DqnAgent> {
        self.check_compatible(&schema)?;
        let mut agent = DqnAgent::with_network(&self.config, schema, self.max_turn, kb_len, self.network)?;
        agent.set_greedy(true);
        Ok(agent)
    }
}
