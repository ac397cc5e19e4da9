//! Versioned JSON checkpoints. Floats are written in shortest round-trip form,
//! so a reloaded regressor reproduces predictions bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkConfig};
use super::scalers::Standardizer;
use super::train::Regressor;
use crate::error::{Error, Result};
use crate::features::ChannelSet;
use crate::model::ModelKind;

pub const CHECKPOINT_FORMAT: &str = "rqp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub channels: ChannelSet,
    pub network: NetworkConfig,
    pub scalers: Standardizer,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_regressor(reg: &Regressor, channels: ChannelSet) -> Result<Self> {
        let scalers = reg
            .scalers
            .clone()
            .ok_or_else(|| Error::Config("cannot checkpoint an untrained regressor".into()))?;
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: reg.kind,
            channels,
            network: reg.network.config().clone(),
            scalers,
            params: reg.network.params().to_vec(),
        })
    }

    pub fn into_regressor(self) -> Result<(Regressor, ChannelSet)> {
        let network = Network::with_params(self.network, self.params)?;
        if network.config().input_channels != self.channels.len() {
            return Err(Error::Schema("checkpoint channel count disagrees with its network".into()));
        }
        let mut reg = Regressor::new(network, self.kind)?;
        if self.scalers.len() != self.kind.param_count() {
            return Err(Error::Schema("checkpoint scalers disagree with its model kind".into()));
        }
        reg.scalers = Some(self.scalers);
        Ok((reg, self.channels))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Schema(format!("checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ck.format, ck.version
            )));
        }
        Ok(ck)
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
}
