use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Model;
use crate::compute::ParamStore;
use crate::data::Vocabularies;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "cakgcn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Config echo, vocabularies and parameters in one JSON document. Floats
/// round-trip exactly, so a reloaded model predicts bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    /// Free-form run metadata (training config echo, epoch, seed).
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub vocab: Vocabularies,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn new(model: &Model, meta: BTreeMap<String, String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            meta,
            vocab: model.vocab().clone(),
            params: model.params().clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let h: Header =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        if h.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format `{}`)", h.format)));
        }
        if h.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (this build reads {CHECKPOINT_VERSION})",
                h.version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn into_model(self) -> Result<Model> {
        Model::from_parts(self.config, self.vocab, self.params)
    }
}
