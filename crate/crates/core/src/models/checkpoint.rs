//! Classifier checkpoints: JSON container with a mandatory version field,
//! architecture config, standardizer, schema, and all parameter tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::classifier::TrainedClassifier;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    classifier: TrainedClassifier,
}

pub fn save_classifier(path: &Path, model: &TrainedClassifier) -> Result<()> {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        classifier: model.clone(),
    };
    let json = serde_json::to_string(&ckpt).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_classifier(path: &Path) -> Result<TrainedClassifier> {
    let bytes = std::fs::read(path)?;
    let ckpt: Checkpoint =
        serde_json::from_slice(&bytes).map_err(|e| Error::Serde(e.to_string()))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    Ok(ckpt.classifier)
}
