//! JSON checkpoints: model parameters by name, optimizer moments, schedule
//! position, and the training history. The architecture hash is verified on
//! load so a checkpoint cannot be silently applied to a different model.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{JamlocError, Result};
use crate::models::{AutoencoderSpec, DannModel};
use crate::nn::optim::Adam;
use crate::training::phases::{EpochRecord, Phase, TrainingState};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schema_version: u32,
    pub spec_hash: String,
    pub phase: Phase,
    pub epoch: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub spec: AutoencoderSpec,
    pub params: std::collections::BTreeMap<String, Vec<f64>>,
    pub opt: Adam,
    pub frozen: BTreeSet<String>,
    pub history: Vec<EpochRecord>,
}

pub fn save_checkpoint(
    path: &Path,
    state: &mut TrainingState,
    metric: Option<f64>,
) -> Result<()> {
    let ckpt = Checkpoint {
        meta: CheckpointMeta {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            spec_hash: state.model.ae.spec.hash(),
            phase: state.phase,
            epoch: state.epoch,
            seed: state.seed,
            metric,
        },
        spec: state.model.ae.spec.clone(),
        params: state.model.params_map(),
        opt: state.opt.clone(),
        frozen: state.model.frozen.clone(),
        history: state.history.clone(),
    };
    let json = serde_json::to_string(&ckpt)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainingState> {
    let raw = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&raw)
        .map_err(|e| JamlocError::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    if ckpt.meta.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(JamlocError::Checkpoint(format!(
            "unsupported checkpoint schema {}",
            ckpt.meta.schema_version
        )));
    }
    if ckpt.meta.spec_hash != ckpt.spec.hash() {
        return Err(JamlocError::Checkpoint(
            "architecture hash does not match the stored spec".into(),
        ));
    }
    let mut model = DannModel::new(ckpt.meta.seed, ckpt.spec)?;
    model.load_params_map(&ckpt.params)?;
    model.frozen = ckpt.frozen;
    Ok(TrainingState {
        model,
        opt: ckpt.opt,
        phase: ckpt.meta.phase,
        epoch: ckpt.meta.epoch,
        seed: ckpt.meta.seed,
        history: ckpt.history,
    })
}
