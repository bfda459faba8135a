//! Checkpoints: a JSON manifest next to one little-endian tensor file per
//! parameter block.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dtype, TrainConfig};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::query::ModelKind;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: TrainConfig,
    pub n_entities: usize,
    pub n_relations: usize,
    pub model_order: Vec<ModelKind>,
    pub dtype: Dtype,
    pub epoch: usize,
    #[serde(default)]
    pub metrics: serde_json::Value,
    pub blocks: Vec<BlockEntry>,
}

/// Writes `model` under `dir`. Single-precision runs store f32, which is
/// lossless because their parameters are kept on the f32 grid.
pub fn save_checkpoint(
    dir: &Path,
    model: &Model,
    config: &TrainConfig,
    epoch: usize,
    metrics: serde_json::Value,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut blocks = Vec::new();
    for b in &model.store.blocks {
        let name = b.kind.name();
        let file = format!("{name}.bin");
        let bytes: Vec<u8> = match config.dtype {
            Dtype::Single => b.data.iter().flat_map(|&x| (x as f32).to_le_bytes()).collect(),
            Dtype::Double => b.data.iter().flat_map(|&x| x.to_le_bytes()).collect(),
        };
        fs::write(dir.join(&file), bytes)?;
        blocks.push(BlockEntry { name, file, rows: b.rows, cols: b.cols });
    }
    let manifest = Manifest {
        config: config.clone(),
        n_entities: model.n_entities,
        n_relations: model.n_relations,
        model_order: model.active_models().to_vec(),
        dtype: config.dtype,
        epoch,
        metrics,
        blocks,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Model, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let width = match manifest.dtype {
        Dtype::Single => 4,
        Dtype::Double => 8,
    };
    let mut data = Vec::with_capacity(manifest.blocks.len());
    for entry in &manifest.blocks {
        let bytes = fs::read(dir.join(&entry.file))?;
        if bytes.len() != entry.rows * entry.cols * width {
            return Err(Error::Checkpoint(format!(
                "{} holds {} bytes, expected {}",
                entry.file,
                bytes.len(),
                entry.rows * entry.cols * width
            )));
        }
        let values: Vec<f64> = match manifest.dtype {
            Dtype::Single => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Dtype::Double => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        data.push(values);
    }
    let model = Model::from_blocks(
        manifest.config.model_config(),
        manifest.n_entities,
        manifest.n_relations,
        data,
    )?;
    let names: Vec<String> = model.store.blocks.iter().map(|b| b.kind.name()).collect();
    let stored: Vec<&String> = manifest.blocks.iter().map(|b| &b.name).collect();
    if names.iter().collect::<Vec<_>>() != stored {
        return Err(Error::Checkpoint(format!("block order {stored:?} does not match {names:?}")));
    }
    Ok((model, manifest))
}
