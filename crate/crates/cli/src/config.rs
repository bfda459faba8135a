//! Run configuration files: a flat JSON object holding every training
//! field plus the dataset and output locations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geokge_core::training::TrainConfig;
use serde_json::{Map, Value};

pub const DATA_DIR_ENV: &str = "GEOKGE_DATA_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub train: TrainConfig,
    /// Directory of the config file, for resolving relative paths.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Unknown keys are rejected by the strict training-field schema.
    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(mut map) = value else { bail!("config must be a JSON object") };
        let dataset = take_path(&mut map, "dataset")?;
        let output_dir = take_path(&mut map, "output_dir")?;
        let train: TrainConfig = serde_json::from_value(Value::Object(map))?;
        train.validate()?;
        Ok(Self { dataset, output_dir, train, base_dir })
    }

    /// Tries the path as given, then relative to the config file, then
    /// under `$GEOKGE_DATA_DIR`.
    pub fn resolve_dataset(&self, data_dir: Option<&Path>) -> Result<PathBuf> {
        let Some(ds) = &self.dataset else { bail!("no dataset given in the config or on the command line") };
        resolve_dataset(ds, &self.base_dir, data_dir)
    }
}

pub fn resolve_dataset(ds: &Path, base_dir: &Path, data_dir: Option<&Path>) -> Result<PathBuf> {
    let mut tried = vec![ds.to_path_buf()];
    if ds.is_dir() {
        return Ok(ds.to_path_buf());
    }
    if ds.is_relative() {
        let local = base_dir.join(ds);
        if local.is_dir() {
            return Ok(local);
        }
        tried.push(local);
        if let Some(root) = data_dir {
            let env = root.join(ds);
            if env.is_dir() {
                return Ok(env);
            }
            tried.push(env);
        }
    }
    bail!(
        "dataset directory not found (tried {}); set {DATA_DIR_ENV} to the folder holding it",
        tried.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
    )
}

fn take_path(map: &mut Map<String, Value>, key: &str) -> Result<Option<PathBuf>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
        Some(other) => bail!("`{key}` must be a string, found {other}"),
    }
}
