//! Experiment configuration: one JSON object of experiment keys, with the
//! model hyperparameters under `model` (the same object `gridsearch` writes),
//! grid overrides under `grid` and synthetic-data settings under `synth`.
//! Every key is optional and command-line flags override file values.
//!
//! ```json
//! {
//!   "data": ["view1.csv", "view2.csv"],
//!   "labels": "labels.csv",
//!   "target_label": 1,
//!   "model": { "method": "subspace", "d": 2, "kernelized": true },
//!   "grid": { "d": [1, 2, 3], "sigma": [1, 10] },
//!   "folds": 5,
//!   "inner_folds": 10,
//!   "seed": 7,
//!   "normalize": false,
//!   "selection": "nested",
//!   "synth": { "n_target": 60, "n_outlier": 60, "dims": [3, 3], "separation": 6 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use mssvdd::datamodel::load_dataset;
use mssvdd::eval::{GridSpec, SelectionMode};
use mssvdd::{MultiModalDataset, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io, json, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_target: usize,
    pub n_outlier: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_target: 60,
            n_outlier: 60,
            dims: vec![3, 3],
            separation: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One feature CSV per modality, rows are samples.
    pub data: Vec<PathBuf>,
    /// Label CSV with one 0/1 value per sample.
    pub labels: Option<PathBuf>,
    /// Which label value marks the target class; 0 swaps the classes.
    pub target_label: u8,
    pub model: TrainConfig,
    /// Grid overrides; unspecified axes keep their defaults.
    pub grid: Option<GridSpec>,
    pub folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub normalize: bool,
    pub selection: SelectionMode,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: Vec::new(),
            labels: None,
            target_label: 1,
            model: TrainConfig::default(),
            grid: None,
            folds: 5,
            inner_folds: 10,
            seed: 0,
            normalize: false,
            selection: SelectionMode::Nested,
            synth: SynthConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| json(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.data = cfg.data.iter().map(|p| base.join(p)).collect();
        cfg.labels = cfg.labels.map(|p| base.join(p));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_label > 1 {
            return Err(CliError::Config(format!(
                "target_label must be 0 or 1, got {}",
                self.target_label
            )));
        }
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(CliError::Config("fold counts must be at least 2".into()));
        }
        for p in self.data.iter().chain(self.labels.as_ref()) {
            if !p.is_file() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Loads the dataset with labels oriented so that target = 1.
    pub fn dataset(&self) -> Result<MultiModalDataset> {
        if self.data.is_empty() {
            return Err(CliError::Config("no data files given".into()));
        }
        self.validate()?;
        let data = load_dataset(&self.data, self.labels.as_deref())?;
        Ok(if self.target_label == 0 {
            data.with_flipped_labels()
        } else {
            data
        })
    }

    /// The configured grid, or the defaults matching the model's modality count.
    pub fn grid_for(&self, n_modalities: usize) -> GridSpec {
        match &self.grid {
            Some(g) => g.clone(),
            None if self.model.effective_modalities(n_modalities) == 1 => GridSpec::uni_modal(),
            None => GridSpec::default(),
        }
    }
}

/// Reads a bare `TrainConfig` JSON, such as the one `gridsearch` writes.
pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| json(path, e))
}
