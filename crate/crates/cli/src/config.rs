//! Optional JSON config file mirroring the command-line flags, plus the seed
//! fanout that derives each stage's generator seed from one global `--seed`.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Stage offsets added to the global seed, so one knob reproduces the whole
/// pipeline while stages stay decorrelated.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Synth = 0,
    Split = 1,
    Train = 2,
    Augment = 3,
    HeadInit = 4,
}

pub fn stage_seed(global: u64, stage: Stage) -> u64 {
    global.wrapping_add(stage as u64)
}

/// Every field is optional; command-line flags take precedence over the file,
/// the file over built-in defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub split_fraction: Option<f64>,
    pub subject_disjoint: Option<bool>,
    pub image_size: Option<usize>,

    pub augment: Option<bool>,
    pub augment_domains: Option<String>,
    pub rotation_max_deg: Option<f64>,
    pub hflip_prob: Option<f64>,
    pub brightness_jitter: Option<f64>,
    pub contrast_jitter: Option<f64>,
    pub affine_translate_frac: Option<f64>,
    pub affine_scale_min: Option<f64>,
    pub affine_scale_max: Option<f64>,
    pub affine_shear_max_deg: Option<f64>,

    pub alpha: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub shuffle: Option<bool>,
    pub distance: Option<String>,
    pub hidden_dim: Option<usize>,
    pub identity_init: Option<bool>,
    pub normalize_output: Option<bool>,

    pub k_max: Option<usize>,

    pub num_subjects: Option<usize>,
    pub latent_dim: Option<usize>,
    pub feature_dim: Option<usize>,
    pub noise_sigma: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage("Io", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage("Parse", format!("{}: {e}", path.display())))
    }
}

/// flag > config file > default
pub fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Switch flags can only turn a setting on; the file supplies the rest.
pub fn pick_switch(flag: bool, file: Option<bool>, default: bool) -> bool {
    if flag {
        true
    } else {
        file.unwrap_or(default)
    }
}
