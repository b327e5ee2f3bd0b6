//! TOML experiment configuration. One file describes the whole pipeline —
//! data source, view geometry, transmission system, presentations,
//! decision model, sweep grids, and the digital reference chain — and
//! every experiment driver reads from it, so a configuration plus a master
//! seed pins an entire result file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::source::ViewSplit;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Monte Carlo replicates per sweep point (the CSV `seed` column).
    #[serde(default = "default_monte_carlo_runs")]
    pub monte_carlo_runs: u64,
    /// Fraction of the dataset that becomes the training split.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Cap on the evaluation-set size (default: the whole validation
    /// split).
    #[serde(default)]
    pub eval_samples: Option<usize>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub views: ViewsConfig,
    pub sinfony: SinfonyConfig,
    #[serde(rename = "presentation")]
    pub presentations: Vec<PresentationConfig>,
    #[serde(default)]
    pub gcm: GcmConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub digital: DigitalConfig,
}

fn default_monte_carlo_runs() -> u64 {
    10
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Gaussian class clusters along the first feature axis.
    Gaussian { num_classes: usize, dim: usize, separation: f64, num_samples: usize },
    /// Synthetic 28x28 images, one intensity-bump position per class.
    Images {
        num_classes: usize,
        num_samples: usize,
        #[serde(default = "default_noise_sigma")]
        noise_sigma: f64,
    },
    /// IDX-format image and label files.
    Idx { images_path: PathBuf, labels_path: PathBuf },
}

fn default_noise_sigma() -> f64 {
    0.1
}

/// How samples split into per-agent views. Either `count` equal contiguous
/// slices, or explicit `dims` that must cover the sample exactly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewsConfig {
    #[serde(default = "default_view_count")]
    pub count: usize,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
}

fn default_view_count() -> usize {
    1
}

impl Default for ViewsConfig {
    fn default() -> Self {
        ViewsConfig { count: 1, dims: None }
    }
}

impl ViewsConfig {
    pub fn build(&self, total_dim: usize) -> Result<ViewSplit> {
        match &self.dims {
            Some(dims) => {
                let split = ViewSplit::new(dims.clone())?;
                if split.total_dim() != total_dim {
                    return Err(Error::InvalidArgument(format!(
                        "view dims cover {} features but samples have {total_dim}",
                        split.total_dim()
                    )));
                }
                Ok(split)
            }
            None => ViewSplit::equal(self.count, total_dim),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinfonyConfig {
    pub encoder_hidden: usize,
    pub n_tx: usize,
    pub decoder_hidden: usize,
    #[serde(default = "default_sinfony_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_sinfony_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Training draws one snr per minibatch, uniform over this range (dB).
    #[serde(default = "default_snr_low")]
    pub snr_low_db: f64,
    #[serde(default = "default_snr_high")]
    pub snr_high_db: f64,
}

fn default_sinfony_lr() -> f64 {
    1e-3
}

fn default_sinfony_epochs() -> usize {
    10
}

fn default_batch_size() -> usize {
    64
}

fn default_snr_low() -> f64 {
    -4.0
}

fn default_snr_high() -> f64 {
    6.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PresentationConfig {
    /// Hand the decision model the decoded class posterior.
    Categorical,
    /// Hand it the `count` most important penultimate decoder features.
    Features { count: usize },
}

impl PresentationConfig {
    /// The CSV `presentation` column value.
    pub fn name(&self) -> String {
        match self {
            PresentationConfig::Categorical => "categorical".into(),
            PresentationConfig::Features { count } => format!("features{count}"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcmConfig {
    /// Knowledge-base size for experiments that do not sweep it.
    pub exemplars: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for GcmConfig {
    fn default() -> Self {
        GcmConfig { exemplars: 100, learning_rate: 1.0, epochs: 1, batch_size: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Channel-quality grid for the snr sweep and the learned side of the
    /// baseline comparison (dB).
    pub snr_grid_db: Vec<f64>,
    /// Operating point for every fixed-snr experiment (dB).
    pub eval_snr_db: f64,
    pub knowledge_sizes: Vec<usize>,
    /// Attention capacities; values above a presentation's feature count
    /// behave as full capacity.
    pub capacities: Vec<usize>,
    pub alternations: usize,
    pub alternation_learning_rate: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            snr_grid_db: vec![-20.0, -10.0, -4.0, 0.0, 6.0, 20.0],
            eval_snr_db: 20.0,
            knowledge_sizes: vec![10, 100, 1000],
            capacities: vec![0, 1, 2, 3, 4, 6, 8, 10],
            alternations: 20,
            alternation_learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigitalConfig {
    pub bits_per_pixel: u8,
    /// Channel-quality grid for the digital chain (dB); finer than the
    /// learned grid so the cliff is resolved.
    pub snr_grid_db: Vec<f64>,
    pub classifier_hidden: usize,
    pub classifier_learning_rate: f64,
    pub classifier_epochs: usize,
    pub classifier_batch_size: usize,
}

impl Default for DigitalConfig {
    fn default() -> Self {
        DigitalConfig {
            bits_per_pixel: 4,
            snr_grid_db: (-10..=10).step_by(2).map(f64::from).collect(),
            classifier_hidden: 32,
            classifier_learning_rate: 0.05,
            classifier_epochs: 20,
            classifier_batch_size: 64,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("bad configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.monte_carlo_runs == 0 {
            return Err(Error::InvalidArgument("monte_carlo_runs must be >= 1".into()));
        }
        if self.presentations.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one [[presentation]] is required".into(),
            ));
        }
        if let Some(0) = self.eval_samples {
            return Err(Error::InvalidArgument("eval_samples must be >= 1".into()));
        }
        if self.sweep.snr_grid_db.is_empty()
            || self.sweep.knowledge_sizes.is_empty()
            || self.sweep.capacities.is_empty()
        {
            return Err(Error::InvalidArgument("sweep grids cannot be empty".into()));
        }
        if self.digital.snr_grid_db.is_empty() {
            return Err(Error::InvalidArgument("digital snr grid cannot be empty".into()));
        }
        Ok(())
    }
}
