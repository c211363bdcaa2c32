//! Run configuration: one TOML file holding the network plan, the optimiser
//! settings, patch extraction and the paths a run reads and writes.
//!
//! ```toml
//! seed = 0
//!
//! [network]
//! layers = 11
//! bands = 4
//! hidden_channels = 64
//! filter_size = 7
//! relu_before_skip = true
//!
//! [train]
//! epochs = 300
//! batch_size = 64
//! lr_body = 0.05
//! lr_last = 0.005
//! momentum = 0.95
//! decay = 0.5
//! decay_period = 60
//! loss = "mean"
//!
//! [data]
//! patch = 32
//! stride = 16
//! normalize = 1.0
//! q_window = 32
//!
//! [paths]
//! manifest = "simulated/manifest.toml"
//! output_dir = "run"
//! ```
//!
//! Every key is optional; missing keys take the defaults above. `seed` drives
//! initialisation, patch order and the per-epoch shuffle.

use std::path::{Path, PathBuf};

use drpnn_core::metrics::DEFAULT_Q_WINDOW;
use drpnn_core::model::{DEFAULT_FILTER_SIZE, DEFAULT_HIDDEN_CHANNELS, DEFAULT_LAYERS};
use drpnn_core::{NetworkSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub layers: usize,
    pub bands: usize,
    pub hidden_channels: usize,
    /// Square filter side used by every layer.
    pub filter_size: usize,
    pub relu_before_skip: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            layers: DEFAULT_LAYERS,
            bands: 4,
            hidden_channels: DEFAULT_HIDDEN_CHANNELS,
            filter_size: DEFAULT_FILTER_SIZE,
            relu_before_skip: true,
        }
    }
}

impl NetworkSection {
    pub fn spec(&self) -> NetworkSpec {
        let mut spec = NetworkSpec::uniform(self.layers, self.bands, self.hidden_channels, self.filter_size);
        spec.relu_before_skip = self.relu_before_skip;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Side of the square training patches, in PAN pixels.
    pub patch: usize,
    pub stride: usize,
    /// Every tensor is divided by this before use and fused output is
    /// multiplied back, so integer-valued sensor data can be trained on as-is.
    pub normalize: f64,
    pub q_window: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            patch: 32,
            stride: 16,
            normalize: 1.0,
            q_window: DEFAULT_Q_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Manifest of simulated scenes (with references).
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Final checkpoint; defaults to `<output_dir>/model.drpn`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            manifest: PathBuf::from("simulated/manifest.toml"),
            output_dir: PathBuf::from("run"),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub paths: PathsSection,
}

/// [`TrainConfig`] minus the seed, which lives at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_body: f64,
    pub lr_last: f64,
    pub momentum: f64,
    pub decay: f64,
    pub decay_period: usize,
    pub loss: drpnn_core::LossNorm,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr_body: d.lr_body,
            lr_last: d.lr_last,
            momentum: d.momentum,
            decay: d.decay,
            decay_period: d.decay_period,
            loss: d.loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// Published hyper-parameters: 11 layers, 7×7, 64 channels, 300 epochs, batch 64.
    Paper,
    /// Small network and short schedule that trains in minutes on one CPU core.
    Desk,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::profile(Profile::Paper)
    }
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => RunConfig {
                seed: 0,
                network: NetworkSection::default(),
                train: TrainSection::default(),
                data: DataSection::default(),
                paths: PathsSection::default(),
            },
            // Small enough to train on one core in a few minutes. The ReLU on
            // the (S+1)-channel layer is off: with it that layer dies early
            // and starves the body of gradient.
            Profile::Desk => RunConfig {
                seed: 0,
                network: NetworkSection {
                    layers: 5,
                    hidden_channels: 16,
                    filter_size: 3,
                    relu_before_skip: false,
                    ..NetworkSection::default()
                },
                train: TrainSection {
                    epochs: 300,
                    batch_size: 2,
                    lr_body: 0.02,
                    lr_last: 0.06,
                    decay_period: 75,
                    ..TrainSection::default()
                },
                data: DataSection {
                    patch: 32,
                    stride: 16,
                    ..DataSection::default()
                },
                paths: PathsSection::default(),
            },
        }
    }

    pub fn spec(&self) -> NetworkSpec {
        self.network.spec()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr_body: t.lr_body,
            lr_last: t.lr_last,
            momentum: t.momentum,
            decay: t.decay,
            decay_period: t.decay_period,
            seed: self.seed,
            loss: t.loss,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("model.drpn"))
    }

    pub fn validate(&self) -> drpnn_core::Result<()> {
        self.spec().validate()?;
        self.train_config().validate()?;
        let d = &self.data;
        if d.patch == 0 || d.stride == 0 {
            return Err(drpnn_core::Error::Config("data.patch and data.stride must be positive".into()));
        }
        if !(d.normalize.is_finite() && d.normalize > 0.0) {
            return Err(drpnn_core::Error::Config(format!("data.normalize must be positive, got {}", d.normalize)));
        }
        if d.q_window < 2 {
            return Err(drpnn_core::Error::Config("data.q_window must be at least 2".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    /// Reads and validates a config. Relative paths inside it are taken
    /// relative to the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = RunConfig::parse(&text).map_err(|reason| CliError::Config {
            path: path.to_path_buf(),
            reason,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.paths.manifest);
        rebase(&mut config.paths.output_dir);
        if let Some(c) = config.paths.checkpoint.as_mut() {
            rebase(c);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }
}
