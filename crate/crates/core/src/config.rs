//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output = "runs/blobs"
//!
//! [dataset]
//! path = "blobs.csv"        # relative to the config file
//! format = "csv"            # or "images"
//!
//! [synth]                   # optional; used by `fscil synth`
//! classes = 18
//! dim = 16
//! per_class = 200
//! spread = 0.6
//!
//! [protocol]
//! base_classes = 10
//! steps = 4
//! ways = 2
//! shots = 5
//!
//! [train]
//! epochs = 12
//! learning_rate = 0.05
//!
//! [flags]
//! loss = "angular"          # or "ce"
//! class_aug = true
//! two_view = true
//! projection = true
//! balance = true
//! ```
//!
//! Every omitted key takes its default; [`RunConfig::to_toml`] writes the
//! resolved values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::ViewTransformSpec;
use crate::data::{DatasetFormat, SynthConfig};
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::model::{ModelConfig, ProjectionConfig, TrainConfig};
use crate::protocol::{BasePrototypes, ProtocolSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DatasetFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub base_classes: usize,
    pub steps: usize,
    pub ways: usize,
    pub shots: usize,
    pub shuffle_classes: bool,
    pub test_fraction: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            base_classes: 10,
            steps: 4,
            ways: 2,
            shots: 5,
            shuffle_classes: false,
            test_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub scale: f64,
    pub margin: f64,
    pub mix_fraction: f64,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub projection_hidden: usize,
    pub projection_output: usize,
    pub views: ViewTransformSpec,
}

impl Default for TrainSection {
    fn default() -> Self {
        let loss = LossConfig::default();
        Self {
            epochs: 12,
            batch_size: 64,
            learning_rate: 0.05,
            momentum: 0.9,
            scale: loss.scale,
            margin: loss.margin,
            mix_fraction: 0.5,
            hidden: vec![64],
            embedding_dim: 32,
            projection_hidden: 128,
            projection_output: 32,
            views: ViewTransformSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Angular,
    /// Cosine cross-entropy with unit scale and no margin.
    Ce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub loss: LossKind,
    pub class_aug: bool,
    pub two_view: bool,
    pub projection: bool,
    pub balance: bool,
    /// Base exemplars per class; must equal `protocol.shots` unless
    /// `allow_k_override` is set.
    pub k_balanced: Option<usize>,
    pub allow_k_override: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            loss: LossKind::Angular,
            class_aug: true,
            two_view: true,
            projection: true,
            balance: true,
            k_balanced: None,
            allow_k_override: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub dataset: DatasetSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub flags: Flags,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            seed: 0,
            output: default_output(),
            dataset: DatasetSection {
                path: dataset.into(),
                format: DatasetFormat::Csv,
            },
            synth: None,
            protocol: ProtocolSection::default(),
            train: TrainSection::default(),
            flags: Flags::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string().replace('\n', " ")))
    }

    /// Reads a config file; a relative dataset path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn protocol_spec(&self) -> ProtocolSpec {
        let p = &self.protocol;
        ProtocolSpec {
            base_classes: p.base_classes,
            steps: p.steps,
            ways: p.ways,
            shots: p.shots,
            seed: self.seed,
            shuffle_classes: p.shuffle_classes,
            test_fraction: p.test_fraction,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        match self.flags.loss {
            LossKind::Angular => LossConfig {
                scale: self.train.scale,
                margin: self.train.margin,
            },
            LossKind::Ce => LossConfig::cross_entropy(),
        }
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        let t = &self.train;
        ModelConfig {
            input_dim,
            hidden: t.hidden.clone(),
            embedding_dim: t.embedding_dim,
            projection: self.flags.projection.then_some(ProjectionConfig {
                hidden: t.projection_hidden,
                output: t.projection_output,
            }),
        }
    }

    pub fn train_config(&self, input_dim: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            loss: self.loss_config(),
            class_aug: self.flags.class_aug,
            mix_fraction: t.mix_fraction,
            two_view: self.flags.two_view,
            views: t.views,
            model: self.model_config(input_dim),
            seed: self.seed,
        }
    }

    pub fn base_prototypes(&self) -> BasePrototypes {
        if self.flags.balance {
            BasePrototypes::Balanced {
                k: self.flags.k_balanced.unwrap_or(self.protocol.shots),
            }
        } else {
            BasePrototypes::Full
        }
    }

    /// Checks flag combinations and numeric ranges that do not depend on data.
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.flags.k_balanced {
            if k != self.protocol.shots && !self.flags.allow_k_override {
                return Err(Error::InvalidConfig(format!(
                    "k_balanced = {k} differs from shots = {}; set allow_k_override to use it",
                    self.protocol.shots
                )));
            }
            if k == 0 {
                return Err(Error::InvalidConfig("k_balanced must be at least 1".into()));
            }
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        self.train_config(1).validate()
    }

    pub fn check_paths(&self) -> Result<()> {
        if !self.dataset.path.exists() {
            return Err(Error::io(&self.dataset.path, "dataset not found"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_toml("[dataset]\npath = \"d.csv\"\n").unwrap();
        assert_eq!(cfg.protocol, ProtocolSection::default());
        assert_eq!(cfg.flags, Flags::default());
        assert_eq!(cfg.loss_config(), LossConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn effective_config_round_trips() {
        let mut cfg = RunConfig::new("d.csv");
        cfg.flags.loss = LossKind::Ce;
        cfg.synth = Some(SynthConfig { classes: 4, dim: 3, per_class: 10, spread: 0.2, seed: 1 });
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn k_override_is_gated() {
        let mut cfg = RunConfig::new("d.csv");
        cfg.flags.k_balanced = Some(3);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.flags.allow_k_override = true;
        cfg.validate().unwrap();
        assert_eq!(cfg.base_prototypes(), BasePrototypes::Balanced { k: 3 });
        cfg.flags.balance = false;
        assert_eq!(cfg.base_prototypes(), BasePrototypes::Full);
    }

    #[test]
    fn flags_shape_the_training_config() {
        let mut cfg = RunConfig::new("d.csv");
        cfg.flags.loss = LossKind::Ce;
        cfg.flags.projection = false;
        let t = cfg.train_config(16);
        assert_eq!(t.loss, LossConfig::cross_entropy());
        assert!(t.model.projection.is_none());
        assert_eq!(t.model.input_dim, 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[dataset]\npath = \"d\"\n[flags]\nbogus = 1\n").is_err());
        let bad_views = "[dataset]\npath = \"d\"\n[train.views]\nkind = \"image\"\nflip_prob = 2.0\ngrayscale_prob = 0.0\n";
        let cfg = RunConfig::from_toml(bad_views).unwrap();
        assert!(cfg.validate().is_err());
    }
}
