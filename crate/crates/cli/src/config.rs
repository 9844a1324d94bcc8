use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toponet_core::embedding::{EpsRule, DEFAULT_NEIGHBORS};
use toponet_core::{Hyperparams, LayerSpec, NetworkSpec, Shape, ShapeSpec};

/// A validation failure pinned to the offending config field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsomapConfig {
    pub k: usize,
    pub target_dim: usize,
    /// Clouds larger than this are thinned to an evenly strided subsample.
    pub max_points: usize,
}

impl Default for IsomapConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_NEIGHBORS,
            target_dim: 3,
            max_points: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentsConfig {
    pub class: usize,
    #[serde(default)]
    pub eps: EpsRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub moves: bool,
    pub separation: bool,
    pub witness_injection: bool,
    pub isomap: Option<IsomapConfig>,
    pub components: Option<ComponentsConfig>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            moves: true,
            separation: true,
            witness_injection: false,
            isomap: None,
            components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: ShapeSpec,
    pub network: NetworkConfig,
    #[serde(default)]
    pub training: Hyperparams,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::new("", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            layers: self.network.layers.clone(),
        }
    }

    /// Sets both the dataset and the training seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.training.seed = seed;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::new("name", "must not be empty"));
        }
        self.dataset
            .validate()
            .map_err(|e| ConfigError::new("dataset", e.to_string()))?;
        let layers = &self.network.layers;
        if layers.is_empty() {
            return Err(ConfigError::new("network.layers", "at least one layer is required"));
        }
        let ambient = self.dataset.shape.ambient_dim();
        if layers[0].in_dim != ambient {
            return Err(ConfigError::new(
                "network.layers[0].in",
                format!("is {} but the dataset lives in dimension {ambient}", layers[0].in_dim),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(ConfigError::new(
                    format!("network.layers[{}].in", i + 1),
                    format!(
                        "is {} but layers[{i}].out is {}",
                        pair[1].in_dim, pair[0].out_dim
                    ),
                ));
            }
        }
        self.network_spec()
            .validate()
            .map_err(|e| ConfigError::new("network.layers", e.to_string()))?;
        if !self.network_spec().is_softmax_classifier() {
            return Err(ConfigError::new(
                "network.layers",
                "hidden layers must be relu and the last layer softmax",
            ));
        }
        let classes = self.dataset.shape.num_classes();
        let out = layers[layers.len() - 1].out_dim;
        if out != classes {
            return Err(ConfigError::new(
                format!("network.layers[{}].out", layers.len() - 1),
                format!("is {out} but the dataset has {classes} classes"),
            ));
        }
        self.training
            .validate()
            .map_err(|e| ConfigError::new("training", e.to_string()))?;
        if self.training.epochs == 0 {
            return Err(ConfigError::new("training.epochs", "must be positive"));
        }
        if self.analysis.witness_injection {
            if layers[0].out_dim >= layers[0].in_dim {
                return Err(ConfigError::new(
                    "analysis.witness_injection",
                    format!(
                        "needs a first layer that reduces dimension, got {} -> {}",
                        layers[0].in_dim, layers[0].out_dim
                    ),
                ));
            }
            if !matches!(self.dataset.shape, Shape::BallShell { .. }) {
                return Err(ConfigError::new(
                    "analysis.witness_injection",
                    "needs a ball_shell dataset",
                ));
            }
        }
        if let Some(iso) = &self.analysis.isomap {
            if iso.k == 0 {
                return Err(ConfigError::new("analysis.isomap.k", "must be positive"));
            }
            if iso.target_dim == 0 {
                return Err(ConfigError::new("analysis.isomap.target_dim", "must be positive"));
            }
            if iso.max_points <= iso.k {
                return Err(ConfigError::new("analysis.isomap.max_points", "must exceed k"));
            }
        }
        if let Some(c) = &self.analysis.components {
            if c.class >= classes {
                return Err(ConfigError::new(
                    "analysis.components.class",
                    format!("is {} but the dataset has {classes} classes", c.class),
                ));
            }
            c.eps
                .validate()
                .map_err(|e| ConfigError::new("analysis.components.eps", e.to_string()))?;
        }
        Ok(())
    }
}
