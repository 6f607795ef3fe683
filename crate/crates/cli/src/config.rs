use std::path::Path;

use serde::{Deserialize, Serialize};

use mimic_core::matcher::CostConfig;
use mimic_core::partition::PartitionConfig;
use mimic_core::tnet::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GraphMatch,
    NandArray,
}

impl Method {
    /// Accuracy a run must reach unless a threshold is configured.
    pub fn default_threshold(self) -> f64 {
        match self {
            Method::GraphMatch => 100.0,
            Method::NandArray => 90.0,
        }
    }
}

/// Everything a run depends on besides its two input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub method: Method,
    pub k_partitions: usize,
    /// Its `k` and `seed` are overridden per run.
    pub partition: PartitionConfig,
    pub cost: CostConfig,
    /// Its `seed` is overridden per piece.
    pub train: TrainConfig,
    /// Root of every random stream in the run.
    pub seed: u64,
    /// Percent; `None` uses the method default.
    pub accuracy_threshold: Option<f64>,
    /// Random vectors per accuracy check above 20 inputs.
    pub samples: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::GraphMatch,
            k_partitions: 10,
            partition: PartitionConfig::default(),
            cost: CostConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
            accuracy_threshold: None,
            samples: mimic_core::eval::DEFAULT_SAMPLES,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn threshold(&self) -> f64 {
        self.accuracy_threshold.unwrap_or_else(|| self.method.default_threshold())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k_partitions == 0 {
            return Err(CliError::Input("k_partitions must be at least 1".into()));
        }
        if let Some(t) = self.accuracy_threshold {
            if !(0.0..=100.0).contains(&t) {
                return Err(CliError::Input("accuracy_threshold must lie in [0, 100]".into()));
            }
        }
        if self.samples == 0 {
            return Err(CliError::Input("samples must be positive".into()));
        }
        self.cost.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

/// Seed of stream `index` of `stage`, derived from `root`.
pub fn split_seed(root: u64, stage: &str, index: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in stage.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root ^ h.rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_documents_fill_defaults() {
        let c = PipelineConfig::from_json(r#"{"method":"nand_array","train":{"epochs":5}}"#).unwrap();
        assert_eq!(c.method, Method::NandArray);
        assert_eq!(c.k_partitions, 10);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.lambda_cryptic, 10.0);
        assert_eq!(c.threshold(), 90.0);
    }

    #[test]
    fn unknown_method_is_an_input_error() {
        let e = PipelineConfig::from_json(r#"{"method":"magic"}"#).unwrap_err();
        assert!(matches!(e, CliError::Input(_)));
    }

    #[test]
    fn seed_streams_differ() {
        let a = split_seed(1, "train", 0);
        assert_eq!(a, split_seed(1, "train", 0));
        assert_ne!(a, split_seed(1, "train", 1));
        assert_ne!(a, split_seed(1, "partition", 0));
        assert_ne!(a, split_seed(2, "train", 0));
    }
}
