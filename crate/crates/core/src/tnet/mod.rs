//! Differentiable NAND-array synthesis with dual selector parameters.
//!
//! One triangular array of 2-input NANDs is trained so that the θ0 wiring
//! realizes the appearance circuit and the θ1 wiring the functional
//! circuit, while a containment penalty keeps θ1's connection distribution
//! inside θ0's. Training runs on a small reverse-mode tape
//! ([`crate::autodiff`]).

mod dataset;
mod extract;
mod loss;
mod net;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::sim::{exhaustive_words, random_words, simulate_words};
use crate::netlist::{CamoError, Netlist};

pub use dataset::{MimicryDataset, Row};
pub use extract::{extract, extract_stats, ExtractStats, Extracted};
pub use loss::{loss_cryptic, CrypticAggregation, loss_hardness, loss_reg, total_loss, LossGrad, LossParts, LossWeights, PRED_EPS};
pub use net::{effective_params, gumbel_noise, softmax, ForwardMode, SelectorNet};
pub use train::{default_layers, restart_seed, Coordinates, row_accuracy, train, train_from, write_trace, EpochRecord, TrainConfig, Trained};

/// Input widths up to this size are checked exhaustively.
pub const EXHAUSTIVE_PI_LIMIT: usize = 20;
pub const DEFAULT_ACCURACY_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TnetError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("input width mismatch: expected {expected}, got {got}")]
    Width { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, trace: Vec<EpochRecord> },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Camo(#[from] CamoError),
    #[error("checkpoint: {0}")]
    Json(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Hard-mode agreement (percent of PO bits) between the `p` wiring of `net`
/// and `reference`. Reference inputs map to the first net inputs; extra net
/// inputs are held at 0. Exhaustive up to [`EXHAUSTIVE_PI_LIMIT`] inputs,
/// otherwise `samples` seeded vectors.
pub fn accuracy(net: &SelectorNet, reference: &Netlist, p: f64, samples: usize, seed: u64) -> Result<f64, TnetError> {
    let k = reference.inputs().len();
    if k > net.num_pis {
        return Err(TnetError::Width {
            expected: net.num_pis,
            got: k,
        });
    }
    let pos = reference.outputs().len();
    if pos > net.num_pos {
        return Err(TnetError::Shape(format!(
            "reference has {pos} outputs, net has {}",
            net.num_pos
        )));
    }
    let (words, count) = if k <= EXHAUSTIVE_PI_LIMIT {
        (exhaustive_words(k), 1usize << k)
    } else {
        (random_words(k, samples, seed), samples)
    };
    let vals = simulate_words(reference, &words);
    let theta = if p == 0.0 {
        net.theta0.clone()
    } else {
        effective_params(&net.theta0, &net.theta1, p)?
    };
    let sel = net.selections(&theta);
    let nwords = words.first().map_or(1, Vec::len);
    let mut hit = 0u64;
    for w in 0..nwords {
        let mut pi: Vec<u64> = words.iter().map(|v| v[w]).collect();
        pi.resize(net.num_pis, 0);
        let out = net.eval_words(&sel, &pi);
        let valid = if (w + 1) * 64 <= count {
            u64::MAX
        } else {
            (1u64 << (count - w * 64)) - 1
        };
        for (o, port) in reference.outputs().iter().enumerate() {
            hit += (!(out[o] ^ vals[port.node.0][w]) & valid).count_ones() as u64;
        }
    }
    Ok(100.0 * hit as f64 / (count * pos).max(1) as f64)
}

/// Serializable training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub num_pis: usize,
    pub num_pos: usize,
    pub layers: Vec<usize>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub tau: f64,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn of(net: &SelectorNet, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            num_pis: net.num_pis,
            num_pos: net.num_pos,
            layers: net.layers.clone(),
            theta0: net.theta0.clone(),
            theta1: net.theta1.clone(),
            tau: net.tau,
            seed,
            epoch,
        }
    }

    pub fn to_net(&self) -> Result<SelectorNet, TnetError> {
        let mut net = SelectorNet::new(self.num_pis, self.num_pos, &self.layers)?;
        if self.theta0.len() != net.num_params() || self.theta1.len() != net.num_params() {
            return Err(TnetError::Shape(format!(
                "expected {} parameters per set",
                net.num_params()
            )));
        }
        if !(self.tau > 0.0) {
            return Err(TnetError::Shape("tau must be positive".into()));
        }
        net.theta0.clone_from(&self.theta0);
        net.theta1.clone_from(&self.theta1);
        net.tau = self.tau;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TnetError> {
        serde_json::from_str(text).map_err(|e| TnetError::Json(e.to_string()))
    }
}
