use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{MimicryDataset, Row};
use super::extract::extract_stats;
use super::loss::{total_loss, CrypticAggregation, LossParts, LossWeights};
use super::net::{ForwardMode, SelectorNet};
use super::TnetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_reg: f64,
    pub lambda_cryptic: f64,
    pub hardness_gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub seed: u64,
    pub mode: ForwardMode,
    /// Standard deviation of the initial logits.
    pub init_scale: f64,
    /// Layer sizes; `None` derives them from the input width.
    pub layers: Option<Vec<usize>>,
    pub cryptic_aggregation: CrypticAggregation,
    pub coordinates: Coordinates,
    /// Independent initializations; the run with the best final hard-mode
    /// accuracy is kept.
    pub restarts: usize,
}

/// Parameterization the optimizer steps in. Both follow the gradient of the
/// same loss; only the per-coordinate step normalization differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    /// θ0 and θ1 directly.
    #[default]
    Independent,
    /// `s = θ0` and `d = θ1 - θ0`, with gradients `g0 + g1` and `g1`.
    SharedDifference,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_reg: 0.15,
            lambda_cryptic: 10.0,
            hardness_gamma: 2.0,
            learning_rate: 0.03,
            epochs: 8000,
            batch_size: 64,
            tau_start: 1.0,
            tau_end: 0.1,
            seed: 0,
            mode: ForwardMode::Gumbel,
            init_scale: 0.1,
            layers: None,
            cryptic_aggregation: CrypticAggregation::Mean,
            coordinates: Coordinates::SharedDifference,
            restarts: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TnetError> {
        let bad = |m: &str| Err(TnetError::Config(m.to_string()));
        if !(self.lambda_reg >= 0.0 && self.lambda_cryptic >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !(self.hardness_gamma >= 0.0) {
            return bad("hardness_gamma must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.tau_end > 0.0 && self.tau_end <= self.tau_start) {
            return bad("need 0 < tau_end <= tau_start");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be non-negative");
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_reg: self.lambda_reg,
            lambda_cryptic: self.lambda_cryptic,
            gamma: self.hardness_gamma,
            cryptic_aggregation: self.cryptic_aggregation,
        }
    }

    /// Temperature for `epoch`, geometric from `tau_start` to `tau_end`.
    pub fn tau_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.tau_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.tau_start * (self.tau_end / self.tau_start).powf(t)
    }
}

/// Layer sizes `[2n, 2n, n, n, n]` with `n` the input width, scaled down to
/// at most 256 nodes.
pub fn default_layers(num_pis: usize) -> Vec<usize> {
    let n = num_pis.clamp(1, 256 / 7);
    vec![2 * n, 2 * n, n, n, n]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_hardness: f64,
    pub loss_reg: f64,
    pub loss_cryptic: f64,
    pub acc_p0: f64,
    pub acc_p1: f64,
}

/// Writes the trace as CSV with one header line.
pub fn write_trace<W: std::io::Write>(trace: &[EpochRecord], out: W) -> Result<(), TnetError> {
    let mut w = csv::Writer::from_writer(out);
    for r in trace {
        w.serialize(r).map_err(|e| TnetError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| TnetError::Io(e.to_string()))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Hard-mode fraction of correct target bits over the rows with `p`.
pub fn row_accuracy(net: &SelectorNet, rows: &[Row], p: f64) -> f64 {
    let theta = if p == 0.0 { &net.theta0 } else { &net.theta1 };
    let sel = net.selections(theta);
    let rows: Vec<&Row> = rows.iter().filter(|r| r.p == p).collect();
    let (mut hit, mut total) = (0usize, 0usize);
    for chunk in rows.chunks(64) {
        let words: Vec<u64> = (0..net.num_pis)
            .map(|i| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u64, |w, (b, r)| w | ((r.pis[i] as u64) << b))
            })
            .collect();
        let out = net.eval_words(&sel, &words);
        for (b, r) in chunk.iter().enumerate() {
            for o in 0..net.num_pos {
                if r.mask[o] {
                    total += 1;
                    hit += (((out[o] >> b) & 1 == 1) == r.targets[o]) as usize;
                }
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub net: SelectorNet,
    pub trace: Vec<EpochRecord>,
    /// Seed of the kept run.
    pub seed: u64,
    /// Index of the kept run among the restarts.
    pub restart: usize,
}

impl Trained {
    /// Worse of the two final hard-mode accuracies.
    pub fn min_accuracy(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.acc_p0.min(r.acc_p1))
    }
}

/// Seed of restart `r`; restart 0 uses `seed` itself.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        return seed;
    }
    let mut z = seed ^ (r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trains `cfg.restarts` fresh networks on `ds` and keeps the one with the
/// highest final `min(acc_p0, acc_p1)`, then the fewest extracted
/// containment violations, then the lowest final loss, then the earliest.
/// The result is a pure function of `(ds, cfg)`.
pub fn train(ds: &MimicryDataset, cfg: &TrainConfig) -> Result<Trained, TnetError> {
    cfg.validate()?;
    let layers = cfg.layers.clone().unwrap_or_else(|| default_layers(ds.num_pis));
    let mut best: Option<Trained> = None;
    for r in 0..cfg.restarts {
        let run_cfg = TrainConfig {
            seed: restart_seed(cfg.seed, r),
            ..cfg.clone()
        };
        let mut net = SelectorNet::random(ds.num_pis, ds.num_pos, &layers, cfg.init_scale, run_cfg.seed)?;
        net.tau = cfg.tau_start;
        let mut run = train_from(net, ds, &run_cfg)?;
        run.restart = r;
        let loss = |t: &Trained| t.trace.last().map_or(f64::INFINITY, |e| e.loss_total);
        let violations = |t: &Trained| extract_stats(&t.net).violation_fraction();
        let better = best.as_ref().map_or(true, |b| {
            let (x, y) = (run.min_accuracy(), b.min_accuracy());
            let (vx, vy) = (violations(&run), violations(b));
            x > y || (x == y && (vx < vy || (vx == vy && loss(&run) < loss(b))))
        });
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Continues training `net` on `ds`.
pub fn train_from(mut net: SelectorNet, ds: &MimicryDataset, cfg: &TrainConfig) -> Result<Trained, TnetError> {
    cfg.validate()?;
    if ds.num_pis != net.num_pis || ds.num_pos != net.num_pos {
        return Err(TnetError::Width {
            expected: net.num_pis,
            got: ds.num_pis,
        });
    }
    if ds.rows.is_empty() {
        return Err(TnetError::EmptyBatch);
    }
    let weights = cfg.weights();
    let n = net.num_params();
    let mut opt0 = Adam::new(n, cfg.learning_rate);
    let mut opt1 = Adam::new(n, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a11);
    let mut order: Vec<usize> = (0..ds.rows.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        net.tau = cfg.tau_at(epoch);
        order.shuffle(&mut rng);
        let mut acc = LossParts::default();
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Row> = chunk.iter().map(|&i| &ds.rows[i]).collect();
            let noise_seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(step);
            step += 1;
            let lg = total_loss(&net, &batch, &weights, cfg.mode, noise_seed)?;
            let finite = lg.parts.total.is_finite()
                && lg.grad0.iter().chain(&lg.grad1).all(|g| g.is_finite());
            if !finite {
                return Err(TnetError::Diverged { epoch, trace });
            }
            match cfg.coordinates {
                Coordinates::Independent => {
                    opt0.step(&mut net.theta0, &lg.grad0);
                    opt1.step(&mut net.theta1, &lg.grad1);
                }
                Coordinates::SharedDifference => {
                    let mut diff: Vec<f64> = net.theta1.iter().zip(&net.theta0).map(|(a, b)| a - b).collect();
                    let shared_grad: Vec<f64> = lg.grad0.iter().zip(&lg.grad1).map(|(a, b)| a + b).collect();
                    opt0.step(&mut net.theta0, &shared_grad);
                    opt1.step(&mut diff, &lg.grad1);
                    for (t1, (t0, d)) in net.theta1.iter_mut().zip(net.theta0.iter().zip(&diff)) {
                        *t1 = t0 + d;
                    }
                }
            }
            acc.total += lg.parts.total;
            acc.hardness += lg.parts.hardness;
            acc.reg += lg.parts.reg;
            acc.cryptic += lg.parts.cryptic;
            batches += 1;
        }
        let k = batches as f64;
        trace.push(EpochRecord {
            epoch,
            loss_total: acc.total / k,
            loss_hardness: acc.hardness / k,
            loss_reg: acc.reg / k,
            loss_cryptic: acc.cryptic / k,
            acc_p0: row_accuracy(&net, &ds.rows, 0.0),
            acc_p1: row_accuracy(&net, &ds.rows, 1.0),
        });
    }
    Ok(Trained {
        net,
        trace,
        seed: cfg.seed,
        restart: 0,
    })
}
