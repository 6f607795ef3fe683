use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TnetError;

/// How selector logits turn into connection weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardMode {
    /// `softmax(theta / tau)`.
    Soft,
    /// `softmax((theta + g) / tau)` with standard Gumbel noise `g`.
    Gumbel,
    /// One-hot argmax.
    Hard,
}

/// One selector: logits over the first `len` signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Slot {
    pub offset: usize,
    pub len: usize,
    /// 1-based layer of the owning node; 0 for output selectors.
    pub layer: usize,
}

/// Triangular array of 2-input NAND nodes with dual selector parameters.
///
/// Signals are numbered PIs first, then nodes layer by layer. A node in
/// layer `l` may read any PI or any node of a lower layer. Node `i` owns
/// slots `2i` and `2i + 1`; output selectors follow and range over every
/// signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorNet {
    pub num_pis: usize,
    pub num_pos: usize,
    pub layers: Vec<usize>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub tau: f64,
    slots: Vec<Slot>,
    signal_layer: Vec<usize>,
}

impl SelectorNet {
    /// Zero-initialized network.
    pub fn new(num_pis: usize, num_pos: usize, layers: &[usize]) -> Result<Self, TnetError> {
        if num_pis == 0 || num_pos == 0 {
            return Err(TnetError::Shape("need at least one input and one output".into()));
        }
        if layers.is_empty() || layers.contains(&0) {
            return Err(TnetError::Shape("layer sizes must be positive".into()));
        }
        let mut slots = Vec::new();
        let mut signal_layer = vec![0; num_pis];
        let mut offset = 0;
        let mut avail = num_pis;
        for (l, &size) in layers.iter().enumerate() {
            for _ in 0..size {
                for _ in 0..2 {
                    slots.push(Slot {
                        offset,
                        len: avail,
                        layer: l + 1,
                    });
                    offset += avail;
                }
            }
            signal_layer.extend(std::iter::repeat(l + 1).take(size));
            avail += size;
        }
        for _ in 0..num_pos {
            slots.push(Slot {
                offset,
                len: avail,
                layer: 0,
            });
            offset += avail;
        }
        Ok(SelectorNet {
            num_pis,
            num_pos,
            layers: layers.to_vec(),
            theta0: vec![0.0; offset],
            theta1: vec![0.0; offset],
            tau: 1.0,
            slots,
            signal_layer,
        })
    }

    /// Logits drawn from `N(0, scale^2)`; both parameter sets start equal.
    pub fn random(num_pis: usize, num_pos: usize, layers: &[usize], scale: f64, seed: u64) -> Result<Self, TnetError> {
        let mut net = Self::new(num_pis, num_pos, layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in net.theta0.iter_mut() {
            *x = scale * standard_normal(&mut rng);
        }
        net.theta1 = net.theta0.clone();
        Ok(net)
    }

    pub fn num_nodes(&self) -> usize {
        self.layers.iter().sum()
    }

    pub fn num_signals(&self) -> usize {
        self.num_pis + self.num_nodes()
    }

    pub fn num_params(&self) -> usize {
        self.theta0.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub(crate) fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Slot of selector `s` of node `i`.
    pub(crate) fn node_slot(&self, node: usize, s: usize) -> Slot {
        self.slots[2 * node + s]
    }

    pub(crate) fn output_slot(&self, po: usize) -> Slot {
        self.slots[2 * self.num_nodes() + po]
    }

    /// 0 for PIs, 1-based layer for nodes.
    pub fn signal_layer(&self, s: usize) -> usize {
        self.signal_layer[s]
    }

    /// Argmax of each selector under parameter vector `theta`; ties pick
    /// the lowest candidate.
    pub fn selections(&self, theta: &[f64]) -> Vec<usize> {
        self.slots.iter().map(|s| argmax(&theta[s.offset..s.offset + s.len])).collect()
    }

    /// Real-valued forward pass for one input vector.
    pub fn forward(&self, pi: &[f64], p: f64, mode: ForwardMode, seed: u64) -> Result<Vec<f64>, TnetError> {
        if pi.len() != self.num_pis {
            return Err(TnetError::Width {
                expected: self.num_pis,
                got: pi.len(),
            });
        }
        let mut theta = effective_params(&self.theta0, &self.theta1, p)?;
        if mode == ForwardMode::Gumbel {
            let noise = gumbel_noise(theta.len(), seed);
            for (t, g) in theta.iter_mut().zip(noise) {
                *t += g;
            }
        }
        let weights = |slot: &Slot| -> Vec<f64> {
            let logits = &theta[slot.offset..slot.offset + slot.len];
            match mode {
                ForwardMode::Hard => {
                    let mut w = vec![0.0; slot.len];
                    w[argmax(logits)] = 1.0;
                    w
                }
                _ => softmax(logits, self.tau),
            }
        };
        let mut signals = pi.to_vec();
        for node in 0..self.num_nodes() {
            let a = self.node_slot(node, 0);
            let b = self.node_slot(node, 1);
            let x: f64 = weights(&a).iter().zip(&signals).map(|(w, s)| w * s).sum();
            let y: f64 = weights(&b).iter().zip(&signals).map(|(w, s)| w * s).sum();
            signals.push(1.0 - x * y);
        }
        Ok((0..self.num_pos)
            .map(|o| {
                let s = self.output_slot(o);
                weights(&s).iter().zip(&signals).map(|(w, v)| w * v).sum()
            })
            .collect())
    }

    /// Hard evaluation on 64 patterns at a time. `pi_words[i]` holds input
    /// `i`; the result holds one word per output.
    pub fn eval_words(&self, sel: &[usize], pi_words: &[u64]) -> Vec<u64> {
        let mut signals = pi_words.to_vec();
        for node in 0..self.num_nodes() {
            let v = !(signals[sel[2 * node]] & signals[sel[2 * node + 1]]);
            signals.push(v);
        }
        (0..self.num_pos).map(|o| signals[sel[2 * self.num_nodes() + o]]).collect()
    }
}

/// `p * theta1 + (1 - p) * theta0`.
pub fn effective_params(theta0: &[f64], theta1: &[f64], p: f64) -> Result<Vec<f64>, TnetError> {
    if theta0.len() != theta1.len() {
        return Err(TnetError::Shape(format!(
            "parameter sets differ in length ({} vs {})",
            theta0.len(),
            theta1.len()
        )));
    }
    Ok(theta0
        .iter()
        .zip(theta1)
        .map(|(&a, &b)| if p == 1.0 { b } else if p == 0.0 { a } else { p * b + (1.0 - p) * a })
        .collect())
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(xs: &[f64], tau: f64) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|&x| ((x - m) / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Standard Gumbel samples `-ln(-ln u)`.
pub fn gumbel_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            -(-u.ln()).ln()
        })
        .collect()
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(net: &mut SelectorNet, sel: &[usize], margin: f64) {
        for (s, &c) in net.slots.clone().iter().zip(sel) {
            for k in 0..s.len {
                let v = if k == c { margin } else { 0.0 };
                net.theta0[s.offset + k] = v;
                net.theta1[s.offset + k] = v;
            }
        }
    }

    #[test]
    fn shape_and_candidates() {
        let net = SelectorNet::new(3, 2, &[2, 1]).unwrap();
        assert_eq!(net.num_slots(), 2 * 3 + 2);
        assert_eq!(net.node_slot(0, 0).len, 3);
        assert_eq!(net.node_slot(2, 1).len, 5);
        assert_eq!(net.output_slot(1).len, 6);
        assert_eq!(net.num_params(), 4 * 3 + 2 * 5 + 2 * 6);
        assert_eq!(net.signal_layer(4), 1);
        assert_eq!(net.signal_layer(5), 2);
    }

    #[test]
    fn interpolation_endpoints() {
        let t0 = vec![0.0, 1.0];
        let t1 = vec![2.0, -1.0];
        assert_eq!(effective_params(&t0, &t1, 1.0).unwrap(), t1);
        assert_eq!(effective_params(&t0, &t1, 0.0).unwrap(), t0);
        assert_eq!(effective_params(&[0.0], &[2.0], 0.5).unwrap(), vec![1.0]);
        assert!(effective_params(&[0.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn hard_nand_semantics() {
        let mut net = SelectorNet::new(2, 1, &[1]).unwrap();
        one_hot(&mut net, &[0, 1, 2], 5.0);
        let f = |a: f64, b: f64| net.forward(&[a, b], 1.0, ForwardMode::Hard, 0).unwrap()[0];
        assert_eq!(f(1.0, 1.0), 0.0);
        assert_eq!(f(0.0, 1.0), 1.0);
        assert_eq!(f(0.0, 0.0), 1.0);
        assert_eq!(f(1.0, 0.0), 1.0);
    }

    #[test]
    fn soft_half_inputs() {
        // Uniform selectors over two inputs both at 0.5.
        let net = SelectorNet::new(2, 1, &[1]).unwrap();
        let mut net = net;
        let o = net.output_slot(0);
        net.theta0[o.offset + 2] = 50.0;
        net.theta1[o.offset + 2] = 50.0;
        let out = net.forward(&[0.5, 0.5], 0.0, ForwardMode::Soft, 0).unwrap();
        assert!((out[0] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn saturated_soft_matches_hard() {
        let mut net = SelectorNet::new(3, 2, &[3, 2]).unwrap();
        let sel = [0, 1, 1, 2, 0, 2, 3, 4, 5, 3, 6, 7];
        one_hot(&mut net, &sel, 40.0);
        for row in 0..8u32 {
            let pi: Vec<f64> = (0..3).map(|i| ((row >> i) & 1) as f64).collect();
            let h = net.forward(&pi, 0.0, ForwardMode::Hard, 0).unwrap();
            let s = net.forward(&pi, 0.0, ForwardMode::Soft, 0).unwrap();
            for (a, b) in h.iter().zip(&s) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gumbel_low_temperature_is_hard_with_noise() {
        let mut net = SelectorNet::random(3, 1, &[3, 2], 0.5, 11).unwrap();
        net.tau = 1e-3;
        let seed = 99;
        let noise = gumbel_noise(net.num_params(), seed);
        let mut noisy = net.clone();
        for (t, g) in noisy.theta0.iter_mut().zip(&noise) {
            *t += g;
        }
        for row in 0..8u32 {
            let pi: Vec<f64> = (0..3).map(|i| ((row >> i) & 1) as f64).collect();
            let g = net.forward(&pi, 0.0, ForwardMode::Gumbel, seed).unwrap();
            let h = noisy.forward(&pi, 0.0, ForwardMode::Hard, 0).unwrap();
            assert!((g[0] - h[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn endpoint_fidelity() {
        let net = SelectorNet::random(3, 1, &[3, 2], 1.0, 5).unwrap();
        let mut other = net.clone();
        for x in other.theta1.iter_mut() {
            *x += 3.7 * (*x).sin();
        }
        for row in 0..8u32 {
            let pi: Vec<f64> = (0..3).map(|i| ((row >> i) & 1) as f64).collect();
            assert_eq!(
                net.forward(&pi, 0.0, ForwardMode::Hard, 0).unwrap(),
                other.forward(&pi, 0.0, ForwardMode::Hard, 0).unwrap()
            );
        }
    }

    #[test]
    fn words_match_scalar_hard() {
        let net = SelectorNet::random(3, 2, &[4, 2], 1.0, 8).unwrap();
        let sel = net.selections(&net.theta0);
        let words = [0xAAu64, 0xCC, 0xF0];
        let out = net.eval_words(&sel, &words);
        for row in 0..8 {
            let pi: Vec<f64> = (0..3).map(|i| ((words[i] >> row) & 1) as f64).collect();
            let h = net.forward(&pi, 0.0, ForwardMode::Hard, 0).unwrap();
            for o in 0..2 {
                assert_eq!(((out[o] >> row) & 1) as f64, h[o]);
            }
        }
    }

    #[test]
    fn width_checked() {
        let net = SelectorNet::new(3, 1, &[1]).unwrap();
        assert!(matches!(
            net.forward(&[0.0], 0.0, ForwardMode::Soft, 0),
            Err(TnetError::Width { expected: 3, got: 1 })
        ));
    }
}
