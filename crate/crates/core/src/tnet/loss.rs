use serde::{Deserialize, Serialize};

use super::dataset::Row;
use super::net::{gumbel_noise, SelectorNet};
use super::{ForwardMode, TnetError};
use crate::autodiff::{Tape, Var};

/// Predictions are clamped to `[EPS, 1 - EPS]` before the logarithm.
pub const PRED_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_reg: f64,
    pub lambda_cryptic: f64,
    pub gamma: f64,
    pub cryptic_aggregation: CrypticAggregation,
}

/// How per-slot containment penalties combine into the cryptic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrypticAggregation {
    #[default]
    Sum,
    /// Sum divided by the number of selector slots.
    Mean,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_reg: 0.15,
            lambda_cryptic: 10.0,
            gamma: 2.0,
            cryptic_aggregation: CrypticAggregation::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub hardness: f64,
    pub reg: f64,
    pub cryptic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub parts: LossParts,
    pub grad0: Vec<f64>,
    pub grad1: Vec<f64>,
}

fn bce_term(t: &mut Tape, pred: Var, target: f64, gamma: f64) -> Var {
    let p = t.clamp(pred, PRED_EPS, 1.0 - PRED_EPS);
    let lp = t.ln(p);
    let q = t.rsub_const(1.0, p);
    let lq = t.ln(q);
    let a = t.scale(lp, -target);
    let b = t.scale(lq, -(1.0 - target));
    let bce = t.add(a, b);
    let err = t.add_const(p, -target);
    let err = t.abs(err);
    let base = t.add_const(err, 1.0);
    let w = t.powf(base, gamma);
    t.mul(w, bce)
}

/// Mean over bits of `(1 + |pred - target|)^gamma * BCE(pred, target)`.
pub fn loss_hardness(preds: &[f64], targets: &[f64], gamma: f64) -> f64 {
    assert_eq!(preds.len(), targets.len(), "prediction/target shape mismatch");
    let mut t = Tape::new();
    let terms: Vec<Var> = preds
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let v = t.var(p);
            bce_term(&mut t, v, y, gamma)
        })
        .collect();
    let m = t.mean(&terms);
    t.val(m)
}

/// Mean over node slots of the expected normalised skip distance.
fn reg_on_tape(t: &mut Tape, net: &SelectorNet, theta: &[Var]) -> Var {
    let mut per_slot = Vec::new();
    for node in 0..net.num_nodes() {
        for s in 0..2 {
            let slot = net.node_slot(node, s);
            let max_gap = slot.layer - 1;
            if max_gap == 0 {
                per_slot.push(t.var(0.0));
                continue;
            }
            let probs = t.softmax(&theta[slot.offset..slot.offset + slot.len], 1.0);
            let gaps: Vec<Var> = (0..slot.len)
                .map(|c| {
                    let gap = slot.layer - net.signal_layer(c) - 1;
                    t.var(gap as f64 / max_gap as f64)
                })
                .collect();
            per_slot.push(t.dot(&probs, &gaps));
        }
    }
    t.mean(&per_slot)
}

/// Sum over every slot and candidate of `relu(p1 - p0)`.
fn cryptic_on_tape(t: &mut Tape, net: &SelectorNet, th0: &[Var], th1: &[Var]) -> Var {
    let mut terms = Vec::new();
    for slot in net.slots() {
        let r = slot.offset..slot.offset + slot.len;
        let p0 = t.softmax(&th0[r.clone()], 1.0);
        let p1 = t.softmax(&th1[r], 1.0);
        for (a, b) in p0.into_iter().zip(p1) {
            let d = t.sub(b, a);
            terms.push(t.relu(d));
        }
    }
    t.sum(&terms)
}

/// Regularisation of one parameter set.
pub fn loss_reg(net: &SelectorNet, theta: &[f64]) -> f64 {
    let mut t = Tape::new();
    let vars: Vec<Var> = theta.iter().map(|&x| t.var(x)).collect();
    let r = reg_on_tape(&mut t, net, &vars);
    t.val(r)
}

/// Unaggregated (summed) containment penalty.
pub fn loss_cryptic(net: &SelectorNet) -> f64 {
    let mut t = Tape::new();
    let a: Vec<Var> = net.theta0.iter().map(|&x| t.var(x)).collect();
    let b: Vec<Var> = net.theta1.iter().map(|&x| t.var(x)).collect();
    let c = cryptic_on_tape(&mut t, net, &a, &b);
    t.val(c)
}

/// Weighted loss over `rows` with gradients for both parameter sets.
///
/// `noise_seed` drives the Gumbel perturbation (one draw per call, shared by
/// every row); it is ignored in soft mode.
pub fn total_loss(
    net: &SelectorNet,
    rows: &[&Row],
    weights: &LossWeights,
    mode: ForwardMode,
    noise_seed: u64,
) -> Result<LossGrad, TnetError> {
    if rows.is_empty() {
        return Err(TnetError::EmptyBatch);
    }
    if mode == ForwardMode::Hard {
        return Err(TnetError::Shape("hard mode has no gradient".into()));
    }
    let n = net.num_params();
    let mut t = Tape::new();
    let th0: Vec<Var> = net.theta0.iter().map(|&x| t.var(x)).collect();
    let th1: Vec<Var> = net.theta1.iter().map(|&x| t.var(x)).collect();
    let noise = (mode == ForwardMode::Gumbel).then(|| gumbel_noise(n, noise_seed));

    let mut ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut bit_terms = Vec::new();
    for &p in &ps {
        let eff: Vec<Var> = (0..n)
            .map(|i| {
                let base = if p == 0.0 {
                    th0[i]
                } else if p == 1.0 {
                    th1[i]
                } else {
                    let a = t.scale(th1[i], p);
                    let b = t.scale(th0[i], 1.0 - p);
                    t.add(a, b)
                };
                match &noise {
                    Some(g) => t.add_const(base, g[i]),
                    None => base,
                }
            })
            .collect();
        let probs: Vec<Vec<Var>> = net
            .slots()
            .iter()
            .map(|s| t.softmax(&eff[s.offset..s.offset + s.len], net.tau))
            .collect();
        let zero = t.var(0.0);
        let one = t.var(1.0);
        for row in rows.iter().filter(|r| r.p == p) {
            let mut signals: Vec<Var> = row.pis.iter().map(|&b| if b { one } else { zero }).collect();
            for node in 0..net.num_nodes() {
                let a = &probs[2 * node];
                let b = &probs[2 * node + 1];
                let x = t.dot(a, &signals[..a.len()]);
                let y = t.dot(b, &signals[..b.len()]);
                let xy = t.mul(x, y);
                signals.push(t.rsub_const(1.0, xy));
            }
            for o in 0..net.num_pos {
                if !row.mask[o] {
                    continue;
                }
                let w = &probs[2 * net.num_nodes() + o];
                let pred = t.dot(w, &signals);
                let target = if row.targets[o] { 1.0 } else { 0.0 };
                bit_terms.push(bce_term(&mut t, pred, target, weights.gamma));
            }
        }
    }
    let hardness = t.mean(&bit_terms);
    let r0 = reg_on_tape(&mut t, net, &th0);
    let r1 = reg_on_tape(&mut t, net, &th1);
    let r = t.add(r0, r1);
    let reg = t.scale(r, 0.5);
    let mut cryptic = cryptic_on_tape(&mut t, net, &th0, &th1);
    if weights.cryptic_aggregation == CrypticAggregation::Mean {
        cryptic = t.scale(cryptic, 1.0 / net.num_slots() as f64);
    }
    let wr = t.scale(reg, weights.lambda_reg);
    let wc = t.scale(cryptic, weights.lambda_cryptic);
    let s = t.add(hardness, wr);
    let total = t.add(s, wc);

    let g = t.backward(total);
    Ok(LossGrad {
        parts: LossParts {
            total: t.val(total),
            hardness: t.val(hardness),
            reg: t.val(reg),
            cryptic: t.val(cryptic),
        },
        grad0: th0.iter().map(|v| g[v.index()]).collect(),
        grad1: th1.iter().map(|v| g[v.index()]).collect(),
    })
}
