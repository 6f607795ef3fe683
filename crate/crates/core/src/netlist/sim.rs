//! Bit-parallel simulation and truth tables.
//!
//! Row `i` of a truth table assigns primary input `j` the value of bit `j`
//! of `i` (the first declared input is the least significant bit).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::Netlist;

pub const DEFAULT_TRUTH_TABLE_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("assignment has {got} bits but the netlist has {expected} inputs")]
    MissingInputs { expected: usize, got: usize },
    #[error("{inputs} inputs exceed the exhaustive cap of {cap}; sample instead")]
    TooManyInputs { inputs: usize, cap: usize },
    #[error("reference input `{0}` has no counterpart in the candidate")]
    UnmappedInput(String),
    #[error("reference output `{0}` has no counterpart in the candidate")]
    UnmappedOutput(String),
    #[error("padding map does not fit the netlists")]
    BadMap,
}

/// Values of every node for 64 packed patterns per word.
///
/// `pi_words[j][w]` holds word `w` of primary input `j`.
pub fn simulate_words(n: &Netlist, pi_words: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let words = pi_words.first().map_or(1, Vec::len);
    let mut vals = vec![Vec::new(); n.len()];
    for (j, &pi) in n.inputs().iter().enumerate() {
        vals[pi.0] = pi_words[j].clone();
    }
    let mut scratch = Vec::new();
    for &id in n.topo_order() {
        let node = n.node(id);
        if node.kind == super::GateType::Input {
            continue;
        }
        let mut out = vec![0u64; words];
        for (w, slot) in out.iter_mut().enumerate() {
            scratch.clear();
            scratch.extend(node.fanin.iter().map(|f| vals[f.0][w]));
            *slot = node.kind.eval_words(&scratch);
        }
        vals[id.0] = out;
    }
    vals
}

/// Evaluate the outputs for one input assignment.
pub fn simulate(n: &Netlist, assignment: &[bool]) -> Result<Vec<bool>, SimError> {
    if assignment.len() != n.inputs().len() {
        return Err(SimError::MissingInputs {
            expected: n.inputs().len(),
            got: assignment.len(),
        });
    }
    let words: Vec<Vec<u64>> = assignment.iter().map(|&b| vec![b as u64]).collect();
    let vals = simulate_words(n, &words);
    Ok(n.outputs()
        .iter()
        .map(|p| vals[p.node.0][0] & 1 == 1)
        .collect())
}

/// Packed input words enumerating all `2^inputs` rows.
pub fn exhaustive_words(inputs: usize) -> Vec<Vec<u64>> {
    let rows = 1usize << inputs;
    let words = rows.div_ceil(64);
    (0..inputs)
        .map(|j| {
            (0..words)
                .map(|w| {
                    let mut word = 0u64;
                    for b in 0..64 {
                        let row = w * 64 + b;
                        if row < rows && (row >> j) & 1 == 1 {
                            word |= 1 << b;
                        }
                    }
                    word
                })
                .collect()
        })
        .collect()
}

/// Mask of valid rows in word `w` when `rows` patterns are packed.
pub fn row_mask(rows: usize, w: usize) -> u64 {
    let lo = w * 64;
    if rows >= lo + 64 {
        !0
    } else if rows <= lo {
        0
    } else {
        (1u64 << (rows - lo)) - 1
    }
}

/// `count` seeded uniform random input vectors, packed.
pub fn random_words(inputs: usize, count: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = count.div_ceil(64).max(1);
    (0..inputs)
        .map(|_| (0..words).map(|_| rng.gen::<u64>()).collect())
        .collect()
}

/// Output columns of an exhaustive simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    pub num_inputs: usize,
    pub num_outputs: usize,
    /// `columns[o][w]`: packed values of output `o`.
    pub columns: Vec<Vec<u64>>,
}

impl TruthTable {
    pub fn of(n: &Netlist) -> Result<Self, SimError> {
        Self::with_cap(n, DEFAULT_TRUTH_TABLE_CAP)
    }

    pub fn with_cap(n: &Netlist, cap: usize) -> Result<Self, SimError> {
        let k = n.inputs().len();
        if k > cap {
            return Err(SimError::TooManyInputs { inputs: k, cap });
        }
        let rows = 1usize << k;
        let vals = simulate_words(n, &exhaustive_words(k));
        let columns = n
            .outputs()
            .iter()
            .map(|p| {
                let mut col = vals
                    .get(p.node.0)
                    .cloned()
                    .unwrap_or_else(|| vec![0; rows.div_ceil(64)]);
                for (w, v) in col.iter_mut().enumerate() {
                    *v &= row_mask(rows, w);
                }
                col
            })
            .collect();
        Ok(TruthTable {
            num_inputs: k,
            num_outputs: n.outputs().len(),
            columns,
        })
    }

    pub fn rows(&self) -> usize {
        1 << self.num_inputs
    }

    pub fn bit(&self, row: usize, output: usize) -> bool {
        (self.columns[output][row / 64] >> (row % 64)) & 1 == 1
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        (0..self.num_outputs).map(|o| self.bit(i, o)).collect()
    }
}

/// Correspondence between a candidate netlist's ports and a reference's.
///
/// Candidate inputs without a reference counterpart are padding and are held
/// at constant 0; reference outputs are read from the mapped candidate output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddingMap {
    /// For each candidate input, the reference input that drives it.
    pub inputs: Vec<Option<usize>>,
    /// For each reference output, the candidate output index.
    pub outputs: Vec<usize>,
}

impl PaddingMap {
    pub fn identity(n: &Netlist) -> Self {
        PaddingMap {
            inputs: (0..n.inputs().len()).map(Some).collect(),
            outputs: (0..n.outputs().len()).collect(),
        }
    }

    /// Match ports by name; extra candidate inputs become padding.
    pub fn by_name(candidate: &Netlist, reference: &Netlist) -> Result<Self, SimError> {
        let ref_in = reference.input_names();
        let cand_in = candidate.input_names();
        for name in &ref_in {
            if !cand_in.contains(name) {
                return Err(SimError::UnmappedInput(name.to_string()));
            }
        }
        let inputs = cand_in
            .iter()
            .map(|c| ref_in.iter().position(|r| r == c))
            .collect();
        let cand_out = candidate.output_names();
        let outputs = reference
            .output_names()
            .iter()
            .map(|r| {
                cand_out
                    .iter()
                    .position(|c| c == r)
                    .ok_or_else(|| SimError::UnmappedOutput(r.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(PaddingMap { inputs, outputs })
    }

    /// Match ports by position; the candidate may be wider on either side.
    pub fn positional(candidate: &Netlist, reference: &Netlist) -> Result<Self, SimError> {
        let (ci, ri) = (candidate.inputs().len(), reference.inputs().len());
        let (co, ro) = (candidate.outputs().len(), reference.outputs().len());
        if ci < ri {
            return Err(SimError::UnmappedInput(
                reference.input_names()[ci].to_string(),
            ));
        }
        if co < ro {
            return Err(SimError::UnmappedOutput(
                reference.output_names()[co].to_string(),
            ));
        }
        Ok(PaddingMap {
            inputs: (0..ci).map(|j| (j < ri).then_some(j)).collect(),
            outputs: (0..ro).collect(),
        })
    }

    fn check(&self, candidate: &Netlist, reference: &Netlist) -> Result<(), SimError> {
        let ok = self.inputs.len() == candidate.inputs().len()
            && self
                .inputs
                .iter()
                .flatten()
                .all(|&r| r < reference.inputs().len())
            && self.outputs.len() == reference.outputs().len()
            && self.outputs.iter().all(|&c| c < candidate.outputs().len());
        if ok {
            Ok(())
        } else {
            Err(SimError::BadMap)
        }
    }
}

/// Output-bit agreement between a candidate and a reference netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agreement {
    pub matching_bits: u64,
    pub total_bits: u64,
    /// Number of input vectors evaluated.
    pub vectors: u64,
    pub exhaustive: bool,
}

impl Agreement {
    pub fn percent(&self) -> f64 {
        if self.total_bits == 0 {
            100.0
        } else {
            100.0 * self.matching_bits as f64 / self.total_bits as f64
        }
    }

    pub fn is_exact(&self) -> bool {
        self.matching_bits == self.total_bits
    }
}

/// Compare candidate and reference over every reference input vector when
/// the reference has at most `cap` inputs, else over `samples` seeded
/// random vectors.
pub fn agreement(
    candidate: &Netlist,
    reference: &Netlist,
    map: &PaddingMap,
    cap: usize,
    samples: usize,
    seed: u64,
) -> Result<Agreement, SimError> {
    map.check(candidate, reference)?;
    let k = reference.inputs().len();
    let (ref_words, vectors, exhaustive) = if k <= cap {
        (exhaustive_words(k), 1usize << k, true)
    } else {
        (random_words(k, samples, seed), samples, false)
    };
    let words = vectors.div_ceil(64).max(1);
    let cand_words: Vec<Vec<u64>> = map
        .inputs
        .iter()
        .map(|m| match m {
            Some(r) => ref_words[*r].clone(),
            None => vec![0; words],
        })
        .collect();
    let rv = simulate_words(reference, &ref_words);
    let cv = simulate_words(candidate, &cand_words);
    let mut matching = 0u64;
    for (o, port) in reference.outputs().iter().enumerate() {
        let cport = &candidate.outputs()[map.outputs[o]];
        for w in 0..words {
            let mask = row_mask(vectors, w);
            let diff = (rv[port.node.0][w] ^ cv[cport.node.0][w]) & mask;
            matching += (mask.count_ones() - diff.count_ones()) as u64;
        }
    }
    Ok(Agreement {
        matching_bits: matching,
        total_bits: (vectors * reference.outputs().len()) as u64,
        vectors: vectors as u64,
        exhaustive,
    })
}
