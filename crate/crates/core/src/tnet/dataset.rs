use crate::netlist::sim::{exhaustive_words, random_words, simulate_words};
use crate::netlist::Netlist;

use super::TnetError;

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// 0 selects the appearance circuit, 1 the functional circuit.
    pub p: f64,
    pub pis: Vec<bool>,
    pub targets: Vec<bool>,
    /// Output positions that carry a target for this circuit.
    pub mask: Vec<bool>,
}

/// Unified I/O table for both regimes. Inputs are aligned by position; the
/// narrower circuit sees its missing inputs tied to 0 and its missing
/// outputs are masked.
#[derive(Debug, Clone, PartialEq)]
pub struct MimicryDataset {
    pub num_pis: usize,
    pub num_pos: usize,
    pub rows: Vec<Row>,
    /// Unified input names: functional names first, then extra
    /// appearance names.
    pub pi_names: Vec<String>,
    /// Unified output names, same convention.
    pub po_names: Vec<String>,
    pub appearance_pis: usize,
    pub functional_pis: usize,
    pub exhaustive: bool,
}

impl MimicryDataset {
    /// Exhaustive rows when both circuits have at most `cap` inputs,
    /// otherwise `samples` seeded random vectors per circuit.
    pub fn build(
        appearance: &Netlist,
        functional: &Netlist,
        cap: usize,
        samples: usize,
        seed: u64,
    ) -> Result<Self, TnetError> {
        let num_pis = appearance.inputs().len().max(functional.inputs().len());
        let num_pos = appearance.outputs().len().max(functional.outputs().len());
        if num_pis == 0 || num_pos == 0 {
            return Err(TnetError::Shape("circuits need inputs and outputs".into()));
        }
        let exhaustive = num_pis <= cap;
        let mut rows = rows_for(appearance, 0.0, num_pis, num_pos, exhaustive, samples, seed);
        rows.extend(rows_for(functional, 1.0, num_pis, num_pos, exhaustive, samples, seed ^ 0x9e37_79b9));
        let names = |f: Vec<&str>, a: Vec<&str>| -> Vec<String> {
            let mut out: Vec<String> = f.iter().map(|s| s.to_string()).collect();
            for extra in a.iter().skip(f.len()) {
                let mut name = extra.to_string();
                while out.contains(&name) {
                    name.push_str("_a");
                }
                out.push(name);
            }
            out
        };
        Ok(MimicryDataset {
            num_pis,
            num_pos,
            rows,
            pi_names: names(functional.input_names(), appearance.input_names()),
            po_names: names(functional.output_names(), appearance.output_names()),
            appearance_pis: appearance.inputs().len(),
            functional_pis: functional.inputs().len(),
            exhaustive,
        })
    }

    pub fn rows_at(&self, p: f64) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.p == p)
    }
}

fn rows_for(n: &Netlist, p: f64, num_pis: usize, num_pos: usize, exhaustive: bool, samples: usize, seed: u64) -> Vec<Row> {
    let k = n.inputs().len();
    let (words, count) = if exhaustive {
        (exhaustive_words(k), 1usize << k)
    } else {
        (random_words(k, samples, seed), samples)
    };
    let vals = simulate_words(n, &words);
    let out: Vec<&Vec<u64>> = n.outputs().iter().map(|o| &vals[o.node.0]).collect();
    (0..count)
        .map(|r| {
            let bit = |w: &[u64]| (w[r / 64] >> (r % 64)) & 1 == 1;
            let mut pis: Vec<bool> = words.iter().map(|w| bit(w)).collect();
            pis.resize(num_pis, false);
            let mut targets: Vec<bool> = out.iter().map(|w| bit(w)).collect();
            let mut mask = vec![true; targets.len()];
            targets.resize(num_pos, false);
            mask.resize(num_pos, false);
            Row { p, pis, targets, mask }
        })
        .collect()
}
