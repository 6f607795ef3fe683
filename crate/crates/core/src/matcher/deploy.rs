use std::collections::{BTreeMap, HashSet};

use super::NodeMapping;
use crate::netlist::{
    covert_pair_allowed, levelize, CamoError, CamouflagedNetlist, Cell, GateSpec, GateType, Netlist, NodeId, Port,
};

/// Naming priority: F primary inputs, then appearance cells, then exposed
/// functional logic.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Rank {
    Input,
    Appearance,
    Exposed,
}

struct Draft {
    name: String,
    rank: Rank,
    cell: Cell,
}

/// Realize `f_graph` under the structure of `a_graph` following `m`.
///
/// Every A node yields one cell carrying its name. A matched pair whose
/// types admit hiding becomes a covert cell; F-connections missing from the
/// A neighbourhood are added as real wires. Unmatched A nodes become decoys
/// whose outputs feed nothing functional. F nodes without a usable partner
/// are inserted as exposed plain cells. Primary inputs are the F inputs in
/// order, followed by unmatched A inputs; primary outputs are the F outputs.
pub fn deploy_covert(a_graph: &Netlist, f_graph: &Netlist, m: &NodeMapping) -> Result<CamouflagedNetlist, CamoError> {
    let la = levelize(a_graph);
    let lf = levelize(f_graph);
    let depth = la.layers.len().max(lf.layers.len());
    let mut drafts: Vec<Draft> = Vec::with_capacity(a_graph.len() + f_graph.len());
    let mut cell_of_a: Vec<Option<NodeId>> = vec![None; a_graph.len()];
    let mut realize: Vec<Option<NodeId>> = vec![None; f_graph.len()];
    let push = |drafts: &mut Vec<Draft>, name: &str, rank: Rank, cell: Cell| {
        drafts.push(Draft {
            name: name.to_string(),
            rank,
            cell,
        });
        NodeId(drafts.len() - 1)
    };

    let f_to_a = m.inverse();
    for &f in f_graph.inputs() {
        let id = push(
            &mut drafts,
            &f_graph.node(f).name,
            Rank::Input,
            Cell::plain(&f_graph.node(f).name, GateType::Input, Vec::new()),
        );
        realize[f.0] = Some(id);
        if let Some(&a) = f_to_a.get(&f) {
            if a_graph.node(a).kind == GateType::Input {
                cell_of_a[a.0] = Some(id);
            }
        }
    }
    let mut extra_inputs = Vec::new();
    for &a in a_graph.inputs() {
        if cell_of_a[a.0].is_none() {
            let name = &a_graph.node(a).name;
            let id = push(&mut drafts, name, Rank::Appearance, Cell::plain(name, GateType::Input, Vec::new()));
            cell_of_a[a.0] = Some(id);
            extra_inputs.push(id);
        }
    }

    for k in 0..depth {
        let mut pending_f: Vec<NodeId> = Vec::new();
        for &a in la.layers.get(k).map_or(&[][..], |l| l.as_slice()) {
            if cell_of_a[a.0].is_some() {
                continue;
            }
            let an = a_graph.node(a);
            let app_inputs: Vec<NodeId> = an
                .fanin
                .iter()
                .map(|p| cell_of_a[p.0].expect("A predecessors sit in lower layers"))
                .collect();
            let mut placed = false;
            if let Some(&f) = m.pairs.get(&a) {
                let fnode = f_graph.node(f);
                let true_inputs: Vec<NodeId> = fnode
                    .fanin
                    .iter()
                    .map(|p| realize[p.0].expect("F predecessors sit in lower layers"))
                    .collect();
                let mut full = app_inputs.clone();
                for t in &true_inputs {
                    if !full.contains(t) {
                        full.push(*t);
                    }
                }
                if an.kind != GateType::Input
                    && fnode.kind != GateType::Input
                    && covert_pair_allowed(an.kind, full.len(), fnode.kind, true_inputs.len())
                {
                    let cell = Cell::covert(
                        &an.name,
                        GateSpec::new(an.kind, full),
                        GateSpec::new(fnode.kind, true_inputs),
                    );
                    let id = push(&mut drafts, &an.name, Rank::Appearance, cell);
                    cell_of_a[a.0] = Some(id);
                    realize[f.0] = Some(id);
                    placed = true;
                } else {
                    pending_f.push(f);
                }
            }
            if !placed {
                let id = push(&mut drafts, &an.name, Rank::Appearance, decoy(&an.name, an.kind, app_inputs));
                cell_of_a[a.0] = Some(id);
            }
        }
        for &f in lf.layers.get(k).map_or(&[][..], |l| l.as_slice()) {
            if realize[f.0].is_none() && !pending_f.contains(&f) {
                pending_f.push(f);
            }
        }
        pending_f.sort();
        for f in pending_f {
            let fnode = f_graph.node(f);
            let true_inputs: Vec<NodeId> = fnode
                .fanin
                .iter()
                .map(|p| realize[p.0].expect("F predecessors sit in lower layers"))
                .collect();
            let mut cell = Cell::plain(&fnode.name, fnode.kind, true_inputs);
            cell.exposed = true;
            let id = push(&mut drafts, &fnode.name, Rank::Exposed, cell);
            realize[f.0] = Some(id);
        }
    }

    let names = unique_names(&drafts);
    let cells: Vec<Cell> = drafts
        .into_iter()
        .zip(names)
        .map(|(d, name)| Cell { name, ..d.cell })
        .collect();
    let mut inputs: Vec<NodeId> = f_graph
        .inputs()
        .iter()
        .map(|f| realize[f.0].expect("F inputs are realized first"))
        .collect();
    inputs.extend(extra_inputs);
    let outputs = f_graph
        .outputs()
        .iter()
        .map(|o| Port {
            node: realize[o.node.0].expect("every F node is realized"),
            name: o.name.clone(),
        })
        .collect();
    CamouflagedNetlist::new(cells, inputs, outputs)
}

/// A cell that looks like `kind` but whose output carries no functional
/// dependence on anything except, at most, its first input.
fn decoy(name: &str, kind: GateType, inputs: Vec<NodeId>) -> Cell {
    use GateType::*;
    let truth = match kind {
        Buf | Not => GateSpec::new(Const0, Vec::new()),
        Nand | Nor => GateSpec::new(Not, vec![inputs[0]]),
        And | Or | Xor | Xnor => GateSpec::new(Buf, vec![inputs[0]]),
        Input | Output | Const0 | Const1 => return Cell::plain(name, kind, inputs),
    };
    Cell::covert(name, GateSpec::new(kind, inputs), truth)
}

fn unique_names(drafts: &[Draft]) -> Vec<String> {
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by_key(|&i| (drafts[i].rank, i));
    let preferred: HashSet<&str> = drafts.iter().map(|d| d.name.as_str()).collect();
    let mut used: HashSet<String> = HashSet::new();
    let mut out = vec![String::new(); drafts.len()];
    for i in order {
        let base = &drafts[i].name;
        let mut name = base.clone();
        let mut n = 1;
        while used.contains(&name) || (name != *base && preferred.contains(name.as_str())) {
            name = format!("{base}_{n}");
            n += 1;
        }
        used.insert(name.clone());
        out[i] = name;
    }
    out
}

/// Normalised symmetric difference between the name-keyed edge multisets of
/// `appearance` and `reference`, relative to the reference edge count.
pub fn edge_mismatch_ratio(appearance: &Netlist, reference: &Netlist) -> f64 {
    let edges = |n: &Netlist| {
        let mut m: BTreeMap<(String, String), i64> = BTreeMap::new();
        for (s, d) in n.edges() {
            *m.entry((n.node(s).name.clone(), n.node(d).name.clone())).or_default() += 1;
        }
        m
    };
    let ea = edges(appearance);
    let er = edges(reference);
    let mut diff = 0i64;
    for (k, &c) in &ea {
        diff += (c - er.get(k).copied().unwrap_or(0)).abs();
    }
    for (k, &c) in &er {
        if !ea.contains_key(k) {
            diff += c;
        }
    }
    let total = reference.edge_count();
    if total == 0 {
        return if diff == 0 { 0.0 } else { f64::INFINITY };
    }
    diff as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::super::{match_graphs, CostConfig};
    use super::*;
    use crate::netlist::{parse_bench, TruthTable};

    fn bench(name: &str) -> Netlist {
        let text = std::fs::read_to_string(format!("{}/../../benchmarks/{name}.bench", env!("CARGO_MANIFEST_DIR"))).unwrap();
        parse_bench(&text).unwrap()
    }

    fn deploy(a: &Netlist, f: &Netlist) -> CamouflagedNetlist {
        let r = match_graphs(a, f, &CostConfig::default()).unwrap();
        deploy_covert(a, f, &r.mapping).unwrap()
    }

    #[test]
    fn identity_on_equal_graphs() {
        let n = bench("c17");
        let camo = deploy(&n, &n);
        assert!(camo.cells().iter().all(|c| c.is_identity() && !c.exposed));
        let (app, fun) = camo.views().unwrap();
        assert_eq!(app, n);
        assert_eq!(fun, n);
        assert_eq!(edge_mismatch_ratio(&app, &n), 0.0);
    }

    #[test]
    fn nand_hides_not() {
        let a = parse_bench("INPUT(x)\nINPUT(y)\nOUTPUT(g)\ng = NAND(x, y)\n").unwrap();
        let f = parse_bench("INPUT(x)\nINPUT(y)\nOUTPUT(g)\ng = NOT(x)\n").unwrap();
        let camo = deploy(&a, &f);
        let g = camo.cell(camo.outputs()[0].node);
        assert_eq!(g.apparent.kind, GateType::Nand);
        assert_eq!(g.true_fn.kind, GateType::Not);
        assert_eq!(g.dummy, vec![1]);
        let fun = camo.function_view().unwrap();
        assert_eq!(TruthTable::of(&fun).unwrap(), TruthTable::of(&f).unwrap());
        assert_eq!(camo.appearance_view().unwrap(), a);
    }

    #[test]
    fn c17_under_mux4_is_exact() {
        let a = bench("mux_4");
        let f = bench("c17");
        let camo = deploy(&a, &f);
        let fun = camo.function_view().unwrap();
        assert_eq!(fun.input_names()[..5], f.input_names()[..]);
        assert_eq!(fun.inputs().len(), 6, "one spare mux select line is padding");
        let (got, want) = (TruthTable::of(&fun).unwrap(), TruthTable::of(&f).unwrap());
        for row in 0..32 {
            assert_eq!(got.row(row), want.row(row));
        }
        let app = camo.appearance_view().unwrap();
        for node in a.nodes() {
            if node.kind != GateType::Input {
                assert!(app.find(&node.name).is_some(), "{}", node.name);
            }
        }
    }

    #[test]
    fn every_pairing_is_sound() {
        let names = ["c17", "mux_4", "full_adder", "decoder_2to4", "mixed5", "cmp2"];
        for an in names {
            for fname in names {
                let (a, f) = (bench(an), bench(fname));
                let camo = deploy(&a, &f);
                let fun = camo.function_view().unwrap();
                let got = TruthTable::of(&fun).unwrap();
                // Extra appearance inputs come last and are held at 0.
                let want = TruthTable::of(&f).unwrap();
                for row in 0..want.rows() {
                    assert_eq!(got.row(row), want.row(row), "{an} hiding {fname}, row {row}");
                }
            }
        }
    }

    #[test]
    fn fidelity_counts_edge_changes() {
        let a = parse_bench("INPUT(x)\nINPUT(y)\nOUTPUT(g)\ng = AND(x, y)\n").unwrap();
        let b = parse_bench("INPUT(x)\nINPUT(y)\nOUTPUT(g)\ng = AND(x, x)\n").unwrap();
        assert_eq!(edge_mismatch_ratio(&a, &a), 0.0);
        assert_eq!(edge_mismatch_ratio(&b, &a), 1.0);
    }
}
