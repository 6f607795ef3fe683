use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Partition, PartitionError};
use crate::netlist::{CamouflagedNetlist, Cell, GateSpec, GateType, Netlist, Node, NodeId, Port};

/// A net crossing block boundaries: driven in `source`, read in `sinks`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryNet {
    /// Original node name; also the pseudo-PI name in every sink piece.
    pub net: String,
    pub source: usize,
    /// Pseudo-PO name in the source piece.
    pub source_port: String,
    pub sinks: Vec<usize>,
}

/// Everything needed to stitch pieces back into one circuit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMap {
    /// Original primary inputs in order, with the piece holding each.
    pub inputs: Vec<(String, usize)>,
    /// Original primary outputs in order, with the piece exposing each.
    pub outputs: Vec<(String, usize)>,
    pub nets: Vec<BoundaryNet>,
}

impl BoundaryMap {
    /// True when no net crosses a block boundary.
    pub fn is_empty(&self) -> bool {
        self.nets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub block: usize,
    pub netlist: Netlist,
}

/// Cut every block out as a standalone netlist. Original nodes keep their
/// relative order; pseudo-PIs follow them.
pub fn extract_pieces(n: &Netlist, p: &Partition) -> (Vec<Piece>, BoundaryMap) {
    assert_eq!(p.assignment.len(), n.len(), "partition does not cover netlist");
    let fanouts = n.fanouts();
    let block = |v: NodeId| p.assignment[v.0];
    let mut map = BoundaryMap {
        inputs: n.inputs().iter().map(|&v| (n.node(v).name.clone(), block(v))).collect(),
        outputs: n.outputs().iter().map(|o| (o.name.clone(), block(o.node))).collect(),
        nets: Vec::new(),
    };

    let mut port_names: Vec<HashSet<&str>> = vec![HashSet::new(); p.k];
    for o in n.outputs() {
        port_names[block(o.node)].insert(o.name.as_str());
    }
    let mut leaving: Vec<Option<String>> = vec![None; n.len()];
    for (v, node) in n.nodes().iter().enumerate() {
        let b = p.assignment[v];
        let mut sinks: Vec<usize> = fanouts[v].iter().map(|&u| block(u)).filter(|&s| s != b).collect();
        if sinks.is_empty() {
            continue;
        }
        sinks.sort_unstable();
        sinks.dedup();
        let reuse = n.outputs().iter().any(|o| o.node.0 == v && o.name == node.name);
        let mut port = node.name.clone();
        if !reuse {
            while port_names[b].contains(port.as_str()) {
                port.push_str("__out");
            }
        }
        leaving[v] = Some(port.clone());
        map.nets.push(BoundaryNet {
            net: node.name.clone(),
            source: b,
            source_port: port,
            sinks,
        });
    }

    let mut pieces = Vec::with_capacity(p.k);
    for b in 0..p.k {
        let members: Vec<usize> = (0..n.len()).filter(|&v| p.assignment[v] == b).collect();
        let mut local: HashMap<usize, NodeId> = HashMap::new();
        for (i, &v) in members.iter().enumerate() {
            local.insert(v, NodeId(i));
        }
        let mut pseudo: Vec<usize> = members
            .iter()
            .flat_map(|&v| n.node(NodeId(v)).fanin.iter().map(|f| f.0))
            .filter(|&u| p.assignment[u] != b)
            .collect();
        pseudo.sort_unstable();
        pseudo.dedup();
        for (j, &u) in pseudo.iter().enumerate() {
            local.insert(u, NodeId(members.len() + j));
        }

        let mut nodes: Vec<Node> = members
            .iter()
            .map(|&v| {
                let src = n.node(NodeId(v));
                Node {
                    name: src.name.clone(),
                    kind: src.kind,
                    fanin: src.fanin.iter().map(|f| local[&f.0]).collect(),
                }
            })
            .collect();
        nodes.extend(pseudo.iter().map(|&u| Node {
            name: n.node(NodeId(u)).name.clone(),
            kind: GateType::Input,
            fanin: Vec::new(),
        }));

        let mut inputs: Vec<NodeId> = n
            .inputs()
            .iter()
            .filter(|&&v| block(v) == b)
            .map(|v| local[&v.0])
            .collect();
        inputs.extend(pseudo.iter().map(|u| local[u]));

        let mut outputs: Vec<Port> = n
            .outputs()
            .iter()
            .filter(|o| block(o.node) == b)
            .map(|o| Port {
                node: local[&o.node.0],
                name: o.name.clone(),
            })
            .collect();
        for &v in &members {
            if let Some(port) = &leaving[v] {
                if !outputs.iter().any(|o| &o.name == port) {
                    outputs.push(Port {
                        node: local[&v],
                        name: port.clone(),
                    });
                }
            }
        }
        let netlist = Netlist::new(nodes, inputs, outputs).expect("piece of a valid netlist is valid");
        pieces.push(Piece { block: b, netlist });
    }
    (pieces, map)
}

/// Stitch processed pieces back together through the boundary map.
///
/// Cell names are kept when globally unique and prefixed `p{i}_` otherwise.
/// Piece inputs that are neither original PIs nor pseudo-PIs (padding added
/// during processing) are appended after the original PIs.
pub fn recombine(pieces: &[CamouflagedNetlist], map: &BoundaryMap) -> Result<CamouflagedNetlist, PartitionError> {
    let mut sink_nets: Vec<HashMap<&str, &BoundaryNet>> = vec![HashMap::new(); pieces.len()];
    for net in &map.nets {
        if net.source >= pieces.len() {
            return Err(PartitionError::UnresolvedPort(net.net.clone()));
        }
        for &s in &net.sinks {
            if s >= pieces.len() {
                return Err(PartitionError::UnresolvedPort(net.net.clone()));
            }
            sink_nets[s].insert(net.net.as_str(), net);
        }
    }

    // Pass 1: classify cells and reserve global ids for the real ones.
    let mut global: Vec<Vec<Option<usize>>> = Vec::with_capacity(pieces.len());
    let mut pseudo_of: Vec<HashMap<usize, &BoundaryNet>> = vec![HashMap::new(); pieces.len()];
    let mut owners: Vec<(usize, usize)> = Vec::new();
    for (i, piece) in pieces.iter().enumerate() {
        let piece_inputs: HashSet<NodeId> = piece.inputs().iter().copied().collect();
        let mut ids = vec![None; piece.len()];
        for (c, cell) in piece.cells().iter().enumerate() {
            if let Some(net) = sink_nets[i].get(cell.name.as_str()) {
                let is_input = cell.apparent.kind == GateType::Input
                    && cell.true_fn.kind == GateType::Input
                    && piece_inputs.contains(&NodeId(c));
                if !is_input {
                    return Err(PartitionError::BoundaryType(cell.name.clone()));
                }
                pseudo_of[i].insert(c, net);
            } else {
                ids[c] = Some(owners.len());
                owners.push((i, c));
            }
        }
        global.push(ids);
    }

    let port_node = |i: usize, name: &str| -> Option<usize> {
        pieces[i].outputs().iter().find(|o| o.name == name).map(|o| o.node.0)
    };
    // Pass 2: pseudo-PIs resolve to the global id of their source driver.
    let resolve = |i: usize, c: usize| -> Result<usize, PartitionError> {
        let (mut i, mut c) = (i, c);
        for _ in 0..=map.nets.len() {
            if let Some(g) = global[i][c] {
                return Ok(g);
            }
            let net = pseudo_of[i][&c];
            let src = port_node(net.source, &net.source_port)
                .ok_or_else(|| PartitionError::UnresolvedPort(net.source_port.clone()))?;
            i = net.source;
            c = src;
        }
        Err(PartitionError::UnresolvedPort("cyclic boundary chain".into()))
    };

    let mut name_uses: HashMap<&str, usize> = HashMap::new();
    for &(i, c) in &owners {
        *name_uses.entry(pieces[i].cells()[c].name.as_str()).or_default() += 1;
    }
    let mut cells = Vec::with_capacity(owners.len());
    for &(i, c) in &owners {
        let cell = &pieces[i].cells()[c];
        let remap = |spec: &GateSpec| -> Result<GateSpec, PartitionError> {
            let inputs = spec
                .inputs
                .iter()
                .map(|x| resolve(i, x.0).map(NodeId))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GateSpec::new(spec.kind, inputs))
        };
        let name = if name_uses[cell.name.as_str()] > 1 {
            format!("p{i}_{}", cell.name)
        } else {
            cell.name.clone()
        };
        let mut out = Cell::covert(&name, remap(&cell.apparent)?, remap(&cell.true_fn)?);
        out.exposed = cell.exposed;
        cells.push(out);
    }

    let mut inputs = Vec::new();
    let mut claimed: HashSet<(usize, usize)> = HashSet::new();
    for (name, i) in &map.inputs {
        let c = pieces
            .get(*i)
            .and_then(|p| p.inputs().iter().find(|x| &p.cell(**x).name == name))
            .ok_or_else(|| PartitionError::UnresolvedPort(name.clone()))?;
        claimed.insert((*i, c.0));
        inputs.push(NodeId(resolve(*i, c.0)?));
    }
    for (i, piece) in pieces.iter().enumerate() {
        for x in piece.inputs() {
            if !claimed.contains(&(i, x.0)) && !pseudo_of[i].contains_key(&x.0) {
                inputs.push(NodeId(resolve(i, x.0)?));
            }
        }
    }

    let mut outputs = Vec::new();
    for (name, i) in &map.outputs {
        let c = pieces
            .get(*i)
            .and_then(|_| port_node(*i, name))
            .ok_or_else(|| PartitionError::UnresolvedPort(name.clone()))?;
        outputs.push(Port {
            node: NodeId(resolve(*i, c)?),
            name: name.clone(),
        });
    }
    Ok(CamouflagedNetlist::new(cells, inputs, outputs)?)
}

#[cfg(test)]
mod tests {
    use super::super::CircuitGraph;
    use super::*;
    use crate::netlist::{parse_bench, TruthTable};

    fn split(n: &Netlist, assignment: Vec<usize>, k: usize) -> Partition {
        Partition::from_assignment(&CircuitGraph::from_netlist(n), k, assignment)
    }

    fn roundtrip(n: &Netlist, p: &Partition) -> Netlist {
        let (pieces, map) = extract_pieces(n, p);
        let camo: Vec<_> = pieces.iter().map(|x| CamouflagedNetlist::identity(&x.netlist)).collect();
        recombine(&camo, &map).unwrap().function_view().unwrap()
    }

    #[test]
    fn single_piece_is_identity() {
        let n = parse_bench(include_str!("../../../../benchmarks/c17.bench")).unwrap();
        let p = split(&n, vec![0; n.len()], 1);
        let (pieces, map) = extract_pieces(&n, &p);
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].netlist, n);
        assert!(map.is_empty());
        assert_eq!(roundtrip(&n, &p), n);
    }

    #[test]
    fn path_cut_between_b_and_c() {
        let n = parse_bench("INPUT(a)\nOUTPUT(d)\nb = NOT(a)\nc = NOT(b)\nd = NOT(c)\n").unwrap();
        let p = split(&n, vec![0, 0, 1, 1], 2);
        let (pieces, map) = extract_pieces(&n, &p);
        assert_eq!(pieces[0].netlist.output_names(), vec!["b"]);
        assert_eq!(pieces[1].netlist.input_names(), vec!["b"]);
        assert_eq!(map.nets.len(), 1);
        assert_eq!(map.nets[0].sinks, vec![1]);
        let r = roundtrip(&n, &p);
        assert_eq!(TruthTable::of(&r).unwrap(), TruthTable::of(&n).unwrap());
    }

    #[test]
    fn c17_two_way_exhaustive() {
        let n = parse_bench(include_str!("../../../../benchmarks/c17.bench")).unwrap();
        let a: Vec<usize> = (0..n.len()).map(|v| v % 2).collect();
        let p = split(&n, a, 2);
        let r = roundtrip(&n, &p);
        assert_eq!(r.input_names(), n.input_names());
        assert_eq!(TruthTable::of(&r).unwrap(), TruthTable::of(&n).unwrap());
    }

    #[test]
    fn missing_boundary_entry_fails() {
        let n = parse_bench("INPUT(a)\nOUTPUT(d)\nb = NOT(a)\nc = NOT(b)\nd = NOT(c)\n").unwrap();
        let p = split(&n, vec![0, 0, 1, 1], 2);
        let (pieces, mut map) = extract_pieces(&n, &p);
        map.nets[0].source_port = "nope".into();
        let camo: Vec<_> = pieces.iter().map(|x| CamouflagedNetlist::identity(&x.netlist)).collect();
        assert!(matches!(recombine(&camo, &map), Err(PartitionError::UnresolvedPort(_))));
    }

    #[test]
    fn boundary_type_mismatch_fails() {
        let n = parse_bench("INPUT(a)\nOUTPUT(d)\nb = NOT(a)\nc = NOT(b)\nd = NOT(c)\n").unwrap();
        let p = split(&n, vec![0, 0, 1, 1], 2);
        let (_, map) = extract_pieces(&n, &p);
        let fake = parse_bench("INPUT(a)\nOUTPUT(b)\nb = NOT(a)\n").unwrap();
        let bad = parse_bench("INPUT(x)\nOUTPUT(d)\nb = NOT(x)\nc = NOT(b)\nd = NOT(c)\n").unwrap();
        let camo = vec![CamouflagedNetlist::identity(&fake), CamouflagedNetlist::identity(&bad)];
        assert!(matches!(recombine(&camo, &map), Err(PartitionError::BoundaryType(_))));
    }

    #[test]
    fn name_clashes_are_prefixed() {
        let n = parse_bench("INPUT(a)\nOUTPUT(d)\nb = NOT(a)\nc = NOT(b)\nd = NOT(c)\n").unwrap();
        let p = split(&n, vec![0, 0, 1, 1], 2);
        let (pieces, map) = extract_pieces(&n, &p);
        // Piece 1 gains an extra padding input named like a piece-0 node.
        let extra = parse_bench("INPUT(b)\nINPUT(a)\nOUTPUT(d)\nc = NOT(b)\nd = NOT(c)\n").unwrap();
        let camo = vec![
            CamouflagedNetlist::identity(&pieces[0].netlist),
            CamouflagedNetlist::identity(&extra),
        ];
        let r = recombine(&camo, &map).unwrap();
        let f = r.function_view().unwrap();
        assert_eq!(f.inputs().len(), 2);
        assert!(f.find("p0_a").is_some() && f.find("p1_a").is_some());
        assert_eq!(f.input_names()[0], "p0_a");
    }
}
