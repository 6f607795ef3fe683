//! Gate-level netlist representation.
//!
//! A [`Netlist`] is an immutable DAG of typed gates. Primary inputs are
//! `INPUT` nodes; primary outputs are markers on driver nodes, so a node
//! count is always "inputs + gates".

mod bench;
mod camo;
mod level;
pub mod random;
pub mod sim;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{parse_bench, write_bench, ParseError};
pub use camo::{covert_pair_allowed, CamoError, CamouflagedNetlist, Cell, GateSpec};
pub use level::{levelize, Levelization};
pub use sim::{
    agreement, simulate, simulate_words, Agreement, PaddingMap, SimError, TruthTable,
    DEFAULT_TRUTH_TABLE_CAP,
};

/// Gate vocabulary shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    Input,
    Output,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Const0,
    Const1,
}

impl GateType {
    pub const ALL: [GateType; 12] = [
        GateType::Input,
        GateType::Output,
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buf,
        GateType::Const0,
        GateType::Const1,
    ];

    /// Logic gates that may appear as netlist nodes other than inputs.
    pub const LOGIC: [GateType; 10] = [
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buf,
        GateType::Const0,
        GateType::Const1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateType::Input => "INPUT",
            GateType::Output => "OUTPUT",
            GateType::And => "AND",
            GateType::Nand => "NAND",
            GateType::Or => "OR",
            GateType::Nor => "NOR",
            GateType::Xor => "XOR",
            GateType::Xnor => "XNOR",
            GateType::Not => "NOT",
            GateType::Buf => "BUF",
            GateType::Const0 => "CONST0",
            GateType::Const1 => "CONST1",
        }
    }

    pub fn is_source(self) -> bool {
        matches!(self, GateType::Input | GateType::Const0 | GateType::Const1)
    }

    pub fn is_const(self) -> bool {
        matches!(self, GateType::Const0 | GateType::Const1)
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateType::Not | GateType::Buf | GateType::Output)
    }

    pub fn is_multi_input(self) -> bool {
        matches!(
            self,
            GateType::And
                | GateType::Nand
                | GateType::Or
                | GateType::Nor
                | GateType::Xor
                | GateType::Xnor
        )
    }

    /// Whether `n` inputs is a legal fan-in for this gate kind.
    pub fn arity_ok(self, n: usize) -> bool {
        if self.is_source() {
            n == 0
        } else if self.is_unary() {
            n == 1
        } else {
            n >= 2
        }
    }

    /// Evaluate the gate on 64 packed input patterns at once.
    pub fn eval_words(self, inputs: &[u64]) -> u64 {
        match self {
            GateType::Input => unreachable!("inputs are not evaluated"),
            GateType::Const0 => 0,
            GateType::Const1 => !0,
            GateType::Output | GateType::Buf => inputs[0],
            GateType::Not => !inputs[0],
            GateType::And => inputs.iter().fold(!0, |acc, w| acc & w),
            GateType::Nand => !inputs.iter().fold(!0, |acc, w| acc & w),
            GateType::Or => inputs.iter().fold(0, |acc, w| acc | w),
            GateType::Nor => !inputs.iter().fold(0, |acc, w| acc | w),
            GateType::Xor => inputs.iter().fold(0, |acc, w| acc ^ w),
            GateType::Xnor => !inputs.iter().fold(0, |acc, w| acc ^ w),
        }
    }

    pub fn eval(self, inputs: &[bool]) -> bool {
        let words: Vec<u64> = inputs.iter().map(|&b| if b { 1 } else { 0 }).collect();
        self.eval_words(&words) & 1 == 1
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateType {
    type Err = String;

    /// Case-insensitive; accepts the common `BUFF` spelling from ISCAS files.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = match s.to_ascii_uppercase().as_str() {
            "INPUT" => GateType::Input,
            "OUTPUT" => GateType::Output,
            "AND" => GateType::And,
            "NAND" => GateType::Nand,
            "OR" => GateType::Or,
            "NOR" => GateType::Nor,
            "XOR" => GateType::Xor,
            "XNOR" => GateType::Xnor,
            "NOT" | "INV" => GateType::Not,
            "BUF" | "BUFF" => GateType::Buf,
            "CONST0" => GateType::Const0,
            "CONST1" => GateType::Const1,
            other => return Err(format!("unknown gate type `{other}`")),
        };
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: GateType,
    pub fanin: Vec<NodeId>,
}

/// A primary output: a named marker on a driver node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub node: NodeId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("node {node} (`{name}`) has kind {kind} with illegal fan-in {fanin}")]
    Arity {
        node: NodeId,
        name: String,
        kind: GateType,
        fanin: usize,
    },
    #[error("node `{name}` references missing node {target}")]
    DanglingRef { name: String, target: NodeId },
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("duplicate primary output name `{0}`")]
    DuplicateOutput(String),
    #[error("primary input list entry {0} is not an INPUT node")]
    NotAnInput(NodeId),
    #[error("INPUT node `{0}` is not listed as a primary input")]
    UnlistedInput(String),
    #[error("primary output `{name}` references missing node {target}")]
    BadOutput { name: String, target: NodeId },
    #[error("OUTPUT is a port marker, not a node kind (node `{0}`)")]
    OutputNode(String),
    #[error("combinational cycle through `{0}`")]
    Cycle(String),
}

/// Immutable, validated gate-level DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<Port>,
    topo: Vec<NodeId>,
}

impl Netlist {
    /// Build and validate a netlist.
    pub fn new(
        nodes: Vec<Node>,
        inputs: Vec<NodeId>,
        outputs: Vec<Port>,
    ) -> Result<Self, NetlistError> {
        let mut names: HashMap<&str, NodeId> = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if names.insert(n.name.as_str(), NodeId(i)).is_some() {
                return Err(NetlistError::DuplicateName(n.name.clone()));
            }
            if n.kind == GateType::Output {
                return Err(NetlistError::OutputNode(n.name.clone()));
            }
            if !n.kind.arity_ok(n.fanin.len()) {
                return Err(NetlistError::Arity {
                    node: NodeId(i),
                    name: n.name.clone(),
                    kind: n.kind,
                    fanin: n.fanin.len(),
                });
            }
            if let Some(bad) = n.fanin.iter().find(|f| f.0 >= nodes.len()) {
                return Err(NetlistError::DanglingRef {
                    name: n.name.clone(),
                    target: *bad,
                });
            }
        }
        let mut listed = vec![false; nodes.len()];
        for &pi in &inputs {
            if pi.0 >= nodes.len() || nodes[pi.0].kind != GateType::Input || listed[pi.0] {
                return Err(NetlistError::NotAnInput(pi));
            }
            listed[pi.0] = true;
        }
        if let Some((_, n)) = nodes
            .iter()
            .enumerate()
            .find(|(i, n)| n.kind == GateType::Input && !listed[*i])
        {
            return Err(NetlistError::UnlistedInput(n.name.clone()));
        }
        let mut po_names = std::collections::HashSet::new();
        for po in &outputs {
            if po.node.0 >= nodes.len() {
                return Err(NetlistError::BadOutput {
                    name: po.name.clone(),
                    target: po.node,
                });
            }
            if !po_names.insert(po.name.as_str()) {
                return Err(NetlistError::DuplicateOutput(po.name.clone()));
            }
        }
        let topo = level::kahn_order(&nodes)?;
        Ok(Netlist {
            nodes,
            inputs,
            outputs,
            topo,
        })
    }

    pub fn empty() -> Self {
        Netlist {
            nodes: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            topo: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Port] {
        &self.outputs
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .map(|id| self.nodes[id.0].name.as_str())
            .collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|p| p.name.as_str()).collect()
    }

    /// Nodes in a topological order (Kahn's algorithm, ties by node id).
    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .map(NodeId)
    }

    /// Name → id index; built on demand since lookups are rare.
    pub fn name_index(&self) -> HashMap<&str, NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.as_str(), NodeId(i)))
            .collect()
    }

    /// Number of gates (non-input nodes).
    pub fn gate_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind != GateType::Input)
            .count()
    }

    /// Directed edge count: one per fan-in reference.
    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.fanin.len()).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.fanin.iter().map(move |&src| (src, NodeId(i))))
    }

    /// Fan-out lists, one per node, in ascending consumer order.
    pub fn fanouts(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (src, dst) in self.edges() {
            out[src.0].push(dst);
        }
        out
    }

    pub fn is_output_driver(&self, id: NodeId) -> bool {
        self.outputs.iter().any(|p| p.node == id)
    }

    /// Keep only nodes in the transitive fan-in of the outputs (inputs are
    /// always kept so the interface is unchanged).
    pub fn prune_unobserved(&self) -> Netlist {
        let mut keep = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = self.outputs.iter().map(|p| p.node).collect();
        while let Some(id) = stack.pop() {
            if keep[id.0] {
                continue;
            }
            keep[id.0] = true;
            stack.extend(self.nodes[id.0].fanin.iter().copied());
        }
        for &pi in &self.inputs {
            keep[pi.0] = true;
        }
        self.retain(&keep)
    }

    fn retain(&self, keep: &[bool]) -> Netlist {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep[i] {
                remap[i] = nodes.len();
                nodes.push(n.clone());
            }
        }
        for n in &mut nodes {
            for f in &mut n.fanin {
                *f = NodeId(remap[f.0]);
            }
        }
        let inputs = self.inputs.iter().map(|i| NodeId(remap[i.0])).collect();
        let outputs = self
            .outputs
            .iter()
            .map(|p| Port {
                node: NodeId(remap[p.node.0]),
                name: p.name.clone(),
            })
            .collect();
        Netlist::new(nodes, inputs, outputs).expect("subset of a valid netlist is valid")
    }
}

/// Incremental construction helper keyed by signal name.
#[derive(Debug, Default, Clone)]
pub struct NetlistBuilder {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<Port>,
    index: HashMap<String, NodeId>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, name: &str) -> NodeId {
        let id = self.push(name, GateType::Input, Vec::new());
        self.inputs.push(id);
        id
    }

    pub fn gate(&mut self, name: &str, kind: GateType, fanin: &[NodeId]) -> NodeId {
        self.push(name, kind, fanin.to_vec())
    }

    pub fn output(&mut self, node: NodeId, name: &str) {
        self.outputs.push(Port {
            node,
            name: name.to_string(),
        });
    }

    /// Mark a node as output under its own name.
    pub fn output_node(&mut self, node: NodeId) {
        let name = self.nodes[node.0].name.clone();
        self.output(node, &name);
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn build(self) -> Result<Netlist, NetlistError> {
        Netlist::new(self.nodes, self.inputs, self.outputs)
    }

    fn push(&mut self, name: &str, kind: GateType, fanin: Vec<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.index.insert(name.to_string(), id);
        self.nodes.push(Node {
            name: name.to_string(),
            kind,
            fanin,
        });
        id
    }
}
