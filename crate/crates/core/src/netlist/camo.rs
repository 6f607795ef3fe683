//! Dual-view camouflaged netlists built from covert cells.
//!
//! Every cell has an *apparent* gate (what imaging recovers) and a *true*
//! gate (what the silicon computes). True inputs are a subset of the
//! apparent inputs; the remaining apparent pins are electrically inert
//! dummy inputs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GateType, Netlist, NetlistError, Node, NodeId, Port};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateType,
    pub inputs: Vec<NodeId>,
}

impl GateSpec {
    pub fn new(kind: GateType, inputs: Vec<NodeId>) -> Self {
        GateSpec { kind, inputs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub name: String,
    pub apparent: GateSpec,
    pub true_fn: GateSpec,
    /// Apparent fan-in positions absent from the true fan-in.
    pub dummy: Vec<usize>,
    /// Logic that is visible as-is (no appearance cover).
    pub exposed: bool,
}

impl Cell {
    /// A cell whose apparent and true gates coincide.
    pub fn plain(name: &str, kind: GateType, inputs: Vec<NodeId>) -> Self {
        let spec = GateSpec::new(kind, inputs);
        Cell {
            name: name.to_string(),
            apparent: spec.clone(),
            true_fn: spec,
            dummy: Vec::new(),
            exposed: false,
        }
    }

    /// Covert cell; dummy positions are derived from the two fan-in lists.
    pub fn covert(name: &str, apparent: GateSpec, true_fn: GateSpec) -> Self {
        let dummy = dummy_positions(&apparent.inputs, &true_fn.inputs);
        Cell {
            name: name.to_string(),
            apparent,
            true_fn,
            dummy,
            exposed: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.apparent == self.true_fn
    }
}

fn dummy_positions(apparent: &[NodeId], truth: &[NodeId]) -> Vec<usize> {
    let live: HashSet<NodeId> = truth.iter().copied().collect();
    apparent
        .iter()
        .enumerate()
        .filter(|(_, id)| !live.contains(id))
        .map(|(i, _)| i)
        .collect()
}

/// Whether a covert cell may appear as `apparent` (with `app_arity` pins)
/// while computing `truth` (with `true_arity` live inputs).
pub fn covert_pair_allowed(
    apparent: GateType,
    app_arity: usize,
    truth: GateType,
    true_arity: usize,
) -> bool {
    use GateType::*;
    if !apparent.arity_ok(app_arity) || !truth.arity_ok(true_arity) {
        return false;
    }
    if apparent == truth {
        return true_arity <= app_arity;
    }
    match apparent {
        Buf | Not => matches!(truth, Const0 | Const1),
        Nand | Nor => truth == Not,
        And | Or => truth == Buf,
        Xor | Xnor => true_arity <= 2 && !matches!(truth, Input | Output),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CamoError {
    #[error("cell `{name}`: {apparent} cannot hide {truth}")]
    IllegalPair {
        name: String,
        apparent: GateType,
        truth: GateType,
    },
    #[error("cell `{0}`: true input is not among the apparent inputs")]
    NotContained(String),
    #[error("cell `{0}`: dummy positions disagree with the fan-in lists")]
    DummyMismatch(String),
    #[error("appearance view: {0}")]
    Appearance(NetlistError),
    #[error("function view: {0}")]
    Function(NetlistError),
    #[error("unknown cell `{0}` in document")]
    UnknownCell(String),
    #[error("malformed document: {0}")]
    Json(String),
}

/// A netlist whose every node is a covert cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CamouflagedNetlist {
    cells: Vec<Cell>,
    inputs: Vec<NodeId>,
    outputs: Vec<Port>,
}

impl CamouflagedNetlist {
    pub fn new(cells: Vec<Cell>, inputs: Vec<NodeId>, outputs: Vec<Port>) -> Result<Self, CamoError> {
        let c = CamouflagedNetlist {
            cells,
            inputs,
            outputs,
        };
        c.validate()?;
        Ok(c)
    }

    /// Every node read as its own cell, apparent and true alike.
    pub fn identity(n: &Netlist) -> Self {
        let cells = n
            .nodes()
            .iter()
            .map(|x| Cell::plain(&x.name, x.kind, x.fanin.clone()))
            .collect();
        CamouflagedNetlist {
            cells,
            inputs: n.inputs().to_vec(),
            outputs: n.outputs().to_vec(),
        }
    }

    fn validate(&self) -> Result<(), CamoError> {
        for cell in &self.cells {
            let (a, t) = (&cell.apparent, &cell.true_fn);
            if !covert_pair_allowed(a.kind, a.inputs.len(), t.kind, t.inputs.len()) {
                return Err(CamoError::IllegalPair {
                    name: cell.name.clone(),
                    apparent: a.kind,
                    truth: t.kind,
                });
            }
            let apparent: HashSet<NodeId> = a.inputs.iter().copied().collect();
            for id in &t.inputs {
                let const_driver = self
                    .cells
                    .get(id.0)
                    .is_some_and(|c| c.true_fn.kind.is_const());
                if !apparent.contains(id) && !const_driver {
                    return Err(CamoError::NotContained(cell.name.clone()));
                }
            }
            if cell.dummy != dummy_positions(&a.inputs, &t.inputs) {
                return Err(CamoError::DummyMismatch(cell.name.clone()));
            }
        }
        self.appearance_view().map_err(CamoError::Appearance)?;
        self.function_view().map_err(CamoError::Function)?;
        Ok(())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: NodeId) -> &Cell {
        &self.cells[id.0]
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Port] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells whose apparent and true readings differ.
    pub fn covert_cells(&self) -> Vec<NodeId> {
        (0..self.cells.len())
            .filter(|&i| !self.cells[i].is_identity())
            .map(NodeId)
            .collect()
    }

    pub fn exposed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.exposed).count()
    }

    fn build_view(&self, pick: impl Fn(&Cell, usize) -> (GateType, Vec<NodeId>)) -> Result<Netlist, NetlistError> {
        let nodes = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (kind, fanin) = pick(c, i);
                Node {
                    name: c.name.clone(),
                    kind,
                    fanin,
                }
            })
            .collect();
        Netlist::new(nodes, self.inputs.clone(), self.outputs.clone())
    }

    /// What imaging recovers: every cell read through its apparent gate.
    pub fn appearance_view(&self) -> Result<Netlist, NetlistError> {
        self.build_view(|c, _| (c.apparent.kind, c.apparent.inputs.clone()))
    }

    /// What the silicon computes: dummy pins dropped, constant cells become
    /// constant drivers.
    pub fn function_view(&self) -> Result<Netlist, NetlistError> {
        self.build_view(|c, _| (c.true_fn.kind, c.true_fn.inputs.clone()))
    }

    /// Both views at once.
    pub fn views(&self) -> Result<(Netlist, Netlist), CamoError> {
        Ok((
            self.appearance_view().map_err(CamoError::Appearance)?,
            self.function_view().map_err(CamoError::Function)?,
        ))
    }

    /// Read covert cell `covert[i]` as true when `key[i]` is set and as
    /// apparent otherwise; identity cells are unaffected.
    pub fn keyed_view(&self, covert: &[NodeId], key: &[bool]) -> Result<Netlist, NetlistError> {
        let mut use_true = vec![true; self.cells.len()];
        for (id, &k) in covert.iter().zip(key) {
            use_true[id.0] = k;
        }
        self.build_view(|c, i| {
            if use_true[i] {
                (c.true_fn.kind, c.true_fn.inputs.clone())
            } else {
                (c.apparent.kind, c.apparent.inputs.clone())
            }
        })
    }

    /// Copy with the given cells' apparent gate replaced by their true gate.
    pub fn reveal(&self, ids: &[NodeId]) -> CamouflagedNetlist {
        let mut out = self.clone();
        for id in ids {
            let c = &mut out.cells[id.0];
            c.apparent = c.true_fn.clone();
            c.dummy.clear();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("camouflage document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CamoError> {
        let doc: CamoDoc = serde_json::from_str(text).map_err(|e| CamoError::Json(e.to_string()))?;
        Self::from_doc(doc)
    }

    fn to_doc(&self) -> CamoDoc {
        let name = |id: &NodeId| self.cells[id.0].name.clone();
        CamoDoc {
            cells: self
                .cells
                .iter()
                .map(|c| CellDoc {
                    id: c.name.clone(),
                    apparent: SpecDoc {
                        kind: c.apparent.kind,
                        inputs: c.apparent.inputs.iter().map(name).collect(),
                    },
                    truth: SpecDoc {
                        kind: c.true_fn.kind,
                        inputs: c.true_fn.inputs.iter().map(name).collect(),
                    },
                    dummy: c.dummy.clone(),
                    exposed: c.exposed,
                })
                .collect(),
            pis: self.inputs.iter().map(name).collect(),
            pos: self
                .outputs
                .iter()
                .map(|p| PortDoc {
                    name: p.name.clone(),
                    id: name(&p.node),
                })
                .collect(),
        }
    }

    fn from_doc(doc: CamoDoc) -> Result<Self, CamoError> {
        let index: HashMap<&str, NodeId> = doc
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), NodeId(i)))
            .collect();
        let look = |s: &String| {
            index
                .get(s.as_str())
                .copied()
                .ok_or_else(|| CamoError::UnknownCell(s.clone()))
        };
        let looks = |v: &[String]| v.iter().map(look).collect::<Result<Vec<_>, _>>();
        let mut cells = Vec::with_capacity(doc.cells.len());
        for c in &doc.cells {
            cells.push(Cell {
                name: c.id.clone(),
                apparent: GateSpec::new(c.apparent.kind, looks(&c.apparent.inputs)?),
                true_fn: GateSpec::new(c.truth.kind, looks(&c.truth.inputs)?),
                dummy: c.dummy.clone(),
                exposed: c.exposed,
            });
        }
        let inputs = looks(&doc.pis)?;
        let outputs = doc
            .pos
            .iter()
            .map(|p| {
                Ok(Port {
                    node: look(&p.id)?,
                    name: p.name.clone(),
                })
            })
            .collect::<Result<Vec<_>, CamoError>>()?;
        CamouflagedNetlist::new(cells, inputs, outputs)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    #[serde(rename = "type")]
    kind: GateType,
    inputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    id: String,
    apparent: SpecDoc,
    #[serde(rename = "true")]
    truth: SpecDoc,
    dummy: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    exposed: bool,
}

#[derive(Serialize, Deserialize)]
struct PortDoc {
    name: String,
    id: String,
}

#[derive(Serialize, Deserialize)]
struct CamoDoc {
    cells: Vec<CellDoc>,
    pis: Vec<String>,
    pos: Vec<PortDoc>,
}

#[cfg(test)]
mod tests {
    use super::super::{parse_bench, TruthTable};
    use super::*;

    fn two_input(kind_a: GateType, true_spec: GateSpec) -> CamouflagedNetlist {
        let cells = vec![
            Cell::plain("a", GateType::Input, vec![]),
            Cell::plain("b", GateType::Input, vec![]),
            Cell::covert(
                "y",
                GateSpec::new(kind_a, vec![NodeId(0), NodeId(1)]),
                true_spec,
            ),
        ];
        CamouflagedNetlist::new(
            cells,
            vec![NodeId(0), NodeId(1)],
            vec![Port {
                node: NodeId(2),
                name: "y".into(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn fake_nand_functions_as_inverter() {
        let c = two_input(GateType::Nand, GateSpec::new(GateType::Not, vec![NodeId(0)]));
        assert_eq!(c.cell(NodeId(2)).dummy, vec![1]);
        let (app, func) = c.views().unwrap();
        assert_eq!(app.node(NodeId(2)).kind, GateType::Nand);
        assert_eq!(func.node(NodeId(2)).kind, GateType::Not);
        let tt = TruthTable::of(&func).unwrap();
        // y = NOT(a) regardless of b
        assert_eq!((0..4).map(|r| tt.bit(r, 0)).collect::<Vec<_>>(), vec![true, false, true, false]);
    }

    #[test]
    fn fake_buffer_is_constant() {
        let cells = vec![
            Cell::plain("a", GateType::Input, vec![]),
            Cell::covert(
                "y",
                GateSpec::new(GateType::Buf, vec![NodeId(0)]),
                GateSpec::new(GateType::Const0, vec![]),
            ),
        ];
        let c = CamouflagedNetlist::new(
            cells,
            vec![NodeId(0)],
            vec![Port {
                node: NodeId(1),
                name: "y".into(),
            }],
        )
        .unwrap();
        let func = c.function_view().unwrap();
        assert_eq!(func.node(NodeId(1)).kind, GateType::Const0);
        assert!(func.node(NodeId(1)).fanin.is_empty());
        assert_eq!(c.cell(NodeId(1)).dummy, vec![0]);
    }

    #[test]
    fn identity_views_coincide() {
        let n = parse_bench(include_str!("../../../../benchmarks/c17.bench")).unwrap();
        let c = CamouflagedNetlist::identity(&n);
        let (app, func) = c.views().unwrap();
        assert_eq!(app, n);
        assert_eq!(func, n);
        assert!(c.covert_cells().is_empty());
    }

    #[test]
    fn illegal_pairs_are_rejected() {
        let cells = vec![
            Cell::plain("a", GateType::Input, vec![]),
            Cell::plain("b", GateType::Input, vec![]),
            Cell::covert(
                "y",
                GateSpec::new(GateType::And, vec![NodeId(0), NodeId(1)]),
                GateSpec::new(GateType::Not, vec![NodeId(0)]),
            ),
        ];
        let err = CamouflagedNetlist::new(cells, vec![NodeId(0), NodeId(1)], vec![]).unwrap_err();
        assert!(matches!(err, CamoError::IllegalPair { .. }));
    }

    #[test]
    fn true_inputs_must_be_contained() {
        let cells = vec![
            Cell::plain("a", GateType::Input, vec![]),
            Cell::plain("b", GateType::Input, vec![]),
            Cell::covert(
                "y",
                GateSpec::new(GateType::Not, vec![NodeId(0)]),
                GateSpec::new(GateType::Not, vec![NodeId(1)]),
            ),
        ];
        let err = CamouflagedNetlist::new(cells, vec![NodeId(0), NodeId(1)], vec![]).unwrap_err();
        assert!(matches!(err, CamoError::NotContained(_)));
    }

    #[test]
    fn pair_table() {
        use GateType::*;
        assert!(covert_pair_allowed(Nand, 2, Not, 1));
        assert!(covert_pair_allowed(Nor, 3, Not, 1));
        assert!(covert_pair_allowed(And, 2, Buf, 1));
        assert!(covert_pair_allowed(Xor, 2, And, 2));
        assert!(covert_pair_allowed(Xnor, 3, Not, 1));
        assert!(!covert_pair_allowed(Xor, 3, And, 3));
        assert!(covert_pair_allowed(Buf, 1, Const1, 0));
        assert!(covert_pair_allowed(Not, 1, Const0, 0));
        assert!(covert_pair_allowed(Nand, 3, Nand, 2));
        assert!(!covert_pair_allowed(Nand, 2, Nand, 3));
        assert!(!covert_pair_allowed(Buf, 1, Not, 1));
        assert!(!covert_pair_allowed(Input, 0, Const0, 0));
    }

    #[test]
    fn json_field_names() {
        let c = two_input(GateType::Nand, GateSpec::new(GateType::Not, vec![NodeId(0)]));
        let text = c.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let cell = &v["cells"][2];
        assert_eq!(cell["id"], "y");
        assert_eq!(cell["apparent"]["type"], "NAND");
        assert_eq!(cell["true"]["type"], "NOT");
        assert_eq!(cell["true"]["inputs"][0], "a");
        assert_eq!(cell["dummy"][0], 1);
        assert_eq!(v["pis"][1], "b");
        assert_eq!(v["pos"][0]["id"], "y");
        assert_eq!(CamouflagedNetlist::from_json(&text).unwrap(), c);
    }
}
