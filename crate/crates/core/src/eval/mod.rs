//! Scoring of camouflaged netlists.
//!
//! Overheads use logic-level proxies: area counts nodes, power counts wires,
//! delay is logic depth. Node and edge counts include primary-output
//! markers, so c17 has 13 nodes (5 inputs, 6 gates, 2 outputs) and 14 edges.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{
    agreement, levelize, Agreement, CamoError, CamouflagedNetlist, GateType, Netlist, NetlistError, PaddingMap,
    SimError,
};

/// Exhaustive checking of the resilience oracle up to this many inputs.
pub const RESILIENCE_EXHAUSTIVE_LIMIT: usize = 16;
pub const DEFAULT_MAX_KEYS: usize = 16;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("functional reference has no nodes")]
    EmptyReference,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Camo(#[from] CamoError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("{covert} covert cells exceed the key budget of {max}")]
    TooManyKeys { covert: usize, max: usize },
    #[error("invalid F1 value in row `{0}`")]
    InvalidF1(String),
    #[error("document: {0}")]
    Json(String),
}

/// Node, wire and depth counts of one netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub nodes: usize,
    pub edges: usize,
    pub depth: usize,
}

impl Footprint {
    pub fn of(n: &Netlist) -> Self {
        Footprint {
            nodes: n.len() + n.outputs().len(),
            edges: n.edge_count() + n.outputs().len(),
            depth: levelize(n).depth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub area_ratio: f64,
    pub power_ratio: f64,
    pub delay_ratio: f64,
    pub camo: Footprint,
    pub functional: Footprint,
}

fn ratio(a: usize, b: usize) -> f64 {
    match (a, b) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => a as f64 / b as f64,
    }
}

/// Overheads of the fabricated (appearance) structure against the
/// functional netlist. Dummy pins count as wires.
pub fn overheads(camo: &CamouflagedNetlist, functional: &Netlist) -> Result<OverheadReport, EvalError> {
    if functional.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let app = camo.appearance_view()?;
    Ok(overheads_of(&app, functional))
}

/// Overheads of an arbitrary netlist against `functional`.
pub fn overheads_of(fabricated: &Netlist, functional: &Netlist) -> OverheadReport {
    let c = Footprint::of(fabricated);
    let f = Footprint::of(functional);
    OverheadReport {
        area_ratio: ratio(c.nodes, f.nodes),
        power_ratio: ratio(c.edges, f.edges),
        delay_ratio: ratio(c.depth, f.depth),
        camo: c,
        functional: f,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeceptionInput {
    pub f1_expose: f64,
    pub f1_mimicry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeceptionFlag {
    /// `f1_expose == 0` with positive mimicry: the score is `+inf`.
    ZeroExpose,
    /// Both F1 values are zero: the score is reported as 0.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeceptionScore {
    /// `None` stands for `+inf` (see `flag`).
    pub score: Option<f64>,
    pub flag: Option<DeceptionFlag>,
}

impl DeceptionScore {
    pub fn value(&self) -> f64 {
        self.score.unwrap_or(f64::INFINITY)
    }
}

/// `(f1_mimicry - f1_expose) / f1_expose`.
pub fn deception_score(d: DeceptionInput) -> DeceptionScore {
    let (e, m) = (d.f1_expose, d.f1_mimicry);
    if e == 0.0 {
        if m == 0.0 {
            return DeceptionScore {
                score: Some(0.0),
                flag: Some(DeceptionFlag::Undefined),
            };
        }
        return DeceptionScore {
            score: None,
            flag: Some(DeceptionFlag::ZeroExpose),
        };
    }
    DeceptionScore {
        score: Some((m - e) / e),
        flag: None,
    }
}

/// One row of an externally produced GNN evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Row {
    pub name: String,
    pub f1_expose: f64,
    pub f1_mimicry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Input {
    pub rows: Vec<F1Row>,
}

impl F1Input {
    /// Parses and range-checks (`[0, 1]`) an F1 document.
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let doc: F1Input = serde_json::from_str(text).map_err(|e| EvalError::Json(e.to_string()))?;
        for r in &doc.rows {
            let ok = |x: f64| (0.0..=1.0).contains(&x);
            if !ok(r.f1_expose) || !ok(r.f1_mimicry) {
                return Err(EvalError::InvalidF1(r.name.clone()));
            }
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeceptionRow {
    pub name: String,
    pub f1_expose: f64,
    pub f1_mimicry: f64,
    #[serde(flatten)]
    pub score: DeceptionScore,
}

pub fn score_rows(input: &F1Input) -> Vec<DeceptionRow> {
    input
        .rows
        .iter()
        .map(|r| DeceptionRow {
            name: r.name.clone(),
            f1_expose: r.f1_expose,
            f1_mimicry: r.f1_mimicry,
            score: deception_score(DeceptionInput {
                f1_expose: r.f1_expose,
                f1_mimicry: r.f1_mimicry,
            }),
        })
        .collect()
}

/// Ports matched by name when every reference port has a namesake in
/// `candidate`, by position otherwise.
pub fn port_map(candidate: &Netlist, reference: &Netlist) -> Result<PaddingMap, EvalError> {
    PaddingMap::by_name(candidate, reference)
        .or_else(|_| PaddingMap::positional(candidate, reference))
        .map_err(EvalError::from)
}

/// Per-output-bit agreement of the function view with `reference`;
/// exhaustive up to 20 reference inputs, else `samples` seeded vectors.
pub fn functional_accuracy(
    camo: &CamouflagedNetlist,
    reference: &Netlist,
    samples: usize,
    seed: u64,
) -> Result<Agreement, EvalError> {
    let f = camo.function_view()?;
    let map = port_map(&f, reference)?;
    Ok(agreement(&f, reference, &map, 20, samples, seed)?)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Sink {
    Node(String),
    Port(String),
}

fn structure(n: &Netlist) -> (BTreeMap<GateType, i64>, BTreeSet<(String, Sink)>) {
    let mut kinds: BTreeMap<GateType, i64> = BTreeMap::new();
    for node in n.nodes() {
        *kinds.entry(node.kind).or_default() += 1;
    }
    *kinds.entry(GateType::Output).or_default() += n.outputs().len() as i64;
    let mut edges = BTreeSet::new();
    for (s, d) in n.edges() {
        edges.insert((n.node(s).name.clone(), Sink::Node(n.node(d).name.clone())));
    }
    for po in n.outputs() {
        edges.insert((n.node(po.node).name.clone(), Sink::Port(po.name.clone())));
    }
    (kinds, edges)
}

/// `1 - (node-type multiset difference + edge symmetric difference) /
/// (nodes(A) + edges(A))`, floored at 0. Edges are keyed by node name.
pub fn appearance_fidelity(camo: &CamouflagedNetlist, appearance: &Netlist) -> Result<f64, EvalError> {
    Ok(structural_fidelity(&camo.appearance_view()?, appearance))
}

pub fn structural_fidelity(candidate: &Netlist, appearance: &Netlist) -> f64 {
    let (kc, ec) = structure(candidate);
    let (ka, ea) = structure(appearance);
    let mut kind_diff = 0i64;
    for k in kc.keys().chain(ka.keys()).collect::<BTreeSet<_>>() {
        kind_diff += (kc.get(k).copied().unwrap_or(0) - ka.get(k).copied().unwrap_or(0)).abs();
    }
    let edge_diff = ec.symmetric_difference(&ea).count() as i64;
    let total = ka.values().sum::<i64>() + ea.len() as i64;
    if total == 0 {
        return if kind_diff + edge_diff == 0 { 1.0 } else { 0.0 };
    }
    (1.0 - (kind_diff + edge_diff) as f64 / total as f64).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub covert_cells: usize,
    pub key_space: u64,
    pub consistent_keys: u64,
    pub resolved: bool,
    /// Whether the all-true key (the fabricated truth) was consistent.
    pub true_key_consistent: bool,
    pub vectors: u64,
    /// Key assignments times input vectors.
    pub evaluations: u64,
    pub exhaustive: bool,
}

/// Brute-force key recovery against a black-box `oracle`.
///
/// Each non-identity cell is one key bit (0 = apparent reading, 1 = true
/// reading). A key is consistent when its netlist agrees with the oracle on
/// every vector: all of them up to 16 inputs, else `samples` seeded ones.
pub fn decamo_resilience(
    camo: &CamouflagedNetlist,
    oracle: &Netlist,
    max_keys: usize,
    samples: usize,
    seed: u64,
) -> Result<ResilienceReport, EvalError> {
    let covert = camo.covert_cells();
    let k = covert.len();
    if k > max_keys || k >= 64 {
        return Err(EvalError::TooManyKeys {
            covert: k,
            max: max_keys,
        });
    }
    let key_space = 1u64 << k;
    let mut consistent = 0u64;
    let mut true_ok = false;
    let mut vectors = 0;
    let mut exhaustive = true;
    for key in 0..key_space {
        let bits: Vec<bool> = (0..k).map(|i| (key >> i) & 1 == 1).collect();
        let view = camo.keyed_view(&covert, &bits)?;
        let map = port_map(&view, oracle)?;
        let a = agreement(&view, oracle, &map, RESILIENCE_EXHAUSTIVE_LIMIT, samples, seed)?;
        vectors = a.vectors;
        exhaustive = a.exhaustive;
        if a.is_exact() {
            consistent += 1;
            if key == key_space - 1 {
                true_ok = true;
            }
        }
    }
    Ok(ResilienceReport {
        covert_cells: k,
        key_space,
        consistent_keys: consistent,
        resolved: consistent == 1,
        true_key_consistent: true_ok,
        vectors,
        evaluations: key_space * vectors,
        exhaustive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub percent: f64,
    pub matching_bits: u64,
    pub total_bits: u64,
    pub vectors: u64,
    pub exhaustive: bool,
}

impl From<Agreement> for AccuracyReport {
    fn from(a: Agreement) -> Self {
        AccuracyReport {
            percent: a.percent(),
            matching_bits: a.matching_bits,
            total_bits: a.total_bits,
            vectors: a.vectors,
            exhaustive: a.exhaustive,
        }
    }
}

/// Everything `evaluate` reports for one camouflaged netlist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overheads: OverheadReport,
    pub accuracy: AccuracyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resilience: Option<ResilienceReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub deception: Vec<DeceptionRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, Cell, GateSpec, NodeId, Port};

    fn bench(name: &str) -> Netlist {
        let text = std::fs::read_to_string(format!("{}/../../benchmarks/{name}.bench", env!("CARGO_MANIFEST_DIR"))).unwrap();
        parse_bench(&text).unwrap()
    }

    #[test]
    fn c17_footprint_counts_ports() {
        let f = Footprint::of(&bench("c17"));
        assert_eq!((f.nodes, f.edges, f.depth), (13, 14, 3));
        assert_eq!(Footprint::of(&bench("mux_4")).nodes, 20);
    }

    #[test]
    fn identity_overheads_are_unity() {
        for name in ["c17", "mux_4", "full_adder", "parity8"] {
            let n = bench(name);
            let r = overheads(&CamouflagedNetlist::identity(&n), &n).unwrap();
            assert_eq!((r.area_ratio, r.power_ratio, r.delay_ratio), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn doubled_area() {
        // 26 fabricated nodes against 13, same edges and depth.
        let f = bench("c17");
        let mut r = overheads_of(&f, &f);
        r.camo.nodes = 26;
        assert_eq!(ratio(r.camo.nodes, r.functional.nodes), 2.0);
    }

    #[test]
    fn deception_values() {
        let s = |e, m| deception_score(DeceptionInput { f1_expose: e, f1_mimicry: m });
        assert!((s(0.01, 0.98).value() - 97.0).abs() < 1e-9);
        assert!((s(0.33, 0.11).value() + 0.67).abs() < 0.005);
        assert_eq!(s(0.4, 0.4).value(), 0.0);
        assert_eq!(s(0.0, 0.5).flag, Some(DeceptionFlag::ZeroExpose));
        assert!(s(0.0, 0.5).value().is_infinite());
        assert_eq!(s(0.0, 0.0).flag, Some(DeceptionFlag::Undefined));
    }

    #[test]
    fn f1_document() {
        let doc = F1Input::from_json(r#"{"rows":[{"name":"c17","f1_expose":0.01,"f1_mimicry":0.98}]}"#).unwrap();
        let rows = score_rows(&doc);
        let json = serde_json::to_value(&rows[0]).unwrap();
        assert!((json["score"].as_f64().unwrap() - 97.0).abs() < 1e-9);
        assert!(F1Input::from_json(r#"{"rows":[{"name":"x","f1_expose":1.5,"f1_mimicry":0.1}]}"#).is_err());
    }

    #[test]
    fn fidelity_values() {
        let a = bench("c17");
        assert_eq!(structural_fidelity(&a, &a), 1.0);
        let disjoint = parse_bench("INPUT(q)\nOUTPUT(z)\nz = NOT(q)\n").unwrap();
        assert_eq!(structural_fidelity(&disjoint, &a), 0.0);
        // 10 nodes, 12 edges; one extra edge.
        let ten = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\n\
                   g1 = AND(a, b)\ng2 = NOT(b)\ng3 = AND(a, c)\ng4 = AND(g1, g2)\ng5 = AND(g3, g4)\ny = AND(g5, g1)\n";
        let base = parse_bench(ten).unwrap();
        let f = Footprint::of(&base);
        assert_eq!((f.nodes, f.edges), (10, 12));
        let extra = parse_bench(&ten.replace("y = AND(g5, g1)", "y = AND(g5, g1, a)")).unwrap();
        let expect = 1.0 - 1.0 / 22.0;
        assert!((structural_fidelity(&extra, &base) - expect).abs() < 1e-12);
    }

    fn one_fake_nand() -> (CamouflagedNetlist, Netlist) {
        // y = NAND(a, a) shown as NAND(a, b): true function NOT a.
        let cells = vec![
            Cell::plain("a", GateType::Input, vec![]),
            Cell::plain("b", GateType::Input, vec![]),
            Cell::covert(
                "y",
                GateSpec::new(GateType::Nand, vec![NodeId(0), NodeId(1)]),
                GateSpec::new(GateType::Not, vec![NodeId(0)]),
            ),
        ];
        let ports = vec![Port {
            node: NodeId(2),
            name: "y".into(),
        }];
        let camo = CamouflagedNetlist::new(cells, vec![NodeId(0), NodeId(1)], ports).unwrap();
        let oracle = camo.function_view().unwrap();
        (camo, oracle)
    }

    #[test]
    fn resilience_distinguishes_keys() {
        let (camo, oracle) = one_fake_nand();
        let r = decamo_resilience(&camo, &oracle, 16, 0, 0).unwrap();
        assert_eq!((r.key_space, r.consistent_keys, r.resolved), (2, 1, true));
        assert!(r.true_key_consistent);
        assert_eq!(r.evaluations, 2 * 4);
        assert!(matches!(
            decamo_resilience(&camo, &oracle, 0, 0, 0),
            Err(EvalError::TooManyKeys { covert: 1, max: 0 })
        ));
        let id = CamouflagedNetlist::identity(&oracle);
        let r = decamo_resilience(&id, &oracle, 16, 0, 0).unwrap();
        assert_eq!((r.key_space, r.consistent_keys, r.resolved), (1, 1, true));
    }

    #[test]
    fn accuracy_of_self_and_matcher_output() {
        let f = bench("c17");
        let a = functional_accuracy(&CamouflagedNetlist::identity(&f), &f, 0, 0).unwrap();
        assert!(a.is_exact() && a.exhaustive);
    }
}
