//! Partition, camouflage piece by piece, recombine, evaluate.
//!
//! Pieces of the functional and appearance circuits are paired by size
//! rank. Every artifact lands under one output directory together with a
//! `manifest.json` that records seeds, configuration, stage timings and the
//! metrics of the run. Paths in the manifest are relative to that directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mimic_core::eval::{appearance_fidelity, functional_accuracy, overheads, AccuracyReport, EvalReport, OverheadReport};
use mimic_core::matcher::{deploy_covert, match_graphs, MatchResult};
use mimic_core::netlist::{parse_bench, write_bench, CamouflagedNetlist, Cell, Netlist};
use mimic_core::partition::{
    extract_pieces, partition_pipeline, recombine, BoundaryMap, CircuitGraph, Partition, PartitionOutcome,
    PhaseTrace, Piece,
};
use mimic_core::tnet::{self, write_trace, EpochRecord, ExtractStats, MimicryDataset, Trained};

use crate::config::{split_seed, Method, PipelineConfig};
use crate::error::CliError;

/// Why a piece ended up without a counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFlag {
    /// Functional piece with no appearance piece: fabricated as is.
    Exposed,
    /// Appearance piece with no functional piece: pure decoy logic.
    Decoy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub function: Option<usize>,
    pub appearance: Option<usize>,
    pub flag: Option<PairFlag>,
}

/// Pairs pieces by node-count rank, largest first; ties keep input order.
/// Surplus pieces on either side are paired with nothing and flagged.
pub fn pair_pieces(function_sizes: &[usize], appearance_sizes: &[usize]) -> Vec<Pairing> {
    let ranked = |sizes: &[usize]| {
        let mut idx: Vec<usize> = (0..sizes.len()).collect();
        idx.sort_by_key(|&i| (std::cmp::Reverse(sizes[i]), i));
        idx
    };
    let (f, a) = (ranked(function_sizes), ranked(appearance_sizes));
    (0..f.len().max(a.len()))
        .map(|r| {
            let (function, appearance) = (f.get(r).copied(), a.get(r).copied());
            let flag = match (function, appearance) {
                (Some(_), None) => Some(PairFlag::Exposed),
                (None, Some(_)) => Some(PairFlag::Decoy),
                _ => None,
            };
            Pairing {
                function,
                appearance,
                flag,
            }
        })
        .collect()
}

pub fn read_netlist(path: &Path) -> Result<Netlist, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_bench(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Result of graph matching one appearance/function pair.
pub struct Matched {
    pub camo: CamouflagedNetlist,
    pub result: MatchResult,
}

pub fn graph_match(appearance: &Netlist, function: &Netlist, cfg: &PipelineConfig) -> Result<Matched, CliError> {
    let result = match_graphs(appearance, function, &cfg.cost)?;
    let camo = deploy_covert(appearance, function, &result.mapping)?;
    Ok(Matched { camo, result })
}

/// Result of NAND-array synthesis for one pair.
pub struct Synthesized {
    pub camo: CamouflagedNetlist,
    pub trained: Trained,
    pub stats: ExtractStats,
}

/// Trains with `cfg.train` as given, seed included.
pub fn synth_nand(appearance: &Netlist, function: &Netlist, cfg: &PipelineConfig) -> Result<Synthesized, CliError> {
    let ds = MimicryDataset::build(appearance, function, tnet::EXHAUSTIVE_PI_LIMIT, cfg.samples, cfg.train.seed)?;
    let trained = tnet::train(&ds, &cfg.train)?;
    let x = tnet::extract(&trained.net, &ds.pi_names, &ds.po_names)?;
    Ok(Synthesized {
        camo: x.camo,
        trained,
        stats: x.stats,
    })
}

/// Last-epoch training figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    /// Which restart was kept.
    pub restart: usize,
    pub acc_p0: f64,
    pub acc_p1: f64,
    pub loss_total: f64,
    pub loss_cryptic: f64,
    pub extract: ExtractSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub nodes: usize,
    pub pruned: usize,
    pub slots: usize,
    pub violations: usize,
    pub violation_fraction: f64,
}

impl From<&ExtractStats> for ExtractSummary {
    fn from(s: &ExtractStats) -> Self {
        ExtractSummary {
            nodes: s.nodes,
            pruned: s.pruned,
            slots: s.slots,
            violations: s.violations,
            violation_fraction: s.violation_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceMetrics {
    pub index: usize,
    pub function_block: Option<usize>,
    pub appearance_block: Option<usize>,
    pub flag: Option<PairFlag>,
    /// Set when a paired piece was fabricated unchanged instead.
    pub note: Option<String>,
    pub seed: u64,
    pub function_nodes: usize,
    pub appearance_nodes: usize,
    pub cells: usize,
    pub covert_cells: usize,
    /// Absent for decoy pieces.
    pub accuracy: Option<AccuracyReport>,
    pub overheads: Option<OverheadReport>,
    pub training: Option<TrainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: Method,
    pub k_function: usize,
    pub k_appearance: usize,
    pub function_cut: usize,
    pub appearance_cut: usize,
    pub pieces: Vec<PieceMetrics>,
    pub overheads: OverheadReport,
    pub accuracy: AccuracyReport,
    pub fidelity: f64,
    pub covert_cells: usize,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub millis: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Bench,
    Partition,
    Camo,
    Trace,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: ArtifactKind,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub partition_function: u64,
    pub partition_appearance: u64,
    pub evaluation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub function: String,
    pub appearance: String,
    pub jobs: usize,
    pub config: PipelineConfig,
    pub seeds: Seeds,
    pub stages: Vec<StageRecord>,
    pub failed_stage: Option<String>,
    pub artifacts: Vec<Artifact>,
    pub metrics: Option<RunMetrics>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(CliError::input)
    }

    /// `Ok` when the run finished at or above its accuracy threshold.
    pub fn outcome(&self) -> Result<(), CliError> {
        match &self.metrics {
            Some(m) if m.passed => Ok(()),
            Some(m) => Err(CliError::BelowThreshold {
                accuracy: m.accuracy.percent,
                threshold: m.threshold,
            }),
            None => Err(CliError::Internal(format!(
                "run stopped at stage `{}`",
                self.failed_stage.as_deref().unwrap_or("unknown")
            ))),
        }
    }
}

struct Run<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f(self);
        let millis = t.elapsed().as_secs_f64() * 1e3;
        let (status, error) = match &out {
            Ok(_) => (StageStatus::Ok, None),
            Err(e) => (StageStatus::Failed, Some(e.to_string())),
        };
        if status == StageStatus::Failed {
            self.manifest.failed_stage = Some(name.to_string());
        }
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status,
            millis,
            error,
        });
        out
    }

    fn write(&mut self, kind: ArtifactKind, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::Internal(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
        self.manifest.artifacts.push(Artifact {
            kind,
            path: rel.to_string(),
        });
        Ok(())
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, self.manifest.to_json()).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
    }
}

/// Splits `n` into at most `k` blocks; one block skips the partitioner.
fn split(n: &Netlist, k: usize, cfg: &PipelineConfig, seed: u64) -> Result<PartitionOutcome, CliError> {
    let k = k.min(n.len()).max(1);
    if k == 1 {
        let g = CircuitGraph::from_netlist(n);
        return Ok(PartitionOutcome {
            partition: Partition::from_assignment(&g, 1, vec![0; n.len()]),
            trace: PhaseTrace {
                spectral_cut: 0,
                kl_cut: 0,
                kl_accepted: false,
                final_cut: 0,
                moves: Vec::new(),
            },
        });
    }
    let pcfg = mimic_core::partition::PartitionConfig {
        k,
        seed,
        ..cfg.partition.clone()
    };
    Ok(partition_pipeline(n, &pcfg)?)
}

/// Renames every cell so decoy logic cannot collide with functional names.
fn decoy(piece: &Netlist, tag: &str) -> Result<CamouflagedNetlist, CliError> {
    let id = CamouflagedNetlist::identity(piece);
    let cells: Vec<Cell> = id
        .cells()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.name = format!("{tag}_{}", c.name);
            c
        })
        .collect();
    Ok(CamouflagedNetlist::new(cells, id.inputs().to_vec(), id.outputs().to_vec())?)
}

struct Processed {
    camo: CamouflagedNetlist,
    trace: Option<Vec<EpochRecord>>,
    metrics: PieceMetrics,
}

fn process(
    index: usize,
    pairing: Pairing,
    f_pieces: &[Piece],
    a_pieces: &[Piece],
    cfg: &PipelineConfig,
) -> Result<Processed, CliError> {
    let seed = split_seed(cfg.seed, "piece", index as u64);
    let f = pairing.function.map(|b| &f_pieces[b].netlist);
    let a = pairing.appearance.map(|b| &a_pieces[b].netlist);
    let mut note = None;
    let mut trace = None;
    let mut training = None;
    let camo = match (f, a) {
        (Some(f), Some(a)) if cfg.method == Method::GraphMatch => graph_match(a, f, cfg)?.camo,
        (Some(f), Some(a)) => {
            let trainable = f.gate_count() > 0 && !a.inputs().is_empty() && !a.outputs().is_empty();
            if trainable {
                let mut piece_cfg = cfg.clone();
                piece_cfg.train.seed = seed;
                let s = synth_nand(a, f, &piece_cfg)?;
                let last = s.trained.trace.last();
                training = Some(TrainSummary {
                    epochs: s.trained.trace.len(),
                    restart: s.trained.restart,
                    acc_p0: last.map_or(f64::NAN, |r| r.acc_p0),
                    acc_p1: last.map_or(f64::NAN, |r| r.acc_p1),
                    loss_total: last.map_or(f64::NAN, |r| r.loss_total),
                    loss_cryptic: last.map_or(f64::NAN, |r| r.loss_cryptic),
                    extract: ExtractSummary::from(&s.stats),
                });
                trace = Some(s.trained.trace);
                s.camo
            } else {
                note = Some("no logic to synthesize; fabricated unchanged".into());
                CamouflagedNetlist::identity(f)
            }
        }
        (Some(f), None) => CamouflagedNetlist::identity(f),
        (None, Some(a)) => decoy(a, &format!("decoy{index}"))?,
        (None, None) => unreachable!("pairings always hold one side"),
    };
    let (accuracy, over) = match f {
        Some(f) => (
            Some(functional_accuracy(&camo, f, cfg.samples, seed)?.into()),
            Some(overheads(&camo, f)?),
        ),
        None => (None, None),
    };
    let metrics = PieceMetrics {
        index,
        function_block: pairing.function,
        appearance_block: pairing.appearance,
        flag: pairing.flag,
        note,
        seed,
        function_nodes: f.map_or(0, |n| n.len()),
        appearance_nodes: a.map_or(0, |n| n.len()),
        cells: camo.len(),
        covert_cells: camo.covert_cells().len(),
        accuracy,
        overheads: over,
        training,
    };
    Ok(Processed { camo, trace, metrics })
}

/// Runs the whole flow. Inputs are parsed before anything is written, so a
/// bad input leaves no artifacts behind. Any later failure still writes the
/// manifest, naming the failing stage.
pub fn run_pipeline(
    function_path: &Path,
    appearance_path: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let parse_start = Instant::now();
    let f = read_netlist(function_path)?;
    let a = read_netlist(appearance_path)?;
    let parse_millis = parse_start.elapsed().as_secs_f64() * 1e3;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Input(format!("{}: {e}", out_dir.display())))?;

    let seeds = Seeds {
        root: cfg.seed,
        partition_function: split_seed(cfg.seed, "partition-function", 0),
        partition_appearance: split_seed(cfg.seed, "partition-appearance", 0),
        evaluation: split_seed(cfg.seed, "evaluation", 0),
    };
    let mut run = Run {
        dir: out_dir,
        manifest: Manifest {
            tool: "mimic".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            function: function_path.display().to_string(),
            appearance: appearance_path.display().to_string(),
            jobs,
            config: cfg.clone(),
            seeds: seeds.clone(),
            stages: vec![StageRecord {
                name: "parse".into(),
                status: StageStatus::Ok,
                millis: parse_millis,
                error: None,
            }],
            failed_stage: None,
            artifacts: Vec::new(),
            metrics: None,
        },
    };
    match execute(&mut run, &f, &a, cfg, &seeds, jobs) {
        Ok(m) => {
            run.manifest.metrics = Some(m);
            run.write_manifest()?;
            Ok(run.manifest)
        }
        Err(e) => {
            run.write_manifest()?;
            Err(e)
        }
    }
}

fn execute(
    run: &mut Run,
    f: &Netlist,
    a: &Netlist,
    cfg: &PipelineConfig,
    seeds: &Seeds,
    jobs: usize,
) -> Result<RunMetrics, CliError> {
    let (pf, pa) = run.stage("partition", |run| {
        let pf = split(f, cfg.k_partitions, cfg, seeds.partition_function)?;
        let pa = split(a, cfg.k_partitions, cfg, seeds.partition_appearance)?;
        run.write(ArtifactKind::Partition, "partition/function.json", &pf.to_json(f))?;
        run.write(ArtifactKind::Partition, "partition/appearance.json", &pa.to_json(a))?;
        Ok((pf, pa))
    })?;

    let (f_pieces, a_pieces, map, pairs) = run.stage("pair", |run| {
        let (f_pieces, map) = extract_pieces(f, &pf.partition);
        let (a_pieces, _) = extract_pieces(a, &pa.partition);
        for p in &f_pieces {
            run.write(ArtifactKind::Bench, &format!("pieces/function_{}.bench", p.block), &write_bench(&p.netlist))?;
        }
        for p in &a_pieces {
            run.write(ArtifactKind::Bench, &format!("pieces/appearance_{}.bench", p.block), &write_bench(&p.netlist))?;
        }
        let size = |ps: &[Piece]| ps.iter().map(|p| p.netlist.len()).collect::<Vec<_>>();
        let pairs = pair_pieces(&size(&f_pieces), &size(&a_pieces));
        Ok((f_pieces, a_pieces, map, pairs))
    })?;

    let processed = run.stage("process", |run| {
        let work = |(i, p): (usize, &Pairing)| process(i, *p, &f_pieces, &a_pieces, cfg);
        let results: Vec<Result<Processed, CliError>> = if jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(CliError::internal)?;
            pool.install(|| pairs.par_iter().enumerate().map(work).collect())
        } else {
            pairs.iter().enumerate().map(work).collect()
        };
        let processed = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        for p in &processed {
            let i = p.metrics.index;
            run.write(ArtifactKind::Camo, &format!("pieces/camo_{i}.json"), &p.camo.to_json())?;
            if let Some(trace) = &p.trace {
                let mut buf = Vec::new();
                write_trace(trace, &mut buf)?;
                run.write(ArtifactKind::Trace, &format!("pieces/trace_{i}.csv"), &String::from_utf8_lossy(&buf))?;
            }
        }
        Ok(processed)
    })?;

    let camo = run.stage("recombine", |run| {
        let camo = assemble(&processed, &map, f_pieces.len())?;
        let (app, fun) = camo.views()?;
        run.write(ArtifactKind::Camo, "camo.json", &camo.to_json())?;
        run.write(ArtifactKind::Bench, "appearance_view.bench", &write_bench(&app))?;
        run.write(ArtifactKind::Bench, "function_view.bench", &write_bench(&fun))?;
        Ok(camo)
    })?;

    run.stage("evaluate", |run| {
        let report = EvalReport {
            overheads: overheads(&camo, f)?,
            accuracy: functional_accuracy(&camo, f, cfg.samples, seeds.evaluation)?.into(),
            fidelity: Some(appearance_fidelity(&camo, a)?),
            resilience: None,
            deception: Vec::new(),
        };
        run.write(ArtifactKind::Report, "report.json", &report.to_json())?;
        let threshold = cfg.threshold();
        Ok(RunMetrics {
            method: cfg.method,
            k_function: pf.partition.k,
            k_appearance: pa.partition.k,
            function_cut: pf.partition.cut_size,
            appearance_cut: pa.partition.cut_size,
            pieces: processed.iter().map(|p| p.metrics.clone()).collect(),
            overheads: report.overheads,
            accuracy: report.accuracy,
            fidelity: report.fidelity.unwrap_or(0.0),
            covert_cells: camo.covert_cells().len(),
            threshold,
            passed: report.accuracy.percent >= threshold,
        })
    })
}

/// Functional pieces in block order, then decoys.
fn assemble(processed: &[Processed], map: &BoundaryMap, blocks: usize) -> Result<CamouflagedNetlist, CliError> {
    let mut by_block: Vec<Option<&CamouflagedNetlist>> = vec![None; blocks];
    let mut decoys = Vec::new();
    for p in processed {
        match p.metrics.function_block {
            Some(b) => by_block[b] = Some(&p.camo),
            None => decoys.push(p.camo.clone()),
        }
    }
    let mut pieces = by_block
        .into_iter()
        .map(|c| c.cloned().ok_or_else(|| CliError::Internal("functional block left unprocessed".into())))
        .collect::<Result<Vec<_>, _>>()?;
    pieces.extend(decoys);
    Ok(recombine(&pieces, map)?)
}

/// Resolves a manifest path against the run directory.
pub fn artifact_path(out_dir: &Path, a: &Artifact) -> PathBuf {
    out_dir.join(&a.path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_lists_pair_by_rank_without_flags() {
        let p = pair_pieces(&[3, 9, 5], &[4, 1, 7]);
        let got: Vec<(Option<usize>, Option<usize>)> = p.iter().map(|x| (x.function, x.appearance)).collect();
        assert_eq!(got, vec![(Some(1), Some(2)), (Some(2), Some(0)), (Some(0), Some(1))]);
        assert!(p.iter().all(|x| x.flag.is_none()));
    }

    #[test]
    fn surplus_function_piece_is_exposed() {
        let p = pair_pieces(&[5, 4, 3], &[9, 8]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.iter().filter(|x| x.flag == Some(PairFlag::Exposed)).count(), 1);
        assert_eq!(p[2].function, Some(2));
        assert_eq!(p[2].appearance, None);
    }

    #[test]
    fn surplus_appearance_piece_is_decoy() {
        let p = pair_pieces(&[5], &[2, 8]);
        assert_eq!(p[1].flag, Some(PairFlag::Decoy));
        assert_eq!(p[1].appearance, Some(0));
    }
}
