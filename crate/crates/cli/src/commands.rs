use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mimic_core::eval::{
    appearance_fidelity, decamo_resilience, functional_accuracy, overheads, score_rows, EvalReport, F1Input,
    Footprint, DEFAULT_MAX_KEYS,
};
use mimic_core::netlist::{write_bench, CamouflagedNetlist};
use mimic_core::partition::extract_pieces;
use mimic_core::tnet::{write_trace, Checkpoint};

use crate::config::{Method, PipelineConfig};
use crate::error::CliError;
use crate::pipeline::{graph_match, read_netlist, run_pipeline, synth_nand, ExtractSummary};

#[derive(Debug, Parser)]
#[command(name = "mimic", version, about = "Mimetic camouflage of gate-level netlists")]
pub struct Cli {
    /// Root random seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pieces processed in parallel by `pipeline`.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// JSON pipeline configuration; absent fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a .bench file and print its size and depth.
    Parse {
        file: PathBuf,
        /// Write the netlist back out in canonical .bench form.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split a netlist into blocks and cut out the pieces.
    Partition {
        file: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Weight of the cut-size change in a balancing move's gain.
        #[arg(long)]
        w_cut: Option<f64>,
        /// Weight of the I/O imbalance change in a balancing move's gain.
        #[arg(long)]
        w_io: Option<f64>,
        /// Directory for partition.json, boundary.json and pieces/.
        #[arg(short = 'o', long)]
        out_dir: Option<PathBuf>,
    },
    /// Camouflage by layer-by-layer graph matching.
    Match {
        #[command(flatten)]
        pair: PairArgs,
        /// Camouflaged netlist (JSON); stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Node mapping document.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Camouflage by training a dual-parameter NAND array.
    SynthNand {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Per-epoch loss and accuracy CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a camouflaged netlist.
    Evaluate {
        #[arg(long)]
        camo: PathBuf,
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        appearance: Option<PathBuf>,
        /// F1 document with `rows` of `{name, f1_expose, f1_mimicry}`.
        #[arg(long)]
        f1: Option<PathBuf>,
        /// Brute-force the covert-cell key space against the function.
        #[arg(long)]
        resilience: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_KEYS)]
        max_keys: usize,
        /// Exit with status 1 below this accuracy (percent).
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Partition, camouflage every piece, recombine and evaluate.
    Pipeline {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(short = 'o', long, default_value = "mimic-out")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Circuit the fabricated layout should look like.
    #[arg(long)]
    pub appearance: PathBuf,
    /// Circuit the silicon must compute.
    #[arg(long)]
    pub function: PathBuf,
}

fn config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if cli.jobs == 0 {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Input(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, contents),
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("summary serializes")
}

#[derive(Serialize)]
struct ParseSummary {
    inputs: usize,
    outputs: usize,
    gates: usize,
    #[serde(flatten)]
    footprint: Footprint,
}

#[derive(Serialize)]
struct MatchSummary {
    cells: usize,
    covert_cells: usize,
    exposed_cells: usize,
    total_cost: f64,
    accuracy_percent: f64,
}

#[derive(Serialize)]
struct SynthSummary {
    epochs: usize,
    acc_p0: f64,
    acc_p1: f64,
    accuracy_percent: f64,
    extract: ExtractSummary,
}

/// Runs one parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config(&cli)?;
    match cli.command {
        Command::Parse { file, output } => {
            let n = read_netlist(&file)?;
            if let Some(out) = &output {
                write(out, &write_bench(&n))?;
            }
            println!(
                "{}",
                json(&ParseSummary {
                    inputs: n.inputs().len(),
                    outputs: n.outputs().len(),
                    gates: n.gate_count(),
                    footprint: Footprint::of(&n),
                })
            );
            Ok(())
        }
        Command::Partition {
            file,
            k,
            w_cut,
            w_io,
            out_dir,
        } => {
            let n = read_netlist(&file)?;
            let mut pcfg = cfg.partition.clone();
            pcfg.k = k.unwrap_or(cfg.k_partitions);
            pcfg.seed = cfg.seed;
            pcfg.w_cut = w_cut.unwrap_or(pcfg.w_cut);
            pcfg.w_io = w_io.unwrap_or(pcfg.w_io);
            let outcome = mimic_core::partition::partition_pipeline(&n, &pcfg)?;
            let doc = outcome.to_json(&n);
            match out_dir {
                Some(dir) => {
                    let (pieces, map) = extract_pieces(&n, &outcome.partition);
                    write(&dir.join("partition.json"), &doc)?;
                    write(&dir.join("boundary.json"), &json(&map))?;
                    for p in &pieces {
                        write(&dir.join(format!("pieces/block_{}.bench", p.block)), &write_bench(&p.netlist))?;
                    }
                    println!(
                        "{}",
                        json(&serde_json::json!({
                            "k": outcome.partition.k,
                            "cut_size": outcome.partition.cut_size,
                            "block_sizes": outcome.partition.block_sizes(),
                            "boundary_nets": map.nets.len(),
                        }))
                    );
                }
                None => println!("{doc}"),
            }
            Ok(())
        }
        Command::Match { pair, output, mapping } => {
            let a = read_netlist(&pair.appearance)?;
            let f = read_netlist(&pair.function)?;
            cfg.cost.validate()?;
            let m = graph_match(&a, &f, &cfg)?;
            if let Some(p) = &mapping {
                write(p, &m.result.to_json(&a, &f))?;
            }
            emit(output.as_deref(), &m.camo.to_json())?;
            if output.is_some() {
                let acc = functional_accuracy(&m.camo, &f, cfg.samples, cfg.seed)?;
                println!(
                    "{}",
                    json(&MatchSummary {
                        cells: m.camo.len(),
                        covert_cells: m.camo.covert_cells().len(),
                        exposed_cells: m.camo.exposed_count(),
                        total_cost: m.result.total_cost,
                        accuracy_percent: acc.percent(),
                    })
                );
            }
            Ok(())
        }
        Command::SynthNand {
            pair,
            epochs,
            output,
            trace,
            checkpoint,
        } => {
            let a = read_netlist(&pair.appearance)?;
            let f = read_netlist(&pair.function)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.train.validate()?;
            let s = synth_nand(&a, &f, &cfg)?;
            if let Some(p) = &trace {
                let mut buf = Vec::new();
                write_trace(&s.trained.trace, &mut buf)?;
                write(p, &String::from_utf8_lossy(&buf))?;
            }
            if let Some(p) = &checkpoint {
                let ck = Checkpoint::of(&s.trained.net, s.trained.seed, s.trained.trace.len());
                write(p, &ck.to_json())?;
            }
            emit(output.as_deref(), &s.camo.to_json())?;
            if output.is_some() {
                let last = s.trained.trace.last();
                let acc = functional_accuracy(&s.camo, &f, cfg.samples, cfg.seed)?;
                println!(
                    "{}",
                    json(&SynthSummary {
                        epochs: s.trained.trace.len(),
                        acc_p0: last.map_or(f64::NAN, |r| r.acc_p0),
                        acc_p1: last.map_or(f64::NAN, |r| r.acc_p1),
                        accuracy_percent: acc.percent(),
                        extract: ExtractSummary::from(&s.stats),
                    })
                );
            }
            Ok(())
        }
        Command::Evaluate {
            camo,
            function,
            appearance,
            f1,
            resilience,
            max_keys,
            threshold,
            output,
        } => {
            let text = std::fs::read_to_string(&camo).map_err(|e| CliError::Input(format!("{}: {e}", camo.display())))?;
            let c = CamouflagedNetlist::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", camo.display())))?;
            let f = read_netlist(&function)?;
            let fidelity = match &appearance {
                Some(p) => Some(appearance_fidelity(&c, &read_netlist(p)?)?),
                None => None,
            };
            let deception = match &f1 {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
                    score_rows(&F1Input::from_json(&text)?)
                }
                None => Vec::new(),
            };
            let resilience = if resilience {
                Some(decamo_resilience(&c, &f, max_keys, cfg.samples, cfg.seed)?)
            } else {
                None
            };
            let report = EvalReport {
                overheads: overheads(&c, &f)?,
                accuracy: functional_accuracy(&c, &f, cfg.samples, cfg.seed)?.into(),
                fidelity,
                resilience,
                deception,
            };
            emit(output.as_deref(), &report.to_json())?;
            match threshold {
                Some(t) if report.accuracy.percent < t => Err(CliError::BelowThreshold {
                    accuracy: report.accuracy.percent,
                    threshold: t,
                }),
                _ => Ok(()),
            }
        }
        Command::Pipeline {
            pair,
            method,
            k,
            epochs,
            threshold,
            out_dir,
        } => {
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(k) = k {
                cfg.k_partitions = k;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if threshold.is_some() {
                cfg.accuracy_threshold = threshold;
            }
            let manifest = run_pipeline(&pair.function, &pair.appearance, &cfg, &out_dir, cli.jobs)?;
            if let Some(m) = &manifest.metrics {
                println!(
                    "{}",
                    json(&serde_json::json!({
                        "out_dir": out_dir.display().to_string(),
                        "pieces": m.pieces.len(),
                        "accuracy_percent": m.accuracy.percent,
                        "area_ratio": m.overheads.area_ratio,
                        "power_ratio": m.overheads.power_ratio,
                        "delay_ratio": m.overheads.delay_ratio,
                        "fidelity": m.fidelity,
                        "passed": m.passed,
                    }))
                );
            }
            manifest.outcome()
        }
    }
}
