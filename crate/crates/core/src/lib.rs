//! Mimetic circuit camouflage toolkit.
//!
//! - [`netlist`]: parsing, levelization, simulation and covert-cell netlists
//! - [`partition`]: three-phase mimicry-aware partitioning and piece extraction
//! - [`matcher`]: layer-by-layer graph matching and covert-cell deployment
//! - [`tnet`]: differentiable dual-parameter NAND-array synthesis
//! - [`eval`]: overhead, accuracy, deception and resilience metrics

pub mod autodiff;
pub mod eval;
pub mod matcher;
pub mod netlist;
pub mod partition;
pub mod tnet;
