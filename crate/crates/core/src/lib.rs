//! Training and inference for discrete undirected graphical models.
//!
//! The crate is organized around a tabular factor-graph substrate
//! ([`FactorGraph`]) over which five training objectives are defined: the
//! exact log likelihood, the piecewise objective (each group of factors
//! normalized locally), its reweighted variant (pieces mixed by a
//! distribution `mu`), and node / per-edge pseudolikelihood. All objectives
//! report a value and an analytic gradient and plug into the bundled L-BFGS
//! maximizer.
//!
//! Conditional models (linear-chain, two-level factorial, and skip-chain
//! CRFs) live in [`crf`]: feature templates are evaluated against an input
//! sequence and compiled down to per-instance tabular log-potentials, so
//! every objective above applies unchanged to the unrolled graphs.
//!
//! [`harness`] generates random instances and verifies the two bounds that
//! justify piecewise training (the per-piece sum bound and the reweighted
//! mixture bound) against brute-force enumeration.

pub mod crf;
pub mod data;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod math;
pub mod objectives;
pub mod optimizer;

pub use graph::{build_graph, Assignment, Factor, FactorGraph, GraphError, ParameterVector, VariableSpec};
pub use inference::{BpSchedule, BpSettings, InferenceError, InferenceMethod, MarginalSet};
pub use objectives::{ObjectiveError, ObjectiveResult, PiecePartition, PriorSpec};
pub use optimizer::{OptimizationTrace, OptimizeError, OptimizerSettings};
