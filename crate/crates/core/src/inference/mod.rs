//! Log partition functions, marginals, and MAP assignments over factor
//! graphs: exact by enumeration, exact on forests by sum-product, and
//! approximate on loopy graphs by belief propagation.

mod brute;
mod loopy;
mod max_product;
mod structure;
mod tree;

pub use brute::{
    brute_force_log_partition, brute_force_log_partition_with_cap, brute_force_marginals,
    brute_force_marginals_with_cap, DEFAULT_STATE_CAP,
};
pub use loopy::{loopy_bp, LoopyBpResult};
pub use max_product::max_product_decode;
pub use tree::tree_sum_product;

use crate::graph::{FactorGraph, GraphError, ParameterVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("state space has {states} configurations, above the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },
    #[error("factor graph contains a cycle; exact tree inference does not apply")]
    CyclicGraph,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Exact and approximate marginal tables. `variable[v]` is a distribution
/// over the states of variable v; `factor[f]` is a joint distribution over
/// factor f's scope, laid out exactly like the factor's statistic block.
#[derive(Debug, Clone)]
pub struct MarginalSet {
    pub variable: Vec<Vec<f64>>,
    pub factor: Vec<Vec<f64>>,
}

impl MarginalSet {
    /// Expected sufficient statistics E[φ] as a dense vector of length D:
    /// for indicator statistics these are exactly the factor marginals.
    pub fn expected_statistics(&self, graph: &FactorGraph) -> Vec<f64> {
        let mut out = vec![0.0; graph.dimension()];
        for f in graph.factors() {
            out[f.stat_offset..f.stat_offset + f.stat_count].copy_from_slice(&self.factor[f.id]);
        }
        out
    }
}

/// Message update order for loopy belief propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpSchedule {
    Synchronous,
    SequentialByFactor,
}

#[derive(Debug, Clone)]
pub struct BpSettings {
    pub max_iterations: usize,
    /// Convergence threshold on the maximum absolute message change.
    pub convergence_tolerance: f64,
    /// In [0, 1); fraction of the previous message kept on each update.
    pub damping: f64,
    pub schedule: BpSchedule,
}

impl Default for BpSettings {
    fn default() -> Self {
        BpSettings {
            max_iterations: 100,
            convergence_tolerance: 1e-5,
            damping: 0.0,
            schedule: BpSchedule::SequentialByFactor,
        }
    }
}

/// Which engine computes A(θ) and the marginals for likelihood training.
#[derive(Debug, Clone)]
pub enum InferenceMethod {
    BruteForce,
    Tree,
    Loopy(BpSettings),
}

/// Dispatches on [`InferenceMethod`]; the flag reports BP convergence and
/// is always true for the exact engines.
pub fn log_partition_and_marginals(
    graph: &FactorGraph,
    theta: &ParameterVector,
    method: &InferenceMethod,
) -> Result<(MarginalSet, f64, bool), InferenceError> {
    match method {
        InferenceMethod::BruteForce => {
            let a = brute_force_log_partition(graph, theta)?;
            let m = brute_force_marginals(graph, theta)?;
            Ok((m, a, true))
        }
        InferenceMethod::Tree => {
            let (m, a) = tree_sum_product(graph, theta)?;
            Ok((m, a, true))
        }
        InferenceMethod::Loopy(settings) => {
            let r = loopy_bp(graph, theta, settings)?;
            Ok((r.marginals, r.log_partition, r.converged))
        }
    }
}
