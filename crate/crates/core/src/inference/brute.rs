//! Exact inference by enumeration of the joint state space. This is the
//! oracle every other engine is checked against; it refuses graphs whose
//! state space exceeds a cap instead of silently running forever.

use super::{InferenceError, MarginalSet};
use crate::graph::{FactorGraph, ParameterVector};
use crate::math::{for_each_config, LogSumExp};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

fn check_cap(graph: &FactorGraph, cap: usize) -> Result<(), InferenceError> {
    let states = graph
        .cardinalities()
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
    if states > cap as u128 {
        return Err(InferenceError::StateSpaceTooLarge { states, cap });
    }
    Ok(())
}

/// Score of one full configuration, with the configuration supplied as a
/// plain slice (the enumeration loops reuse a single buffer).
fn config_score(graph: &FactorGraph, theta: &ParameterVector, cfg: &[usize]) -> f64 {
    let mut score = 0.0;
    for f in graph.factors() {
        let mut idx = 0usize;
        for &v in &f.scope {
            idx = idx * graph.cardinality(v) + cfg[v];
        }
        score += theta[f.stat_offset + idx];
    }
    score
}

pub fn brute_force_log_partition(
    graph: &FactorGraph,
    theta: &ParameterVector,
) -> Result<f64, InferenceError> {
    brute_force_log_partition_with_cap(graph, theta, DEFAULT_STATE_CAP)
}

/// log Σ_a exp(score(a)) over every joint configuration, in log-space.
pub fn brute_force_log_partition_with_cap(
    graph: &FactorGraph,
    theta: &ParameterVector,
    cap: usize,
) -> Result<f64, InferenceError> {
    graph.validate_theta(theta)?;
    check_cap(graph, cap)?;
    let cards = graph.cardinalities();
    let mut acc = LogSumExp::new();
    for_each_config(&cards, |cfg| acc.add(config_score(graph, theta, cfg)));
    Ok(acc.value())
}

pub fn brute_force_marginals(
    graph: &FactorGraph,
    theta: &ParameterVector,
) -> Result<MarginalSet, InferenceError> {
    brute_force_marginals_with_cap(graph, theta, DEFAULT_STATE_CAP)
}

/// Exact per-variable and per-factor marginals by a second enumeration
/// pass accumulating exp(score − A).
pub fn brute_force_marginals_with_cap(
    graph: &FactorGraph,
    theta: &ParameterVector,
    cap: usize,
) -> Result<MarginalSet, InferenceError> {
    let log_z = brute_force_log_partition_with_cap(graph, theta, cap)?;
    let cards = graph.cardinalities();
    let mut variable: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut factor: Vec<Vec<f64>> = graph
        .factors()
        .iter()
        .map(|f| vec![0.0; f.stat_count])
        .collect();
    for_each_config(&cards, |cfg| {
        let p = (config_score(graph, theta, cfg) - log_z).exp();
        for (v, &x) in cfg.iter().enumerate() {
            variable[v][x] += p;
        }
        for f in graph.factors() {
            let mut idx = 0usize;
            for &v in &f.scope {
                idx = idx * graph.cardinality(v) + cfg[v];
            }
            factor[f.id][idx] += p;
        }
    });
    Ok(MarginalSet { variable, factor })
}
