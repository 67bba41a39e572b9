//! Value and analytic gradient of every training objective, evaluated
//! over a dataset of fully observed assignments.
//!
//! All objectives share the empirical half of the gradient (counts of the
//! indicator statistics selected by the data) and differ only in how they
//! approximate, localize, or condition the normalization term:
//!
//! * [`exact_loglik`] — the true log likelihood, normalizer from exact or
//!   BP inference.
//! * [`piecewise_objective`] — each group of factors (a *piece*) is
//!   normalized locally over just the variables it touches.
//! * [`reweighted_piecewise_objective`] — pieces mixed by a distribution
//!   μ; each piece is normalized over the full variable set at rescaled
//!   parameters θ|_R / μ_R, which upper-bounds the true normalizer.
//! * [`node_pseudolikelihood`] / [`edge_pseudolikelihood`] — per-variable
//!   and per-factor conditionals given observed neighbor values.
//!
//! Every local normalization is computed in log-space by enumeration over
//! the relevant (small) configuration spaces.

use crate::graph::{Assignment, FactorGraph, GraphError, ParameterVector};
use crate::inference::{
    brute_force_log_partition, log_partition_and_marginals, InferenceError, InferenceMethod,
    DEFAULT_STATE_CAP,
};
use crate::math::{for_each_config, state_space_size, LogSumExp};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("piece {piece} contains unknown factor id {factor}")]
    UnknownFactor { piece: usize, factor: usize },
    #[error("factor {factor} appears in more than one piece")]
    OverlappingPieces { factor: usize },
    #[error("factor {factor} is not covered by any piece")]
    UncoveredFactor { factor: usize },
    #[error("piece {piece} is empty")]
    EmptyPiece { piece: usize },
    #[error("expected {expected} piece weights, got {got}")]
    WeightCountMismatch { expected: usize, got: usize },
    #[error("piece weight {weight} is not strictly positive")]
    NonPositiveWeight { weight: f64 },
    #[error("piece weights sum to {sum}, not 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("partition has no weights; the reweighted objective requires μ")]
    MissingWeights,
    #[error("piece {piece} spans {states} local configurations, above the cap of {cap}")]
    PieceTooLarge {
        piece: usize,
        states: u128,
        cap: usize,
    },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Disjoint grouping of factor indices into pieces, optionally weighted by
/// a strictly positive distribution μ.
#[derive(Debug, Clone)]
pub struct PiecePartition {
    pieces: Vec<Vec<usize>>,
    weights: Option<Vec<f64>>,
}

impl PiecePartition {
    /// Validates disjointness and coverage of all factors in `graph`.
    pub fn new(pieces: Vec<Vec<usize>>, graph: &FactorGraph) -> Result<Self, ObjectiveError> {
        let mut owner = vec![false; graph.num_factors()];
        for (pi, piece) in pieces.iter().enumerate() {
            if piece.is_empty() {
                return Err(ObjectiveError::EmptyPiece { piece: pi });
            }
            for &f in piece {
                if f >= graph.num_factors() {
                    return Err(ObjectiveError::UnknownFactor {
                        piece: pi,
                        factor: f,
                    });
                }
                if owner[f] {
                    return Err(ObjectiveError::OverlappingPieces { factor: f });
                }
                owner[f] = true;
            }
        }
        if let Some(f) = owner.iter().position(|covered| !covered) {
            return Err(ObjectiveError::UncoveredFactor { factor: f });
        }
        Ok(PiecePartition {
            pieces,
            weights: None,
        })
    }

    /// As [`PiecePartition::new`] with a weight μ_R per piece.
    pub fn with_weights(
        pieces: Vec<Vec<usize>>,
        weights: Vec<f64>,
        graph: &FactorGraph,
    ) -> Result<Self, ObjectiveError> {
        let mut p = Self::new(pieces, graph)?;
        if weights.len() != p.pieces.len() {
            return Err(ObjectiveError::WeightCountMismatch {
                expected: p.pieces.len(),
                got: weights.len(),
            });
        }
        for &w in &weights {
            if !(w > 0.0) {
                return Err(ObjectiveError::NonPositiveWeight { weight: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ObjectiveError::WeightsNotNormalized { sum });
        }
        p.weights = Some(weights);
        Ok(p)
    }

    /// One piece per factor — the canonical partition.
    pub fn per_factor(graph: &FactorGraph) -> Result<Self, ObjectiveError> {
        Self::new((0..graph.num_factors()).map(|f| vec![f]).collect(), graph)
    }

    /// One piece per factor with uniform μ.
    pub fn per_factor_uniform(graph: &FactorGraph) -> Result<Self, ObjectiveError> {
        let n = graph.num_factors();
        Self::with_weights(
            (0..n).map(|f| vec![f]).collect(),
            vec![1.0 / n as f64; n],
            graph,
        )
    }

    /// A single piece holding every factor (the bound's equality case).
    pub fn single(graph: &FactorGraph) -> Result<Self, ObjectiveError> {
        Self::new(vec![(0..graph.num_factors()).collect()], graph)
    }

    pub fn pieces(&self) -> &[Vec<usize>] {
        &self.pieces
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn uniform_weights(mut self) -> Self {
        let n = self.pieces.len();
        self.weights = Some(vec![1.0 / n as f64; n]);
        self
    }
}

/// Objective value (higher is better) and its gradient in θ-space.
#[derive(Debug, Clone)]
pub struct ObjectiveResult {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Gaussian prior N(0, σ²) applied once to a total objective.
#[derive(Debug, Clone, Copy)]
pub struct PriorSpec {
    pub variance: f64,
}

impl PriorSpec {
    pub fn new(variance: f64) -> Self {
        assert!(variance > 0.0, "prior variance must be positive");
        PriorSpec { variance }
    }
}

/// Exact (or BP-approximated) log likelihood of the dataset:
/// Σ_i score(a_i) − N·A(θ), gradient = empirical − N·expected statistics.
pub fn exact_loglik(
    graph: &FactorGraph,
    theta: &ParameterVector,
    data: &[Assignment],
    method: &InferenceMethod,
) -> Result<ObjectiveResult, ObjectiveError> {
    graph.validate_theta(theta)?;
    let n = data.len() as f64;
    let empirical = graph.empirical_statistics(data)?;
    let (marginals, log_partition, _converged) =
        log_partition_and_marginals(graph, theta, method)?;
    let expected = marginals.expected_statistics(graph);

    let mut value = -n * log_partition;
    for (e, t) in empirical.iter().zip(theta.as_slice()) {
        value += e * t;
    }
    let gradient: Vec<f64> = empirical
        .iter()
        .zip(&expected)
        .map(|(e, m)| e - n * m)
        .collect();
    Ok(ObjectiveResult { value, gradient })
}

/// The variables touched by a piece, sorted ascending.
fn piece_variables(graph: &FactorGraph, piece: &[usize]) -> Vec<usize> {
    let mut vars: Vec<usize> = piece
        .iter()
        .flat_map(|&f| graph.factors()[f].scope.iter().copied())
        .collect();
    vars.sort_unstable();
    vars.dedup();
    vars
}

/// Local log partition of one piece at scaled parameters, together with
/// the expected statistics of the local piece distribution (written into
/// `expected` at global statistic indices). Enumeration runs over the
/// piece's own variables only.
fn piece_local_partition(
    graph: &FactorGraph,
    theta: &ParameterVector,
    piece_index: usize,
    piece: &[usize],
    scale: f64,
    expected: &mut [f64],
) -> Result<f64, ObjectiveError> {
    let vars = piece_variables(graph, piece);
    let cards: Vec<usize> = vars.iter().map(|&v| graph.cardinality(v)).collect();
    match state_space_size(&cards) {
        Some(states) if states <= DEFAULT_STATE_CAP => {}
        other => {
            let states = other
                .map(|s| s as u128)
                .unwrap_or_else(|| cards.iter().fold(1u128, |a, &c| a.saturating_mul(c as u128)));
            return Err(ObjectiveError::PieceTooLarge {
                piece: piece_index,
                states,
                cap: DEFAULT_STATE_CAP,
            });
        }
    }
    // position of each graph variable inside the local enumeration
    let mut local_of = vec![usize::MAX; graph.num_variables()];
    for (i, &v) in vars.iter().enumerate() {
        local_of[v] = i;
    }
    // pass 1: local log partition
    let mut acc = LogSumExp::new();
    let score_of = |cfg: &[usize]| -> f64 {
        let mut s = 0.0;
        for &f in piece {
            let fac = &graph.factors()[f];
            let mut idx = 0usize;
            for &v in &fac.scope {
                idx = idx * graph.cardinality(v) + cfg[local_of[v]];
            }
            s += scale * theta[fac.stat_offset + idx];
        }
        s
    };
    for_each_config(&cards, |cfg| acc.add(score_of(cfg)));
    let log_z = acc.value();
    // pass 2: expected statistics under the local distribution
    for_each_config(&cards, |cfg| {
        let p = (score_of(cfg) - log_z).exp();
        for &f in piece {
            let fac = &graph.factors()[f];
            let mut idx = 0usize;
            for &v in &fac.scope {
                idx = idx * graph.cardinality(v) + cfg[local_of[v]];
            }
            expected[fac.stat_offset + idx] += p;
        }
    });
    Ok(log_z)
}

/// Piecewise objective: Σ_i score(a_i) − N·Σ_R A_R(θ), where A_R is the
/// local log partition of piece R over only the variables R touches.
/// Gradient entries for α ∈ R are empirical − N·E_R[φ_α].
pub fn piecewise_objective(
    graph: &FactorGraph,
    theta: &ParameterVector,
    data: &[Assignment],
    partition: &PiecePartition,
) -> Result<ObjectiveResult, ObjectiveError> {
    graph.validate_theta(theta)?;
    let n = data.len() as f64;
    let empirical = graph.empirical_statistics(data)?;
    let mut expected = vec![0.0; graph.dimension()];
    let mut local_partition_sum = 0.0;
    for (pi, piece) in partition.pieces().iter().enumerate() {
        local_partition_sum +=
            piece_local_partition(graph, theta, pi, piece, 1.0, &mut expected)?;
    }
    let mut value = -n * local_partition_sum;
    for (e, t) in empirical.iter().zip(theta.as_slice()) {
        value += e * t;
    }
    let gradient: Vec<f64> = empirical
        .iter()
        .zip(&expected)
        .map(|(e, m)| e - n * m)
        .collect();
    Ok(ObjectiveResult { value, gradient })
}

/// Sum of log-cardinalities of the variables a piece does NOT touch: the
/// additive constant separating the full-graph normalizer of θ|_R from
/// the local one.
fn untouched_vertex_constant(graph: &FactorGraph, piece: &[usize]) -> f64 {
    let vars = piece_variables(graph, piece);
    let mut touched = vec![false; graph.num_variables()];
    for &v in &vars {
        touched[v] = true;
    }
    graph
        .variables()
        .iter()
        .filter(|v| !touched[v.id])
        .map(|v| (v.cardinality as f64).ln())
        .sum()
}

/// Reweighted piecewise objective:
/// Σ_i score(a_i) − N·Σ_R μ_R·A(θ|_R / μ_R), where A is the full-graph
/// log partition of the restricted, rescaled vector. It factorizes into
/// the local partition at scale 1/μ_R plus the untouched-vertex constant.
/// The chain rule cancels μ_R in the gradient, leaving empirical −
/// N·expected statistics under the *scaled* local distributions.
pub fn reweighted_piecewise_objective(
    graph: &FactorGraph,
    theta: &ParameterVector,
    data: &[Assignment],
    partition: &PiecePartition,
) -> Result<ObjectiveResult, ObjectiveError> {
    graph.validate_theta(theta)?;
    let weights = partition.weights().ok_or(ObjectiveError::MissingWeights)?;
    let n = data.len() as f64;
    let empirical = graph.empirical_statistics(data)?;
    let mut expected = vec![0.0; graph.dimension()];
    let mut bound = 0.0;
    for (pi, (piece, &mu)) in partition.pieces().iter().zip(weights).enumerate() {
        let local =
            piece_local_partition(graph, theta, pi, piece, 1.0 / mu, &mut expected)?;
        bound += mu * (local + untouched_vertex_constant(graph, piece));
    }
    let mut value = -n * bound;
    for (e, t) in empirical.iter().zip(theta.as_slice()) {
        value += e * t;
    }
    let gradient: Vec<f64> = empirical
        .iter()
        .zip(&expected)
        .map(|(e, m)| e - n * m)
        .collect();
    Ok(ObjectiveResult { value, gradient })
}

/// Node pseudolikelihood: Σ_i Σ_s log p(a_s | a_neighbors), each
/// conditional normalized over the states of one variable with every
/// factor touching it evaluated at the observed values elsewhere.
pub fn node_pseudolikelihood(
    graph: &FactorGraph,
    theta: &ParameterVector,
    data: &[Assignment],
) -> Result<ObjectiveResult, ObjectiveError> {
    graph.validate_theta(theta)?;
    let mut value = 0.0;
    let mut gradient = vec![0.0; graph.dimension()];
    let mut scratch = Vec::new();
    for a in data {
        graph.validate_assignment(a)?;
        let mut cfg = a.0.clone();
        for v in 0..graph.num_variables() {
            let touching = graph.incident_factors(v);
            if touching.is_empty() {
                // no factors: the conditional is uniform and carries no
                // parameters, so log(1/k) contributes to the value only
                value -= (graph.cardinality(v) as f64).ln();
                continue;
            }
            let card = graph.cardinality(v);
            scratch.clear();
            for x in 0..card {
                cfg[v] = x;
                let mut s = 0.0;
                for &f in touching {
                    let fac = &graph.factors()[f];
                    let mut idx = 0usize;
                    for &u in &fac.scope {
                        idx = idx * graph.cardinality(u) + cfg[u];
                    }
                    s += theta[fac.stat_offset + idx];
                }
                scratch.push(s);
            }
            cfg[v] = a.0[v];
            let log_z = crate::math::logsumexp(&scratch);
            value += scratch[a.0[v]] - log_z;
            // empirical term: each touching factor's observed statistic
            for &f in touching {
                gradient[graph.stat_index(f, a)] += 1.0;
            }
            // expectation under the single-variable conditional
            for x in 0..card {
                let p = (scratch[x] - log_z).exp();
                cfg[v] = x;
                for &f in touching {
                    let fac = &graph.factors()[f];
                    let mut idx = 0usize;
                    for &u in &fac.scope {
                        idx = idx * graph.cardinality(u) + cfg[u];
                    }
                    gradient[fac.stat_offset + idx] -= p;
                }
            }
            cfg[v] = a.0[v];
        }
    }
    Ok(ObjectiveResult { value, gradient })
}

/// Per-edge (per-factor) pseudolikelihood: Σ_i Σ_f log p(a_scope(f) |
/// a_neighbors), normalized over the joint states of the factor's scope.
/// Every factor sharing a variable with the scope contributes to the
/// conditional.
pub fn edge_pseudolikelihood(
    graph: &FactorGraph,
    theta: &ParameterVector,
    data: &[Assignment],
) -> Result<ObjectiveResult, ObjectiveError> {
    graph.validate_theta(theta)?;
    // factors overlapping each factor's scope (including itself)
    let overlapping: Vec<Vec<usize>> = graph
        .factors()
        .iter()
        .map(|f| {
            let mut set: Vec<usize> = f
                .scope
                .iter()
                .flat_map(|&v| graph.incident_factors(v).iter().copied())
                .collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect();

    let mut value = 0.0;
    let mut gradient = vec![0.0; graph.dimension()];
    for a in data {
        graph.validate_assignment(a)?;
        let mut cfg = a.0.clone();
        for f in 0..graph.num_factors() {
            let scope = &graph.factors()[f].scope;
            let cards: Vec<usize> = scope.iter().map(|&v| graph.cardinality(v)).collect();
            let others = &overlapping[f];
            let score_at = |cfg: &[usize]| -> f64 {
                let mut s = 0.0;
                for &g in others {
                    let fac = &graph.factors()[g];
                    let mut idx = 0usize;
                    for &u in &fac.scope {
                        idx = idx * graph.cardinality(u) + cfg[u];
                    }
                    s += theta[fac.stat_offset + idx];
                }
                s
            };
            // cfg currently equals the observation
            let observed_score = score_at(&cfg);
            // pass 1: conditional normalizer over the scope's joint states
            let mut acc = LogSumExp::new();
            for_each_config(&cards, |local| {
                for (slot, &v) in scope.iter().enumerate() {
                    cfg[v] = local[slot];
                }
                acc.add(score_at(&cfg));
            });
            let log_z = acc.value();
            value += observed_score - log_z;
            // empirical term
            for &g in others {
                gradient[graph.stat_index(g, a)] += 1.0;
            }
            // expectation under the joint conditional of the scope
            for_each_config(&cards, |local| {
                for (slot, &v) in scope.iter().enumerate() {
                    cfg[v] = local[slot];
                }
                let p = (score_at(&cfg) - log_z).exp();
                for &g in others {
                    let fac = &graph.factors()[g];
                    let mut idx = 0usize;
                    for &u in &fac.scope {
                        idx = idx * graph.cardinality(u) + cfg[u];
                    }
                    gradient[fac.stat_offset + idx] -= p;
                }
            });
            for &v in scope {
                cfg[v] = a.0[v];
            }
        }
    }
    Ok(ObjectiveResult { value, gradient })
}

/// Subtracts the Gaussian penalty ‖θ‖²/(2σ²) from the value and θ/σ² from
/// the gradient. Applied once to a total objective, never per piece.
pub fn apply_gaussian_prior(
    mut result: ObjectiveResult,
    theta: &ParameterVector,
    prior: &PriorSpec,
) -> ObjectiveResult {
    let inv_var = 1.0 / prior.variance;
    let mut penalty = 0.0;
    for (g, &t) in result.gradient.iter_mut().zip(theta.as_slice()) {
        penalty += t * t;
        *g -= t * inv_var;
    }
    result.value -= 0.5 * penalty * inv_var;
    result
}

/// Outcome of one bound verification: `lhs` is the exact log partition,
/// `rhs` the piecewise (or reweighted) surrogate, `holds` whether
/// lhs ≤ rhs + 1e-9.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

const BOUND_SLACK_TOLERANCE: f64 = 1e-9;

/// Verifies A(θ) ≤ Σ_R A_R(θ) by brute force on the left side.
pub fn check_piecewise_bound(
    graph: &FactorGraph,
    theta: &ParameterVector,
    partition: &PiecePartition,
) -> Result<BoundCheck, ObjectiveError> {
    let lhs = brute_force_log_partition(graph, theta)?;
    let mut scratch = vec![0.0; graph.dimension()];
    let mut rhs = 0.0;
    for (pi, piece) in partition.pieces().iter().enumerate() {
        rhs += piece_local_partition(graph, theta, pi, piece, 1.0, &mut scratch)?;
    }
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK_TOLERANCE,
    })
}

/// Verifies A(θ) ≤ Σ_R μ_R·A(θ|_R / μ_R) (full-graph normalizers, so the
/// untouched-vertex constants are included on the right).
pub fn check_reweighted_bound(
    graph: &FactorGraph,
    theta: &ParameterVector,
    partition: &PiecePartition,
) -> Result<BoundCheck, ObjectiveError> {
    let weights = partition.weights().ok_or(ObjectiveError::MissingWeights)?;
    let lhs = brute_force_log_partition(graph, theta)?;
    let mut scratch = vec![0.0; graph.dimension()];
    let mut rhs = 0.0;
    for (pi, (piece, &mu)) in partition.pieces().iter().zip(weights).enumerate() {
        let local = piece_local_partition(graph, theta, pi, piece, 1.0 / mu, &mut scratch)?;
        rhs += mu * (local + untouched_vertex_constant(graph, piece));
    }
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK_TOLERANCE,
    })
}
