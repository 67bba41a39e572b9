//! Randomized verification harness for the two local-normalization
//! bounds: generates small random graphs, parameters, and partitions,
//! then checks the piecewise sum bound and the reweighted mixture bound
//! against brute-force log partition values.

use crate::graph::{build_graph, FactorGraph, ParameterVector};
use crate::objectives::{
    check_piecewise_bound, check_reweighted_bound, BoundCheck, ObjectiveError, PiecePartition,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// How pieces are formed in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStyle {
    /// Shuffle the factors and cut into random contiguous groups.
    Random,
    /// One piece per factor.
    PerFactor,
    /// A single piece holding everything (the equality case).
    Single,
}

#[derive(Debug, Clone)]
pub struct BoundTrialSettings {
    pub trials: usize,
    pub max_variables: usize,
    pub max_cardinality: usize,
    /// θ entries drawn uniformly from [-range, range].
    pub theta_range: f64,
    /// Forces θ = 0 in every trial (closed-form slack diagnostics).
    pub zero_theta: bool,
    pub partition: PartitionStyle,
}

impl Default for BoundTrialSettings {
    fn default() -> Self {
        BoundTrialSettings {
            trials: 1000,
            max_variables: 8,
            max_cardinality: 3,
            theta_range: 2.0,
            zero_theta: false,
            partition: PartitionStyle::Random,
        }
    }
}

/// One verified instance: both bound variants plus the closed-form
/// ingredients Σ_R log|states(R)| and Σ_s log|Y_s|.
#[derive(Debug, Clone, Copy)]
pub struct BoundTrial {
    pub piecewise: BoundCheck,
    pub reweighted_uniform: BoundCheck,
    pub reweighted_random: BoundCheck,
    pub piece_state_log_sum: f64,
    pub vertex_log_sum: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundSummary {
    pub min_slack: f64,
    pub mean_slack: f64,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub trials: Vec<BoundTrial>,
}

impl BoundReport {
    fn summarize(checks: impl Iterator<Item = BoundCheck>) -> BoundSummary {
        let mut min_slack = f64::INFINITY;
        let mut sum = 0.0;
        let mut violations = 0;
        let mut count = 0usize;
        for c in checks {
            let slack = c.rhs - c.lhs;
            min_slack = min_slack.min(slack);
            sum += slack;
            if !c.holds {
                violations += 1;
            }
            count += 1;
        }
        BoundSummary {
            min_slack,
            mean_slack: sum / count.max(1) as f64,
            violations,
        }
    }

    pub fn piecewise_summary(&self) -> BoundSummary {
        Self::summarize(self.trials.iter().map(|t| t.piecewise))
    }

    pub fn reweighted_uniform_summary(&self) -> BoundSummary {
        Self::summarize(self.trials.iter().map(|t| t.reweighted_uniform))
    }

    pub fn reweighted_random_summary(&self) -> BoundSummary {
        Self::summarize(self.trials.iter().map(|t| t.reweighted_random))
    }
}

/// Random graph: 2..=max variables, cardinalities 2..=max, factor count
/// up to twice the variable count, scope arities 1–3. Every variable ends
/// up in at least one factor (a unary is added otherwise): the piecewise
/// sum bound presumes the pieces jointly use all variables.
pub fn random_graph(rng: &mut impl Rng, max_variables: usize, max_cardinality: usize) -> FactorGraph {
    let n = rng.gen_range(2..=max_variables.max(2));
    let cards: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(2..=max_cardinality.max(2)))
        .collect();
    let n_factors = rng.gen_range(1..=(2 * n));
    let mut scopes = Vec::with_capacity(n_factors);
    let mut covered = vec![false; n];
    for _ in 0..n_factors {
        let arity = match rng.gen_range(0..10) {
            0..=2 => 1,
            3..=7 => 2,
            _ => 3,
        }
        .min(n);
        let mut vars: Vec<usize> = (0..n).collect();
        for i in 0..arity {
            let j = rng.gen_range(i..n);
            vars.swap(i, j);
        }
        for &v in &vars[..arity] {
            covered[v] = true;
        }
        scopes.push(vars[..arity].to_vec());
    }
    for v in 0..n {
        if !covered[v] {
            scopes.push(vec![v]);
        }
    }
    build_graph(&cards, &scopes).expect("generated scopes are valid")
}

pub fn random_theta(rng: &mut impl Rng, graph: &FactorGraph, range: f64) -> ParameterVector {
    ParameterVector::new(
        (0..graph.dimension())
            .map(|_| rng.gen_range(-range..=range))
            .collect(),
    )
    .expect("uniform draws are finite")
}

/// Random disjoint cover of the factors: shuffled, then cut into
/// contiguous groups.
pub fn random_pieces(rng: &mut impl Rng, graph: &FactorGraph) -> Vec<Vec<usize>> {
    let mut ids: Vec<usize> = (0..graph.num_factors()).collect();
    for i in (1..ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    for id in ids {
        if pieces.is_empty() || rng.gen_bool(0.5) {
            pieces.push(vec![id]);
        } else {
            pieces.last_mut().unwrap().push(id);
        }
    }
    pieces
}

/// Strictly positive weights normalized to sum 1.
pub fn random_weights(rng: &mut impl Rng, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Random tree-structured instance (edge factors forming a spanning tree,
/// occasional unaries) for oracle-equivalence suites.
pub fn random_tree(
    rng: &mut impl Rng,
    max_variables: usize,
    max_cardinality: usize,
    theta_range: f64,
) -> (FactorGraph, ParameterVector) {
    let n = rng.gen_range(2..=max_variables.max(2));
    let cards: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(2..=max_cardinality.max(2)))
        .collect();
    let mut scopes: Vec<Vec<usize>> = (1..n).map(|v| vec![rng.gen_range(0..v), v]).collect();
    for v in 0..n {
        if rng.gen_bool(0.4) {
            scopes.push(vec![v]);
        }
    }
    let graph = build_graph(&cards, &scopes).expect("tree scopes are valid");
    let theta = random_theta(rng, &graph, theta_range);
    (graph, theta)
}

/// Random linear chain with unaries at every position.
pub fn random_chain(
    rng: &mut impl Rng,
    max_variables: usize,
    max_cardinality: usize,
    theta_range: f64,
) -> (FactorGraph, ParameterVector) {
    let n = rng.gen_range(2..=max_variables.max(2));
    let cards: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(2..=max_cardinality.max(2)))
        .collect();
    let mut scopes: Vec<Vec<usize>> = (1..n).map(|v| vec![v - 1, v]).collect();
    scopes.extend((0..n).map(|v| vec![v]));
    let graph = build_graph(&cards, &scopes).expect("chain scopes are valid");
    let theta = random_theta(rng, &graph, theta_range);
    (graph, theta)
}

/// Runs the configured number of randomized bound checks. Deterministic
/// given the seed.
pub fn run_bound_trials(
    settings: &BoundTrialSettings,
    seed: u64,
) -> Result<BoundReport, ObjectiveError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(settings.trials);
    for _ in 0..settings.trials {
        let graph = random_graph(&mut rng, settings.max_variables, settings.max_cardinality);
        let theta = if settings.zero_theta {
            ParameterVector::zeros(graph.dimension())
        } else {
            random_theta(&mut rng, &graph, settings.theta_range)
        };
        let pieces = match settings.partition {
            PartitionStyle::Random => random_pieces(&mut rng, &graph),
            PartitionStyle::PerFactor => (0..graph.num_factors()).map(|f| vec![f]).collect(),
            PartitionStyle::Single => vec![(0..graph.num_factors()).collect()],
        };
        let plain = PiecePartition::new(pieces.clone(), &graph)?;
        let uniform = plain.clone().uniform_weights();
        let weights = random_weights(&mut rng, pieces.len());
        let weighted = PiecePartition::with_weights(pieces.clone(), weights, &graph)?;

        let piecewise = check_piecewise_bound(&graph, &theta, &plain)?;
        let reweighted_uniform = check_reweighted_bound(&graph, &theta, &uniform)?;
        let reweighted_random = check_reweighted_bound(&graph, &theta, &weighted)?;

        let mut piece_state_log_sum = 0.0;
        for piece in &pieces {
            let mut vars: Vec<usize> = piece
                .iter()
                .flat_map(|&f| graph.factors()[f].scope.iter().copied())
                .collect();
            vars.sort_unstable();
            vars.dedup();
            piece_state_log_sum += vars
                .iter()
                .map(|&v| (graph.cardinality(v) as f64).ln())
                .sum::<f64>();
        }
        let vertex_log_sum = graph
            .variables()
            .iter()
            .map(|v| (v.cardinality as f64).ln())
            .sum();

        trials.push(BoundTrial {
            piecewise,
            reweighted_uniform,
            reweighted_random,
            piece_state_log_sum,
            vertex_log_sum,
        });
    }
    Ok(BoundReport { trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_random_trials_hold_both_bounds() {
        let settings = BoundTrialSettings {
            trials: 100,
            ..BoundTrialSettings::default()
        };
        let report = run_bound_trials(&settings, 123).unwrap();
        assert_eq!(report.piecewise_summary().violations, 0);
        assert_eq!(report.reweighted_uniform_summary().violations, 0);
        assert_eq!(report.reweighted_random_summary().violations, 0);
        assert!(report.piecewise_summary().min_slack >= -1e-9);
    }

    #[test]
    fn single_piece_trials_have_zero_slack() {
        let settings = BoundTrialSettings {
            trials: 50,
            partition: PartitionStyle::Single,
            ..BoundTrialSettings::default()
        };
        let report = run_bound_trials(&settings, 7).unwrap();
        for t in &report.trials {
            assert!((t.piecewise.rhs - t.piecewise.lhs).abs() < 1e-9);
            assert!((t.reweighted_uniform.rhs - t.reweighted_uniform.lhs).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_theta_slack_matches_closed_form() {
        let settings = BoundTrialSettings {
            trials: 50,
            zero_theta: true,
            ..BoundTrialSettings::default()
        };
        let report = run_bound_trials(&settings, 11).unwrap();
        for t in &report.trials {
            let slack = t.piecewise.rhs - t.piecewise.lhs;
            let expected = t.piece_state_log_sum - t.vertex_log_sum;
            assert!((slack - expected).abs() < 1e-9);
            // the reweighted bound is exact at θ = 0
            assert!((t.reweighted_uniform.rhs - t.reweighted_uniform.lhs).abs() < 1e-9);
            assert!((t.reweighted_random.rhs - t.reweighted_random.lhs).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_are_deterministic_given_seed() {
        let settings = BoundTrialSettings {
            trials: 20,
            ..BoundTrialSettings::default()
        };
        let a = run_bound_trials(&settings, 99).unwrap();
        let b = run_bound_trials(&settings, 99).unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.piecewise.lhs, y.piecewise.lhs);
            assert_eq!(x.reweighted_random.rhs, y.reweighted_random.rhs);
        }
    }
}
