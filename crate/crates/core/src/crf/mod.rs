//! Conditional models over token sequences: feature templates plus a
//! label structure (linear chain, two-level factorial, or skip chain).
//! Each input unrolls into a [`FactorGraph`] whose tabular log-potentials
//! are linear in the tied weight vector, so every objective in
//! [`crate::objectives`] applies to conditional training unchanged.

mod features;
mod serialize;
mod unroll;

pub use features::{
    cotemporal_feature, is_capitalized, predicates, skip_feature, transition_feature,
    unary_feature, Alphabet, Lexicon,
};
pub use unroll::{conditional_objective, conditional_objective_unrolled, UnrolledInstance};

use crate::graph::{build_graph, FactorGraph, GraphError};
use crate::inference::InferenceMethod;
use crate::objectives::ObjectiveError;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown label {label:?} in gold annotation")]
    UnknownLabel { label: String },
    #[error("token sequence is empty")]
    EmptySequence,
    #[error("structure expects {expected} label column(s), instance has {got}")]
    LevelCountMismatch { expected: usize, got: usize },
    #[error("instance has {tokens} tokens but {labels} labels in column {column}")]
    LabelLengthMismatch {
        tokens: usize,
        labels: usize,
        column: usize,
    },
    #[error("instance has no gold labels; the objective needs supervision")]
    MissingGold,
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// An input sequence: surface tokens plus per-token auxiliary attributes
/// (for example a provided part-of-speech column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub attributes: Vec<BTreeMap<String, String>>,
}

impl TokenSequence {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let attributes = vec![BTreeMap::new(); tokens.len()];
        TokenSequence { tokens, attributes }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A supervised instance: the input sequence and one gold label vector
/// per level (one for chains and skip chains, two for factorial models).
#[derive(Debug, Clone)]
pub struct TrainingInstance {
    pub sequence: TokenSequence,
    pub labels: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    LinearChain,
    Factorial,
    SkipChain,
}

impl StructureKind {
    pub fn level_count(self) -> usize {
        match self {
            StructureKind::Factorial => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::LinearChain => "chain",
            StructureKind::Factorial => "factorial",
            StructureKind::SkipChain => "skipchain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "chain" => Some(StructureKind::LinearChain),
            "factorial" => Some(StructureKind::Factorial),
            "skipchain" => Some(StructureKind::SkipChain),
            _ => None,
        }
    }
}

/// What each unrolled factor represents; drives feature attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRole {
    Unary { position: usize, level: usize },
    /// Between `position` and `position + 1` within one level's chain.
    Transition { position: usize, level: usize },
    /// Between the two levels at one position.
    Cotemporal { position: usize },
    /// Between positions `first < second` with identical capitalized tokens.
    Skip { first: usize, second: usize },
}

/// A label-variable graph plus the role of every factor.
#[derive(Debug, Clone)]
pub struct UnrolledStructure {
    pub graph: FactorGraph,
    pub roles: Vec<FactorRole>,
}

/// n unary factors and n−1 transition factors over one chain of length n.
pub fn build_linear_chain(n: usize, label_count: usize) -> UnrolledStructure {
    assert!(n >= 1 && label_count >= 1);
    let cards = vec![label_count; n];
    let mut scopes = Vec::with_capacity(2 * n - 1);
    let mut roles = Vec::with_capacity(2 * n - 1);
    for t in 0..n {
        scopes.push(vec![t]);
        roles.push(FactorRole::Unary { position: t, level: 0 });
    }
    for t in 0..n.saturating_sub(1) {
        scopes.push(vec![t, t + 1]);
        roles.push(FactorRole::Transition { position: t, level: 0 });
    }
    let graph = build_graph(&cards, &scopes).expect("chain scopes are valid");
    UnrolledStructure { graph, roles }
}

/// Two parallel chains of length n (level 0 variables come first, then
/// level 1) with one cotemporal pairwise factor per position. Loopy for
/// n ≥ 2.
pub fn build_factorial(n: usize, label_counts: (usize, usize)) -> UnrolledStructure {
    assert!(n >= 1 && label_counts.0 >= 1 && label_counts.1 >= 1);
    let mut cards = vec![label_counts.0; n];
    cards.extend(std::iter::repeat(label_counts.1).take(n));
    let mut scopes = Vec::new();
    let mut roles = Vec::new();
    for level in 0..2 {
        let base = level * n;
        for t in 0..n {
            scopes.push(vec![base + t]);
            roles.push(FactorRole::Unary { position: t, level });
        }
    }
    for level in 0..2 {
        let base = level * n;
        for t in 0..n.saturating_sub(1) {
            scopes.push(vec![base + t, base + t + 1]);
            roles.push(FactorRole::Transition { position: t, level });
        }
    }
    for t in 0..n {
        scopes.push(vec![t, n + t]);
        roles.push(FactorRole::Cotemporal { position: t });
    }
    let graph = build_graph(&cards, &scopes).expect("factorial scopes are valid");
    UnrolledStructure { graph, roles }
}

/// Unordered position pairs (i, j), i < j, whose tokens are
/// string-identical and capitalized.
pub fn skip_pairs(seq: &TokenSequence) -> Vec<(usize, usize)> {
    let n = seq.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        if !is_capitalized(&seq.tokens[i]) {
            continue;
        }
        for j in i + 1..n {
            if seq.tokens[i] == seq.tokens[j] {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Linear chain plus one skip factor per qualifying token pair.
pub fn build_skip_chain(seq: &TokenSequence, label_count: usize) -> UnrolledStructure {
    let n = seq.len();
    assert!(n >= 1 && label_count >= 1);
    let UnrolledStructure {
        graph: _,
        mut roles,
    } = build_linear_chain(n, label_count);
    let mut scopes: Vec<Vec<usize>> = (0..n).map(|t| vec![t]).collect();
    scopes.extend((0..n.saturating_sub(1)).map(|t| vec![t, t + 1]));
    for (i, j) in skip_pairs(seq) {
        scopes.push(vec![i, j]);
        roles.push(FactorRole::Skip { first: i, second: j });
    }
    let graph = build_graph(&vec![label_count; n], &scopes).expect("skip scopes are valid");
    UnrolledStructure { graph, roles }
}

/// Which training objective drives conditional estimation.
#[derive(Debug, Clone)]
pub enum ObjectiveKind {
    Exact(InferenceMethod),
    Piecewise,
    /// Per-factor pieces with uniform μ.
    ReweightedPiecewise,
    NodePseudolikelihood,
    EdgePseudolikelihood,
}

/// A conditional model: structure, label alphabet(s), feature alphabet,
/// tied weights Λ, and the lexicons its templates consult.
#[derive(Debug, Clone)]
pub struct CrfModel {
    pub structure: StructureKind,
    pub labels: Vec<Alphabet>,
    pub features: Alphabet,
    pub weights: Vec<f64>,
    pub lexicons: Vec<Lexicon>,
}

impl CrfModel {
    pub fn new(structure: StructureKind, lexicons: Vec<Lexicon>) -> Self {
        CrfModel {
            structure,
            labels: vec![Alphabet::new(); structure.level_count()],
            features: Alphabet::new(),
            weights: Vec::new(),
            lexicons,
        }
    }

    fn validate_instance(&self, instance: &TrainingInstance) -> Result<(), ModelError> {
        if instance.sequence.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let expected = self.structure.level_count();
        if instance.labels.len() != expected {
            return Err(ModelError::LevelCountMismatch {
                expected,
                got: instance.labels.len(),
            });
        }
        for (column, labels) in instance.labels.iter().enumerate() {
            if labels.len() != instance.sequence.len() {
                return Err(ModelError::LabelLengthMismatch {
                    tokens: instance.sequence.len(),
                    labels: labels.len(),
                    column,
                });
            }
        }
        Ok(())
    }

    /// Grows the label and feature alphabets from training data. Single
    /// threaded by design; after this scan the model is evaluated without
    /// further alphabet growth (unseen test features are ignored).
    pub fn scan_dataset(&mut self, data: &[TrainingInstance]) -> Result<(), ModelError> {
        // pass 1: label alphabets
        for instance in data {
            self.validate_instance(instance)?;
            for (level, labels) in instance.labels.iter().enumerate() {
                for label in labels {
                    self.labels[level].intern(label);
                }
            }
        }
        // label-pair features exist for every pair, observed or not
        for level in 0..self.labels.len() {
            let names: Vec<String> = self.labels[level].names().to_vec();
            for a in &names {
                for b in &names {
                    self.features.intern(&transition_feature(level, a, b));
                }
            }
        }
        if self.structure == StructureKind::Factorial {
            let level0: Vec<String> = self.labels[0].names().to_vec();
            let level1: Vec<String> = self.labels[1].names().to_vec();
            for a in &level0 {
                for b in &level1 {
                    self.features.intern(&cotemporal_feature(a, b));
                }
            }
        }
        // pass 2: observation and skip features, in corpus order
        for instance in data {
            let seq = &instance.sequence;
            for t in 0..seq.len() {
                let preds = predicates(seq, t, &self.lexicons);
                for level in 0..self.labels.len() {
                    let names: Vec<String> = self.labels[level].names().to_vec();
                    for pred in &preds {
                        for label in &names {
                            self.features.intern(&unary_feature(level, pred, label));
                        }
                    }
                }
            }
            if self.structure == StructureKind::SkipChain {
                let names: Vec<String> = self.labels[0].names().to_vec();
                for (i, _) in skip_pairs(seq) {
                    let token = &seq.tokens[i];
                    for a in &names {
                        for b in &names {
                            self.features.intern(&skip_feature(token, a, b));
                        }
                    }
                }
            }
        }
        self.weights.resize(self.features.len(), 0.0);
        Ok(())
    }

    /// The instance-specific structure (label variables and factor roles).
    pub fn structure_for(&self, seq: &TokenSequence) -> Result<UnrolledStructure, ModelError> {
        if seq.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        Ok(match self.structure {
            StructureKind::LinearChain => build_linear_chain(seq.len(), self.labels[0].len()),
            StructureKind::Factorial => {
                build_factorial(seq.len(), (self.labels[0].len(), self.labels[1].len()))
            }
            StructureKind::SkipChain => build_skip_chain(seq, self.labels[0].len()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::from_tokens(tokens.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn linear_chain_counts() {
        let s = build_linear_chain(1, 3);
        assert_eq!(s.graph.num_factors(), 1);
        assert!(matches!(s.roles[0], FactorRole::Unary { position: 0, level: 0 }));

        let s = build_linear_chain(5, 3);
        let unary = s
            .roles
            .iter()
            .filter(|r| matches!(r, FactorRole::Unary { .. }))
            .count();
        let pairwise = s
            .roles
            .iter()
            .filter(|r| matches!(r, FactorRole::Transition { .. }))
            .count();
        assert_eq!(unary, 5);
        assert_eq!(pairwise, 4);
        assert_eq!(s.graph.dimension(), 4 * 9 + 5 * 3);
    }

    #[test]
    fn two_token_chain_is_a_tree() {
        let s = build_linear_chain(2, 3);
        let theta = crate::graph::ParameterVector::zeros(s.graph.dimension());
        assert!(crate::inference::tree_sum_product(&s.graph, &theta).is_ok());
    }

    #[test]
    fn factorial_counts_and_cycles() {
        let s = build_factorial(1, (2, 2));
        assert_eq!(s.graph.num_factors(), 3); // two unary + one cotemporal
        let theta = crate::graph::ParameterVector::zeros(s.graph.dimension());
        assert!(crate::inference::tree_sum_product(&s.graph, &theta).is_ok());

        let s = build_factorial(3, (2, 3));
        let unary = s
            .roles
            .iter()
            .filter(|r| matches!(r, FactorRole::Unary { .. }))
            .count();
        let within = s
            .roles
            .iter()
            .filter(|r| matches!(r, FactorRole::Transition { .. }))
            .count();
        let cotemporal = s
            .roles
            .iter()
            .filter(|r| matches!(r, FactorRole::Cotemporal { .. }))
            .count();
        assert_eq!((unary, within, cotemporal), (6, 4, 3));
        let theta = crate::graph::ParameterVector::zeros(s.graph.dimension());
        assert!(matches!(
            crate::inference::tree_sum_product(&s.graph, &theta),
            Err(crate::inference::InferenceError::CyclicGraph)
        ));
    }

    #[test]
    fn factorial_two_positions_is_brute_forceable() {
        let s = build_factorial(2, (2, 2));
        let states: usize = s.graph.cardinalities().iter().product();
        assert_eq!(states, 16);
        let theta = crate::graph::ParameterVector::zeros(s.graph.dimension());
        assert!(crate::inference::brute_force_log_partition(&s.graph, &theta).is_ok());
    }

    #[test]
    fn skip_pairs_follow_the_capitalized_identity_rule() {
        assert_eq!(
            skip_pairs(&seq(&["Speaker", "is", "Smith", ".", "Smith", "will"])),
            vec![(2, 4)]
        );
        assert_eq!(skip_pairs(&seq(&["speaker", "is", "smith", "smith"])), vec![]);
        assert_eq!(skip_pairs(&seq(&["A", "A", "A"])), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn skip_chain_structure_adds_one_factor_per_pair() {
        let s = build_skip_chain(&seq(&["A", "b", "A"]), 2);
        let skips: Vec<_> = s
            .roles
            .iter()
            .filter(|r| matches!(r, FactorRole::Skip { .. }))
            .collect();
        assert_eq!(skips.len(), 1);
        assert_eq!(s.graph.num_factors(), 3 + 2 + 1);
        // rebuilding yields the identical factor set
        let s2 = build_skip_chain(&seq(&["A", "b", "A"]), 2);
        assert_eq!(s.graph, s2.graph);
        assert_eq!(s.roles, s2.roles);
    }

    #[test]
    fn scan_rejects_mismatched_instances() {
        let mut model = CrfModel::new(StructureKind::LinearChain, vec![]);
        let bad = TrainingInstance {
            sequence: seq(&["a", "b"]),
            labels: vec![vec!["O".to_string()]],
        };
        assert!(matches!(
            model.scan_dataset(&[bad]),
            Err(ModelError::LabelLengthMismatch { .. })
        ));
        let bad_levels = TrainingInstance {
            sequence: seq(&["a"]),
            labels: vec![vec!["O".to_string()], vec!["X".to_string()]],
        };
        assert!(matches!(
            model.scan_dataset(&[bad_levels]),
            Err(ModelError::LevelCountMismatch { .. })
        ));
    }
}
