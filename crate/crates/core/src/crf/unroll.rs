//! Unrolling: evaluating a model's feature templates against one input
//! to produce a factor graph with tied tabular parameters, plus the
//! pullback that turns θ-space gradients into weight-space gradients.

use super::{
    cotemporal_feature, predicates, skip_feature, transition_feature, unary_feature, CrfModel,
    FactorRole, ModelError, ObjectiveKind, TokenSequence, TrainingInstance,
};
use crate::graph::{Assignment, FactorGraph, ParameterVector};
use crate::objectives::{
    apply_gaussian_prior, edge_pseudolikelihood, exact_loglik, node_pseudolikelihood,
    piecewise_objective, reweighted_piecewise_objective, ObjectiveResult, PiecePartition,
    PriorSpec,
};
use rayon::prelude::*;

/// One input compiled against a model: the label graph, the sparse
/// feature lists tying every table entry back to weight indices, and the
/// gold assignment when labels were provided.
#[derive(Debug, Clone)]
pub struct UnrolledInstance {
    pub graph: FactorGraph,
    pub roles: Vec<FactorRole>,
    /// Active feature indices per global statistic index; table entries
    /// are the sums of the referenced weights.
    pub features: Vec<Vec<u32>>,
    pub gold: Option<Assignment>,
}

impl UnrolledInstance {
    /// Instance-specific log-potentials: θ_α = Σ_{k active at α} λ_k.
    pub fn theta(&self, weights: &[f64]) -> ParameterVector {
        let mut values = Vec::with_capacity(self.features.len());
        for active in &self.features {
            let mut s = 0.0;
            for &k in active {
                s += weights[k as usize];
            }
            values.push(s);
        }
        ParameterVector::new(values).expect("finite weights sum to finite tables")
    }

    /// Scatters a θ-space gradient back onto the tied weights.
    pub fn pull_back(&self, theta_gradient: &[f64], weight_gradient: &mut [f64]) {
        for (active, &g) in self.features.iter().zip(theta_gradient) {
            for &k in active {
                weight_gradient[k as usize] += g;
            }
        }
    }
}

impl CrfModel {
    fn gold_assignment(
        &self,
        seq_len: usize,
        labels: &[Vec<String>],
    ) -> Result<Assignment, ModelError> {
        let mut values = Vec::with_capacity(seq_len * self.labels.len());
        for (level, column) in labels.iter().enumerate() {
            for label in column {
                let idx = self.labels[level]
                    .lookup(label)
                    .ok_or_else(|| ModelError::UnknownLabel {
                        label: label.clone(),
                    })?;
                values.push(idx);
            }
        }
        Ok(Assignment(values))
    }

    /// Unrolls one input into its factor graph and feature lists. With
    /// `gold` labels present they are converted to an assignment (unknown
    /// labels are a data error). Features absent from the alphabet are
    /// ignored, so test-time inputs never grow the model.
    pub fn unroll(
        &self,
        seq: &TokenSequence,
        gold: Option<&[Vec<String>]>,
    ) -> Result<UnrolledInstance, ModelError> {
        let structure = self.structure_for(seq)?;
        let graph = structure.graph;
        let roles = structure.roles;
        let mut features: Vec<Vec<u32>> = vec![Vec::new(); graph.dimension()];

        for (factor, role) in graph.factors().iter().zip(&roles) {
            let base = factor.stat_offset;
            match *role {
                FactorRole::Unary { position, level } => {
                    let preds = predicates(seq, position, &self.lexicons);
                    for (y, label) in self.labels[level].names().iter().enumerate() {
                        let slot = &mut features[base + y];
                        for pred in &preds {
                            if let Some(k) = self.features.lookup(&unary_feature(level, pred, label))
                            {
                                slot.push(k as u32);
                            }
                        }
                    }
                }
                FactorRole::Transition { level, .. } => {
                    let count = self.labels[level].len();
                    for (a, from) in self.labels[level].names().iter().enumerate() {
                        for (b, to) in self.labels[level].names().iter().enumerate() {
                            if let Some(k) =
                                self.features.lookup(&transition_feature(level, from, to))
                            {
                                features[base + a * count + b].push(k as u32);
                            }
                        }
                    }
                }
                FactorRole::Cotemporal { .. } => {
                    let count1 = self.labels[1].len();
                    for (a, l0) in self.labels[0].names().iter().enumerate() {
                        for (b, l1) in self.labels[1].names().iter().enumerate() {
                            if let Some(k) = self.features.lookup(&cotemporal_feature(l0, l1)) {
                                features[base + a * count1 + b].push(k as u32);
                            }
                        }
                    }
                }
                FactorRole::Skip { first, .. } => {
                    let token = &seq.tokens[first];
                    let count = self.labels[0].len();
                    for (a, la) in self.labels[0].names().iter().enumerate() {
                        for (b, lb) in self.labels[0].names().iter().enumerate() {
                            if let Some(k) = self.features.lookup(&skip_feature(token, la, lb)) {
                                features[base + a * count + b].push(k as u32);
                            }
                        }
                    }
                }
            }
        }

        let gold = match gold {
            Some(labels) => Some(self.gold_assignment(seq.len(), labels)?),
            None => None,
        };
        Ok(UnrolledInstance {
            graph,
            roles,
            features,
            gold,
        })
    }
}

fn instance_result(
    weights: &[f64],
    instance: &UnrolledInstance,
    kind: &ObjectiveKind,
) -> Result<ObjectiveResult, ModelError> {
    let theta = instance.theta(weights);
    let gold = instance.gold.as_ref().ok_or(ModelError::MissingGold)?;
    let data = std::slice::from_ref(gold);
    let result = match kind {
        ObjectiveKind::Exact(method) => exact_loglik(&instance.graph, &theta, data, method)?,
        ObjectiveKind::Piecewise => {
            let partition = PiecePartition::per_factor(&instance.graph)?;
            piecewise_objective(&instance.graph, &theta, data, &partition)?
        }
        ObjectiveKind::ReweightedPiecewise => {
            let partition = PiecePartition::per_factor_uniform(&instance.graph)?;
            reweighted_piecewise_objective(&instance.graph, &theta, data, &partition)?
        }
        ObjectiveKind::NodePseudolikelihood => node_pseudolikelihood(&instance.graph, &theta, data)?,
        ObjectiveKind::EdgePseudolikelihood => edge_pseudolikelihood(&instance.graph, &theta, data)?,
    };
    Ok(result)
}

/// Evaluates the selected objective over pre-unrolled instances in
/// weight space. Instances are processed in parallel but reduced in
/// index order, so the result does not depend on the thread count. The
/// prior is applied once to the summed objective.
pub fn conditional_objective_unrolled(
    weights: &[f64],
    instances: &[UnrolledInstance],
    kind: &ObjectiveKind,
    prior: Option<&PriorSpec>,
) -> Result<ObjectiveResult, ModelError> {
    let per_instance: Vec<Result<ObjectiveResult, ModelError>> = instances
        .par_iter()
        .map(|instance| instance_result(weights, instance, kind))
        .collect();
    let mut value = 0.0;
    let mut gradient = vec![0.0; weights.len()];
    for (instance, result) in instances.iter().zip(per_instance) {
        let result = result?;
        value += result.value;
        instance.pull_back(&result.gradient, &mut gradient);
    }
    let total = ObjectiveResult { value, gradient };
    Ok(match prior {
        Some(p) => {
            let lambda = ParameterVector::new(weights.to_vec())?;
            apply_gaussian_prior(total, &lambda, p)
        }
        None => total,
    })
}

/// Spec-shaped entry point: unrolls `data` against the model and
/// evaluates the selected objective at the model's current weights.
pub fn conditional_objective(
    model: &CrfModel,
    data: &[TrainingInstance],
    kind: &ObjectiveKind,
    prior: Option<&PriorSpec>,
) -> Result<ObjectiveResult, ModelError> {
    let instances = model.unroll_dataset(data)?;
    conditional_objective_unrolled(&model.weights, &instances, kind, prior)
}

impl CrfModel {
    /// Unrolls every instance (in parallel, order-preserving).
    pub fn unroll_dataset(
        &self,
        data: &[TrainingInstance],
    ) -> Result<Vec<UnrolledInstance>, ModelError> {
        data.par_iter()
            .map(|inst| self.unroll(&inst.sequence, Some(&inst.labels)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{Alphabet, StructureKind};
    use crate::inference::InferenceMethod;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::from_tokens(tokens.iter().map(|t| t.to_string()).collect())
    }

    fn instance(tokens: &[&str], labels: &[&str]) -> TrainingInstance {
        TrainingInstance {
            sequence: seq(tokens),
            labels: vec![labels.iter().map(|l| l.to_string()).collect()],
        }
    }

    fn tiny_chain_model(data: &[TrainingInstance]) -> CrfModel {
        let mut model = CrfModel::new(StructureKind::LinearChain, vec![]);
        model.scan_dataset(data).unwrap();
        model
    }

    #[test]
    fn zero_weights_unroll_to_zero_tables() {
        let data = vec![instance(&["a", "b"], &["X", "Y"])];
        let model = tiny_chain_model(&data);
        let u = model.unroll(&data[0].sequence, None).unwrap();
        let theta = u.theta(&model.weights);
        assert!(theta.as_slice().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn single_transition_feature_sets_one_entry() {
        // hand-built model: two labels, exactly one feature (the A→B bias)
        let mut model = CrfModel::new(StructureKind::LinearChain, vec![]);
        model.labels = vec![Alphabet::from_names(vec!["A".into(), "B".into()]).unwrap()];
        model.features = Alphabet::new();
        model.features.intern(&transition_feature(0, "A", "B"));
        model.weights = vec![2.0];
        let u = model.unroll(&seq(&["x", "y"]), None).unwrap();
        let theta = u.theta(&model.weights);
        // factors: unary(0), unary(1), transition(0-1); transition block
        // starts at offset 4, entry (A,B) = index 0*2+1
        let offset = u.graph.factors()[2].stat_offset;
        for (i, &t) in theta.as_slice().iter().enumerate() {
            if i == offset + 1 {
                assert_eq!(t, 2.0);
            } else {
                assert_eq!(t, 0.0);
            }
        }
    }

    #[test]
    fn two_features_on_one_entry_sum() {
        let mut model = CrfModel::new(StructureKind::LinearChain, vec![]);
        model.labels = vec![Alphabet::from_names(vec!["A".into()]).unwrap()];
        model.features = Alphabet::new();
        model.features.intern(&unary_feature(0, "w=x", "A"));
        model.features.intern(&unary_feature(0, "lw=x", "A"));
        model.weights = vec![1.0, 0.5];
        let u = model.unroll(&seq(&["x"]), None).unwrap();
        let theta = u.theta(&model.weights);
        assert!((theta[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn unrolled_tables_match_independent_recomputation_bit_for_bit() {
        let data = vec![
            instance(&["Smith", "spoke", "here"], &["B", "O", "O"]),
            instance(&["Dr", "Smith"], &["O", "B"]),
        ];
        let mut model = tiny_chain_model(&data);
        let mut rng = StdRng::seed_from_u64(5);
        for w in model.weights.iter_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
        let u = model.unroll(&data[0].sequence, None).unwrap();
        let theta = u.theta(&model.weights);
        // recompute every entry from feature names, independent of the
        // cached feature lists
        for (factor, role) in u.graph.factors().iter().zip(&u.roles) {
            match *role {
                FactorRole::Unary { position, level } => {
                    let preds = predicates(&data[0].sequence, position, &[]);
                    for (y, label) in model.labels[level].names().iter().enumerate() {
                        let mut expect = 0.0;
                        for p in &preds {
                            if let Some(k) = model.features.lookup(&unary_feature(level, p, label))
                            {
                                expect += model.weights[k];
                            }
                        }
                        assert_eq!(theta[factor.stat_offset + y], expect);
                    }
                }
                FactorRole::Transition { level, .. } => {
                    let count = model.labels[level].len();
                    for (a, from) in model.labels[level].names().iter().enumerate() {
                        for (b, to) in model.labels[level].names().iter().enumerate() {
                            let k = model
                                .features
                                .lookup(&transition_feature(level, from, to))
                                .unwrap();
                            assert_eq!(
                                theta[factor.stat_offset + a * count + b],
                                model.weights[k]
                            );
                        }
                    }
                }
                _ => unreachable!("chain model"),
            }
        }
    }

    #[test]
    fn weight_perturbation_moves_exactly_the_tied_entries() {
        let data = vec![instance(&["a", "a", "b"], &["X", "X", "Y"])];
        let mut model = tiny_chain_model(&data);
        let u = model.unroll(&data[0].sequence, None).unwrap();
        let before = u.theta(&model.weights);
        let k = model.features.lookup(&unary_feature(0, "w=a", "X")).unwrap();
        let delta = 0.625;
        model.weights[k] += delta;
        let after = u.theta(&model.weights);
        for (idx, active) in u.features.iter().enumerate() {
            let expected = if active.contains(&(k as u32)) { delta } else { 0.0 };
            assert_eq!(after[idx] - before[idx], expected);
        }
        // the w=a predicate fires at positions 0 and 1 for label X
        let moved = u
            .features
            .iter()
            .filter(|active| active.contains(&(k as u32)))
            .count();
        assert_eq!(moved, 2);
    }

    #[test]
    fn unknown_gold_label_is_a_data_error() {
        let data = vec![instance(&["a"], &["X"])];
        let model = tiny_chain_model(&data);
        let err = model
            .unroll(&seq(&["a"]), Some(&[vec!["Z".to_string()]]))
            .unwrap_err();
        assert!(matches!(err, ModelError::UnknownLabel { .. }));
    }

    #[test]
    fn piecewise_value_at_zero_weights_is_sum_of_table_sizes() {
        let data = vec![
            instance(&["a", "b", "c"], &["X", "Y", "X"]),
            instance(&["b", "a"], &["Y", "X"]),
        ];
        let model = tiny_chain_model(&data);
        let r = conditional_objective(&model, &data, &ObjectiveKind::Piecewise, None).unwrap();
        // instance 1: 3 unary (log 2) + 2 transitions (log 4)
        // instance 2: 2 unary (log 2) + 1 transition (log 4)
        let expected = -(5.0 * 2.0f64.ln() + 3.0 * 4.0f64.ln());
        assert!((r.value - expected).abs() < 1e-12);
    }

    #[test]
    fn lambda_gradient_is_theta_gradient_summed_over_ties() {
        let data = vec![instance(&["a", "a"], &["X", "X"])];
        let mut model = tiny_chain_model(&data);
        let mut rng = StdRng::seed_from_u64(9);
        for w in model.weights.iter_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
        let u = model.unroll(&data[0].sequence, Some(&data[0].labels)).unwrap();
        let theta = u.theta(&model.weights);
        let gold = u.gold.clone().unwrap();
        let r = exact_loglik(
            &u.graph,
            &theta,
            std::slice::from_ref(&gold),
            &InferenceMethod::Tree,
        )
        .unwrap();
        let mut manual = vec![0.0; model.weights.len()];
        for (idx, active) in u.features.iter().enumerate() {
            for &k in active {
                manual[k as usize] += r.gradient[idx];
            }
        }
        let full = conditional_objective(
            &model,
            &data,
            &ObjectiveKind::Exact(InferenceMethod::Tree),
            None,
        )
        .unwrap();
        for (a, b) in manual.iter().zip(&full.gradient) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn finite_difference_lambda(
        model: &CrfModel,
        data: &[TrainingInstance],
        kind: &ObjectiveKind,
        prior: Option<&PriorSpec>,
    ) -> Vec<f64> {
        let h = 1e-5;
        let mut out = Vec::with_capacity(model.weights.len());
        for k in 0..model.weights.len() {
            let mut plus = model.clone();
            plus.weights[k] += h;
            let mut minus = model.clone();
            minus.weights[k] -= h;
            let vp = conditional_objective(&plus, data, kind, prior).unwrap().value;
            let vm = conditional_objective(&minus, data, kind, prior).unwrap().value;
            out.push((vp - vm) / (2.0 * h));
        }
        out
    }

    #[test]
    fn lambda_gradients_match_finite_differences_for_all_objectives() {
        let data = vec![
            instance(&["Ann", "runs"], &["B", "O"]),
            instance(&["Bob", "Ann", "sits"], &["B", "B", "O"]),
        ];
        let mut model = tiny_chain_model(&data);
        let mut rng = StdRng::seed_from_u64(11);
        for w in model.weights.iter_mut() {
            *w = rng.gen_range(-0.8..0.8);
        }
        let prior = PriorSpec::new(5.0);
        let kinds = [
            ObjectiveKind::Exact(InferenceMethod::Tree),
            ObjectiveKind::Piecewise,
            ObjectiveKind::ReweightedPiecewise,
            ObjectiveKind::NodePseudolikelihood,
            ObjectiveKind::EdgePseudolikelihood,
        ];
        for kind in &kinds {
            let r = conditional_objective(&model, &data, kind, Some(&prior)).unwrap();
            let fd = finite_difference_lambda(&model, &data, kind, Some(&prior));
            for (i, (a, f)) in r.gradient.iter().zip(&fd).enumerate() {
                let tol = 1e-7 + 1e-5 * a.abs().max(f.abs());
                assert!(
                    (a - f).abs() <= tol,
                    "{kind:?} gradient entry {i}: {a} vs {f}"
                );
            }
        }
    }

    #[test]
    fn chain_exact_objective_concave_in_lambda() {
        let data = vec![
            instance(&["a", "b", "a"], &["X", "Y", "X"]),
            instance(&["b", "b"], &["Y", "Y"]),
        ];
        let model = tiny_chain_model(&data);
        let mut rng = StdRng::seed_from_u64(13);
        let kind = ObjectiveKind::Exact(InferenceMethod::Tree);
        for _ in 0..50 {
            let mut m1 = model.clone();
            let mut m2 = model.clone();
            for w in m1.weights.iter_mut() {
                *w = rng.gen_range(-2.0..2.0);
            }
            for w in m2.weights.iter_mut() {
                *w = rng.gen_range(-2.0..2.0);
            }
            let mut mid = model.clone();
            for ((w, a), b) in mid.weights.iter_mut().zip(&m1.weights).zip(&m2.weights) {
                *w = 0.5 * (a + b);
            }
            let v1 = conditional_objective(&m1, &data, &kind, None).unwrap().value;
            let v2 = conditional_objective(&m2, &data, &kind, None).unwrap().value;
            let vm = conditional_objective(&mid, &data, &kind, None).unwrap().value;
            assert!(vm >= 0.5 * (v1 + v2) - 1e-9);
        }
    }

    #[test]
    fn factorial_gold_assignment_stacks_levels() {
        let mut model = CrfModel::new(StructureKind::Factorial, vec![]);
        let data = vec![TrainingInstance {
            sequence: seq(&["a", "b"]),
            labels: vec![
                vec!["N".to_string(), "V".to_string()],
                vec!["I".to_string(), "O".to_string()],
            ],
        }];
        model.scan_dataset(&data).unwrap();
        let u = model
            .unroll(&data[0].sequence, Some(&data[0].labels))
            .unwrap();
        let gold = u.gold.unwrap();
        assert_eq!(gold.0.len(), 4);
        assert_eq!(gold.0, vec![0, 1, 0, 1]);
    }
}
