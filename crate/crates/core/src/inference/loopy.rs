//! Loopy sum-product belief propagation with a Bethe estimate of the log
//! partition function. Non-convergence is reported through a flag rather
//! than an error: training loops are expected to proceed on the last
//! iterate.

use super::structure::incidence_with_slots;
use super::tree::sum_product_message;
use super::{BpSchedule, BpSettings, InferenceError, MarginalSet};
use crate::graph::{FactorGraph, ParameterVector};
use crate::math::{for_each_config, normalize_log_weights, xlogx};

#[derive(Debug, Clone)]
pub struct LoopyBpResult {
    pub marginals: MarginalSet,
    /// Bethe free-energy estimate of A(θ); exact on forests.
    pub log_partition: f64,
    pub converged: bool,
    /// Sweeps performed before convergence (or `max_iterations`).
    pub iterations: usize,
}

/// Renormalizes a log message so its maximum entry is 0 and returns the
/// largest absolute change against the previous message.
fn damp_normalize_diff(raw: &mut [f64], old: &[f64], damping: f64) -> f64 {
    if damping > 0.0 {
        for (r, &o) in raw.iter_mut().zip(old) {
            *r = (1.0 - damping) * *r + damping * o;
        }
    }
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut diff = 0.0f64;
    for (r, &o) in raw.iter_mut().zip(old) {
        *r -= max;
        diff = diff.max((*r - o).abs());
    }
    diff
}

pub fn loopy_bp(
    graph: &FactorGraph,
    theta: &ParameterVector,
    settings: &BpSettings,
) -> Result<LoopyBpResult, InferenceError> {
    graph.validate_theta(theta)?;
    let incidence = incidence_with_slots(graph);
    let factor_cards: Vec<Vec<usize>> = graph
        .factors()
        .iter()
        .map(|f| f.scope.iter().map(|&v| graph.cardinality(v)).collect())
        .collect();
    let table = |f: usize| -> &[f64] {
        let fac = &graph.factors()[f];
        &theta.as_slice()[fac.stat_offset..fac.stat_offset + fac.stat_count]
    };

    // Factor→variable messages, log-space, normalized to max = 0.
    let mut msgs: Vec<Vec<Vec<f64>>> = graph
        .factors()
        .iter()
        .map(|f| {
            f.scope
                .iter()
                .map(|&v| vec![0.0; graph.cardinality(v)])
                .collect()
        })
        .collect();

    // Variable→factor inbox for one factor, assembled from current messages.
    let gather_inbox = |msgs: &Vec<Vec<Vec<f64>>>, f: usize| -> Vec<Vec<f64>> {
        graph.factors()[f]
            .scope
            .iter()
            .map(|&v| {
                let mut m = vec![0.0; graph.cardinality(v)];
                for &(f2, slot2) in &incidence[v] {
                    if f2 == f {
                        continue;
                    }
                    for (mi, x) in m.iter_mut().zip(&msgs[f2][slot2]) {
                        *mi += x;
                    }
                }
                m
            })
            .collect()
    };

    let mut converged = false;
    let mut iterations = 0;
    for sweep in 1..=settings.max_iterations {
        iterations = sweep;
        let mut max_change = 0.0f64;
        match settings.schedule {
            BpSchedule::SequentialByFactor => {
                for f in 0..graph.num_factors() {
                    let inbox = gather_inbox(&msgs, f);
                    for s in 0..factor_cards[f].len() {
                        let mut raw =
                            sum_product_message(table(f), &factor_cards[f], &inbox, s);
                        let diff =
                            damp_normalize_diff(&mut raw, &msgs[f][s], settings.damping);
                        max_change = max_change.max(diff);
                        msgs[f][s] = raw;
                    }
                }
            }
            BpSchedule::Synchronous => {
                let snapshot = msgs.clone();
                for f in 0..graph.num_factors() {
                    let inbox = gather_inbox(&snapshot, f);
                    for s in 0..factor_cards[f].len() {
                        let mut raw =
                            sum_product_message(table(f), &factor_cards[f], &inbox, s);
                        let diff =
                            damp_normalize_diff(&mut raw, &snapshot[f][s], settings.damping);
                        max_change = max_change.max(diff);
                        msgs[f][s] = raw;
                    }
                }
            }
        }
        if max_change < settings.convergence_tolerance {
            converged = true;
            break;
        }
    }

    // Beliefs from the final messages.
    let mut variable = Vec::with_capacity(graph.num_variables());
    for v in 0..graph.num_variables() {
        let mut b = vec![0.0; graph.cardinality(v)];
        for &(f, slot) in &incidence[v] {
            for (x, m) in b.iter_mut().zip(&msgs[f][slot]) {
                *x += m;
            }
        }
        variable.push(normalize_log_weights(&b));
    }
    let mut factor = Vec::with_capacity(graph.num_factors());
    for f in 0..graph.num_factors() {
        let inbox = gather_inbox(&msgs, f);
        let tbl = table(f);
        let mut b = Vec::with_capacity(tbl.len());
        let mut idx = 0usize;
        for_each_config(&factor_cards[f], |cfg| {
            let mut s = tbl[idx];
            for (slot, &x) in cfg.iter().enumerate() {
                s += inbox[slot][x];
            }
            b.push(s);
            idx += 1;
        });
        factor.push(normalize_log_weights(&b));
    }

    // Bethe estimate: Σ_f (E_b[θ_f] + H(b_f)) + Σ_v (1 − deg v) H(b_v).
    let mut log_partition = 0.0;
    for f in 0..graph.num_factors() {
        let tbl = table(f);
        for (p, t) in factor[f].iter().zip(tbl) {
            log_partition += p * t - xlogx(*p);
        }
    }
    for v in 0..graph.num_variables() {
        let degree = incidence[v].len() as f64;
        let neg_entropy: f64 = variable[v].iter().map(|&p| xlogx(p)).sum();
        log_partition += (degree - 1.0) * neg_entropy;
    }

    Ok(LoopyBpResult {
        marginals: MarginalSet { variable, factor },
        log_partition,
        converged,
        iterations,
    })
}
