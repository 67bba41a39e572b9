//! Exact sum-product on acyclic factor graphs (forests): one upward and
//! one downward pass of unnormalized log-space messages.

use super::structure::{build_forest, incidence_with_slots, Node};
use super::{InferenceError, MarginalSet};
use crate::graph::{FactorGraph, ParameterVector};
use crate::math::{for_each_config, logsumexp, normalize_log_weights, LogSumExp};

const NONE: usize = usize::MAX;

/// Computes the factor→variable message toward `target` (a slot index):
/// logsumexp over the factor table with all other slots weighted by their
/// incoming variable→factor messages.
pub(super) fn sum_product_message(
    table: &[f64],
    cards: &[usize],
    inbox: &[Vec<f64>],
    target: usize,
) -> Vec<f64> {
    let mut acc = vec![LogSumExp::new(); cards[target]];
    let mut idx = 0usize;
    for_each_config(cards, |cfg| {
        let mut s = table[idx];
        for (slot, &x) in cfg.iter().enumerate() {
            if slot != target {
                s += inbox[slot][x];
            }
        }
        acc[cfg[target]].add(s);
        idx += 1;
    });
    acc.iter().map(|a| a.value()).collect()
}

struct Messages {
    /// `fv[f][slot]`: message from factor f to the variable in that slot.
    fv: Vec<Vec<Vec<f64>>>,
    /// `vf[f][slot]`: message from the variable in that slot to factor f.
    vf: Vec<Vec<Vec<f64>>>,
}

fn empty_messages(graph: &FactorGraph) -> Messages {
    let make = |graph: &FactorGraph| {
        graph
            .factors()
            .iter()
            .map(|f| {
                f.scope
                    .iter()
                    .map(|&v| vec![0.0; graph.cardinality(v)])
                    .collect()
            })
            .collect()
    };
    Messages {
        fv: make(graph),
        vf: make(graph),
    }
}

/// Exact marginals and log partition function on a forest. Errors with
/// [`InferenceError::CyclicGraph`] when the graph has a cycle.
pub fn tree_sum_product(
    graph: &FactorGraph,
    theta: &ParameterVector,
) -> Result<(MarginalSet, f64), InferenceError> {
    graph.validate_theta(theta)?;
    let forest = build_forest(graph).ok_or(InferenceError::CyclicGraph)?;
    let incidence = incidence_with_slots(graph);
    let mut msgs = empty_messages(graph);

    let factor_cards = |f: usize| -> Vec<usize> {
        graph.factors()[f]
            .scope
            .iter()
            .map(|&v| graph.cardinality(v))
            .collect()
    };
    let table = |f: usize| -> &[f64] {
        let fac = &graph.factors()[f];
        &theta.as_slice()[fac.stat_offset..fac.stat_offset + fac.stat_count]
    };

    // Upward pass: children before parents.
    for node in forest.order.iter().rev() {
        match *node {
            Node::Factor(f) => {
                let sp = forest.parent_slot[f];
                msgs.fv[f][sp] = sum_product_message(table(f), &factor_cards(f), &msgs.vf[f], sp);
            }
            Node::Var(v) => {
                let fp = forest.parent_factor[v];
                if fp == NONE {
                    continue;
                }
                let mut up = vec![0.0; graph.cardinality(v)];
                for &(f, slot) in &incidence[v] {
                    if f == fp {
                        continue;
                    }
                    for (u, m) in up.iter_mut().zip(&msgs.fv[f][slot]) {
                        *u += m;
                    }
                }
                let my_slot = incidence[v]
                    .iter()
                    .find(|&&(f, _)| f == fp)
                    .map(|&(_, slot)| slot)
                    .expect("parent factor is incident");
                msgs.vf[fp][my_slot] = up;
            }
        }
    }

    // Log partition: one unnormalized root belief per component.
    let mut log_partition = 0.0;
    for &r in &forest.roots {
        let mut belief = vec![0.0; graph.cardinality(r)];
        for &(f, slot) in &incidence[r] {
            for (b, m) in belief.iter_mut().zip(&msgs.fv[f][slot]) {
                *b += m;
            }
        }
        log_partition += logsumexp(&belief);
    }

    // Downward pass: parents before children.
    for node in forest.order.iter() {
        match *node {
            Node::Var(v) => {
                let fp = forest.parent_factor[v];
                for &(f, slot) in &incidence[v] {
                    if f == fp {
                        continue;
                    }
                    let mut down = vec![0.0; graph.cardinality(v)];
                    for &(f2, slot2) in &incidence[v] {
                        if f2 == f {
                            continue;
                        }
                        for (d, m) in down.iter_mut().zip(&msgs.fv[f2][slot2]) {
                            *d += m;
                        }
                    }
                    msgs.vf[f][slot] = down;
                }
            }
            Node::Factor(f) => {
                let sp = forest.parent_slot[f];
                let cards = factor_cards(f);
                for s in 0..cards.len() {
                    if s == sp {
                        continue;
                    }
                    msgs.fv[f][s] = sum_product_message(table(f), &cards, &msgs.vf[f], s);
                }
            }
        }
    }

    // Beliefs.
    let mut variable = Vec::with_capacity(graph.num_variables());
    for v in 0..graph.num_variables() {
        let mut b = vec![0.0; graph.cardinality(v)];
        for &(f, slot) in &incidence[v] {
            for (x, m) in b.iter_mut().zip(&msgs.fv[f][slot]) {
                *x += m;
            }
        }
        variable.push(normalize_log_weights(&b));
    }
    let mut factor = Vec::with_capacity(graph.num_factors());
    for f in graph.factors() {
        let cards = factor_cards(f.id);
        let tbl = table(f.id);
        let mut b = Vec::with_capacity(f.stat_count);
        let mut idx = 0usize;
        for_each_config(&cards, |cfg| {
            let mut s = tbl[idx];
            for (slot, &x) in cfg.iter().enumerate() {
                s += msgs.vf[f.id][slot][x];
            }
            b.push(s);
            idx += 1;
        });
        factor.push(normalize_log_weights(&b));
    }

    Ok((MarginalSet { variable, factor }, log_partition))
}
