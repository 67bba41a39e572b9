//! MAP decoding by max-product message passing: exact with traceback on
//! forests, max-marginal rounding after iterative passes on loopy graphs.
//! Ties always break toward the lowest state index, so decoding is
//! deterministic.

use super::structure::{build_forest, incidence_with_slots, Node};
use super::BpSettings;
use crate::graph::{Assignment, FactorGraph, ParameterVector};
use crate::inference::InferenceError;
use crate::math::for_each_config;

const NONE: usize = usize::MAX;

/// Max-product analogue of the sum-product kernel.
fn max_product_message(
    table: &[f64],
    cards: &[usize],
    inbox: &[Vec<f64>],
    target: usize,
) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; cards[target]];
    let mut idx = 0usize;
    for_each_config(cards, |cfg| {
        let mut s = table[idx];
        for (slot, &x) in cfg.iter().enumerate() {
            if slot != target {
                s += inbox[slot][x];
            }
        }
        let t = cfg[target];
        if s > out[t] {
            out[t] = s;
        }
        idx += 1;
    });
    out
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Returns a MAP assignment. On acyclic graphs this is an exact argmax of
/// the joint score; on loopy graphs it is the per-variable argmax of the
/// max-marginals after message passing under `settings`.
pub fn max_product_decode(
    graph: &FactorGraph,
    theta: &ParameterVector,
    settings: &BpSettings,
) -> Result<Assignment, InferenceError> {
    graph.validate_theta(theta)?;
    if build_forest(graph).is_some() {
        tree_decode(graph, theta)
    } else {
        loopy_decode(graph, theta, settings)
    }
}

fn tree_decode(
    graph: &FactorGraph,
    theta: &ParameterVector,
) -> Result<Assignment, InferenceError> {
    let forest = build_forest(graph).expect("caller checked acyclicity");
    let incidence = incidence_with_slots(graph);
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

    // Upward max-messages toward each component root.
    let mut up_vf: Vec<Vec<Vec<f64>>> = graph
        .factors()
        .iter()
        .map(|f| {
            f.scope
                .iter()
                .map(|&v| vec![0.0; graph.cardinality(v)])
                .collect()
        })
        .collect();
    let mut up_fv = up_vf.clone();
    for node in forest.order.iter().rev() {
        match *node {
            Node::Factor(f) => {
                let sp = forest.parent_slot[f];
                up_fv[f][sp] = max_product_message(table(f), &factor_cards(f), &up_vf[f], sp);
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
                    for (u, m) in up.iter_mut().zip(&up_fv[f][slot]) {
                        *u += m;
                    }
                }
                let my_slot = incidence[v]
                    .iter()
                    .find(|&&(f, _)| f == fp)
                    .map(|&(_, slot)| slot)
                    .expect("parent factor is incident");
                up_vf[fp][my_slot] = up;
            }
        }
    }

    let mut values = vec![NONE; graph.num_variables()];
    for &r in &forest.roots {
        let mut belief = vec![0.0; graph.cardinality(r)];
        for &(f, slot) in &incidence[r] {
            for (b, m) in belief.iter_mut().zip(&up_fv[f][slot]) {
                *b += m;
            }
        }
        values[r] = argmax_lowest(&belief);
    }

    // Downward traceback: each factor jointly picks the best configuration
    // consistent with its already-decided parent variable; configurations
    // are scanned in lexicographic order so ties resolve to the smallest.
    for node in forest.order.iter() {
        let f = match *node {
            Node::Factor(f) => f,
            Node::Var(_) => continue,
        };
        let sp = forest.parent_slot[f];
        let parent_value = values[graph.factors()[f].scope[sp]];
        debug_assert_ne!(parent_value, NONE);
        let cards = factor_cards(f);
        let tbl = table(f);
        let mut best_score = f64::NEG_INFINITY;
        let mut best_cfg: Vec<usize> = Vec::new();
        let mut idx = 0usize;
        for_each_config(&cards, |cfg| {
            let my_idx = idx;
            idx += 1;
            if cfg[sp] != parent_value {
                return;
            }
            let mut s = tbl[my_idx];
            for (slot, &x) in cfg.iter().enumerate() {
                if slot != sp {
                    s += up_vf[f][slot][x];
                }
            }
            if s > best_score {
                best_score = s;
                best_cfg = cfg.to_vec();
            }
        });
        for (slot, &v) in graph.factors()[f].scope.iter().enumerate() {
            if slot != sp {
                values[v] = best_cfg[slot];
            }
        }
    }

    Ok(Assignment(values))
}

fn loopy_decode(
    graph: &FactorGraph,
    theta: &ParameterVector,
    settings: &BpSettings,
) -> Result<Assignment, InferenceError> {
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

    for _ in 0..settings.max_iterations {
        let mut max_change = 0.0f64;
        for f in 0..graph.num_factors() {
            let inbox: Vec<Vec<f64>> = graph.factors()[f]
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
                .collect();
            for s in 0..factor_cards[f].len() {
                let mut raw = max_product_message(table(f), &factor_cards[f], &inbox, s);
                if settings.damping > 0.0 {
                    for (r, &o) in raw.iter_mut().zip(&msgs[f][s]) {
                        *r = (1.0 - settings.damping) * *r + settings.damping * o;
                    }
                }
                let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut diff = 0.0f64;
                for (r, &o) in raw.iter_mut().zip(&msgs[f][s]) {
                    *r -= max;
                    diff = diff.max((*r - o).abs());
                }
                max_change = max_change.max(diff);
                msgs[f][s] = raw;
            }
        }
        if max_change < settings.convergence_tolerance {
            break;
        }
    }

    let mut values = Vec::with_capacity(graph.num_variables());
    for v in 0..graph.num_variables() {
        let mut belief = vec![0.0; graph.cardinality(v)];
        for &(f, slot) in &incidence[v] {
            for (b, m) in belief.iter_mut().zip(&msgs[f][slot]) {
                *b += m;
            }
        }
        values.push(argmax_lowest(&belief));
    }
    Ok(Assignment(values))
}
