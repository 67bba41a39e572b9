//! Bipartite traversal order for message passing on factor graphs.

use crate::graph::FactorGraph;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Node {
    Var(usize),
    Factor(usize),
}

/// BFS forest over the variable/factor bipartite graph. Present only when
/// the graph is acyclic.
pub(crate) struct Forest {
    /// Parents before children.
    pub order: Vec<Node>,
    /// Parent factor of each variable (usize::MAX at roots).
    pub parent_factor: Vec<usize>,
    /// Slot (position in scope) of each factor's parent variable.
    pub parent_slot: Vec<usize>,
    /// One root variable per connected component.
    pub roots: Vec<usize>,
}

const NONE: usize = usize::MAX;

/// Returns the BFS forest, or `None` if the factor graph has a cycle.
pub(crate) fn build_forest(graph: &FactorGraph) -> Option<Forest> {
    let nv = graph.num_variables();
    let nf = graph.num_factors();
    let mut visited_var = vec![false; nv];
    let mut visited_fac = vec![false; nf];
    let mut parent_factor = vec![NONE; nv];
    let mut parent_slot = vec![NONE; nf];
    let mut order = Vec::with_capacity(nv + nf);
    let mut roots = Vec::new();

    for start in 0..nv {
        if visited_var[start] {
            continue;
        }
        roots.push(start);
        visited_var[start] = true;
        let mut queue = VecDeque::new();
        queue.push_back(Node::Var(start));
        while let Some(node) = queue.pop_front() {
            order.push(node);
            match node {
                Node::Var(v) => {
                    for &f in graph.incident_factors(v) {
                        if f == parent_factor[v] {
                            continue;
                        }
                        if visited_fac[f] {
                            return None; // second path to f: cycle
                        }
                        visited_fac[f] = true;
                        parent_slot[f] = graph.factors()[f]
                            .scope
                            .iter()
                            .position(|&u| u == v)
                            .expect("incident factor must contain the variable");
                        queue.push_back(Node::Factor(f));
                    }
                }
                Node::Factor(f) => {
                    for (slot, &u) in graph.factors()[f].scope.iter().enumerate() {
                        if slot == parent_slot[f] {
                            continue;
                        }
                        if visited_var[u] {
                            return None;
                        }
                        visited_var[u] = true;
                        parent_factor[u] = f;
                        queue.push_back(Node::Var(u));
                    }
                }
            }
        }
    }

    Some(Forest {
        order,
        parent_factor,
        parent_slot,
        roots,
    })
}

/// Per-variable incidence with scope slots: `(factor id, slot of the
/// variable within that factor's scope)`.
pub(crate) fn incidence_with_slots(graph: &FactorGraph) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); graph.num_variables()];
    for f in graph.factors() {
        for (slot, &v) in f.scope.iter().enumerate() {
            out[v].push((f.id, slot));
        }
    }
    out
}

