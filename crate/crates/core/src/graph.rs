//! Discrete factor graphs with tabular exponential-family parameterization.
//!
//! Every factor owns a contiguous block of the global parameter vector, one
//! entry per joint configuration of its scope (indicator sufficient
//! statistics). The log-score of a full assignment is then the sum of the
//! table entries selected by the assignment, one per factor.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must contain at least one variable")]
    NoVariables,
    #[error("variable {variable} has cardinality 0")]
    ZeroCardinality { variable: usize },
    #[error("factor {factor} references unknown variable {variable}")]
    ScopeVariableMissing { factor: usize, variable: usize },
    #[error("factor {factor} lists variable {variable} twice in its scope")]
    DuplicateScopeVariable { factor: usize, variable: usize },
    #[error("factor {factor} has an empty scope")]
    EmptyScope { factor: usize },
    #[error("unknown factor id {factor}")]
    UnknownFactor { factor: usize },
    #[error("expected vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("assignment value {value} out of range for variable {variable} (cardinality {cardinality})")]
    AssignmentOutOfRange {
        variable: usize,
        value: usize,
        cardinality: usize,
    },
    #[error("parameter vector contains a non-finite entry at index {index}")]
    NonFiniteParameter { index: usize },
}

/// A discrete variable: its index in the graph and the size of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableSpec {
    pub id: usize,
    pub cardinality: usize,
}

/// A factor over an ordered scope of variables. `stat_offset` is the index
/// of the factor's first table entry in the global parameter vector and
/// `stat_count` is the table size (product of scope cardinalities).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub id: usize,
    pub scope: Vec<usize>,
    pub stat_offset: usize,
    pub stat_count: usize,
}

/// An immutable factor graph. Constructed through [`build_graph`], which
/// lays the factor tables out contiguously and validates all scopes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    variables: Vec<VariableSpec>,
    factors: Vec<Factor>,
    dimension: usize,
    /// For each variable, the factors whose scope contains it.
    incident: Vec<Vec<usize>>,
}

/// A full joint assignment, one value per variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<usize>);

/// Dense real parameter vector of length equal to the graph dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    /// Wraps a raw vector, rejecting NaN/Inf entries.
    pub fn new(values: Vec<f64>) -> Result<Self, GraphError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GraphError::NonFiniteParameter { index });
        }
        Ok(ParameterVector { values })
    }

    pub fn zeros(len: usize) -> Self {
        ParameterVector {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for ParameterVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Builds a graph from per-variable cardinalities and a list of factor
/// scopes. Table blocks are assigned in factor order.
pub fn build_graph(
    cardinalities: &[usize],
    factor_scopes: &[Vec<usize>],
) -> Result<FactorGraph, GraphError> {
    if cardinalities.is_empty() {
        return Err(GraphError::NoVariables);
    }
    let variables: Vec<VariableSpec> = cardinalities
        .iter()
        .enumerate()
        .map(|(id, &cardinality)| VariableSpec { id, cardinality })
        .collect();
    for v in &variables {
        if v.cardinality == 0 {
            return Err(GraphError::ZeroCardinality { variable: v.id });
        }
    }

    let mut factors = Vec::with_capacity(factor_scopes.len());
    let mut offset = 0usize;
    for (id, scope) in factor_scopes.iter().enumerate() {
        if scope.is_empty() {
            return Err(GraphError::EmptyScope { factor: id });
        }
        let mut seen = vec![false; variables.len()];
        for &v in scope {
            if v >= variables.len() {
                return Err(GraphError::ScopeVariableMissing {
                    factor: id,
                    variable: v,
                });
            }
            if seen[v] {
                return Err(GraphError::DuplicateScopeVariable {
                    factor: id,
                    variable: v,
                });
            }
            seen[v] = true;
        }
        let stat_count: usize = scope.iter().map(|&v| variables[v].cardinality).product();
        factors.push(Factor {
            id,
            scope: scope.clone(),
            stat_offset: offset,
            stat_count,
        });
        offset += stat_count;
    }

    let mut incident = vec![Vec::new(); variables.len()];
    for f in &factors {
        for &v in &f.scope {
            incident[v].push(f.id);
        }
    }

    Ok(FactorGraph {
        variables,
        factors,
        dimension: offset,
        incident,
    })
}

impl FactorGraph {
    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// Total parameter dimension D (sum of factor table sizes).
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cardinality(&self, variable: usize) -> usize {
        self.variables[variable].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    /// Factors whose scope contains `variable`.
    pub fn incident_factors(&self, variable: usize) -> &[usize] {
        &self.incident[variable]
    }

    /// Row-major table index of `values` within `factor`'s scope (first
    /// scope variable most significant).
    pub fn table_index(&self, factor: usize, values: &[usize]) -> usize {
        let f = &self.factors[factor];
        debug_assert_eq!(values.len(), f.scope.len());
        let mut idx = 0usize;
        for (pos, &v) in f.scope.iter().enumerate() {
            idx = idx * self.variables[v].cardinality + values[pos];
        }
        idx
    }

    /// Global statistic index selected by a full assignment in `factor`.
    pub fn stat_index(&self, factor: usize, assignment: &Assignment) -> usize {
        let f = &self.factors[factor];
        let mut idx = 0usize;
        for &v in &f.scope {
            idx = idx * self.variables[v].cardinality + assignment.0[v];
        }
        f.stat_offset + idx
    }

    pub fn validate_theta(&self, theta: &ParameterVector) -> Result<(), GraphError> {
        if theta.len() != self.dimension {
            return Err(GraphError::DimensionMismatch {
                expected: self.dimension,
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn validate_assignment(&self, a: &Assignment) -> Result<(), GraphError> {
        if a.0.len() != self.variables.len() {
            return Err(GraphError::DimensionMismatch {
                expected: self.variables.len(),
                got: a.0.len(),
            });
        }
        for (v, &value) in a.0.iter().enumerate() {
            if value >= self.variables[v].cardinality {
                return Err(GraphError::AssignmentOutOfRange {
                    variable: v,
                    value,
                    cardinality: self.variables[v].cardinality,
                });
            }
        }
        Ok(())
    }

    /// Sum of empirical indicator statistics over a dataset: entry α counts
    /// how many assignments select statistic α.
    pub fn empirical_statistics(&self, data: &[Assignment]) -> Result<Vec<f64>, GraphError> {
        let mut counts = vec![0.0; self.dimension];
        for a in data {
            self.validate_assignment(a)?;
            for f in 0..self.factors.len() {
                counts[self.stat_index(f, a)] += 1.0;
            }
        }
        Ok(counts)
    }
}

/// Unnormalized log probability Σ_α θ_α φ_α(a): the sum of the table
/// entries selected by the assignment, one per factor.
pub fn assignment_log_score(
    graph: &FactorGraph,
    theta: &ParameterVector,
    a: &Assignment,
) -> Result<f64, GraphError> {
    graph.validate_theta(theta)?;
    graph.validate_assignment(a)?;
    let mut score = 0.0;
    for f in 0..graph.num_factors() {
        score += theta[graph.stat_index(f, a)];
    }
    Ok(score)
}

/// Restriction θ|_piece: equal to θ on statistics owned by factors in
/// `piece`, zero elsewhere.
pub fn restrict_parameters(
    theta: &ParameterVector,
    piece: &[usize],
    graph: &FactorGraph,
) -> Result<ParameterVector, GraphError> {
    graph.validate_theta(theta)?;
    let mut out = ParameterVector::zeros(theta.len());
    for &fid in piece {
        let f = graph
            .factors()
            .get(fid)
            .ok_or(GraphError::UnknownFactor { factor: fid })?;
        for i in f.stat_offset..f.stat_offset + f.stat_count {
            out[i] = theta[i];
        }
    }
    Ok(out)
}
