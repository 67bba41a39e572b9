//! Limited-memory BFGS ascent with a strong-Wolfe line search (two-loop
//! recursion, standard y·s/y·y initial scaling). The public surface
//! maximizes; internally the loop minimizes the negated callback so the
//! textbook update formulas apply unchanged.

use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("objective returned a non-finite value or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("line search failed at iteration {iteration} (after gradient-step fallback)")]
    LineSearchFailed { iteration: usize },
}

#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    /// Number of (s, y) history pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient max-norm.
    pub gradient_tolerance: f64,
    /// Armijo sufficient-decrease constant c1.
    pub wolfe_sufficient_decrease: f64,
    /// Curvature constant c2.
    pub wolfe_curvature: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            memory: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            wolfe_sufficient_decrease: 1e-4,
            wolfe_curvature: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub iterations: usize,
    pub final_value: f64,
    pub final_gradient_norm: f64,
    pub converged: bool,
    /// Objective value after each accepted step, starting at θ₀.
    pub values: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn all_finite(value: f64, gradient: &[f64]) -> bool {
    value.is_finite() && gradient.iter().all(|g| g.is_finite())
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, // (s, y, 1/(s·y))
    memory: usize,
}

impl History {
    fn new(memory: usize) -> Self {
        History {
            pairs: VecDeque::with_capacity(memory),
            memory: memory.max(1),
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let guard = 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if sy <= guard {
            return; // curvature too weak to be useful
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: returns the search direction −H·g for the
    /// minimization problem.
    fn direction(&self, gradient: &[f64]) -> Vec<f64> {
        let mut q = gradient.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        for qi in q.iter_mut() {
            *qi = -*qi;
        }
        q
    }
}

struct LineSearchResult {
    x: Vec<f64>,
    phi: f64,
    grad: Vec<f64>,
}

enum LineSearchOutcome {
    Accepted(LineSearchResult),
    NonFinite,
    Failed,
}

/// Strong-Wolfe line search on φ(α) = φ(x + α·d) with φ'(0) < 0
/// (bracketing phase followed by a zoom with bisection). Falls back to
/// the best Armijo point seen when the curvature condition cannot be met
/// within the evaluation budget.
fn wolfe_line_search(
    objective: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    phi0: f64,
    dphi0: f64,
    direction: &[f64],
    alpha_init: f64,
    c1: f64,
    c2: f64,
) -> LineSearchOutcome {
    debug_assert!(dphi0 < 0.0);
    let eval = |objective: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>), alpha: f64| {
        let xt: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        let (v, g) = objective(&xt);
        let slope = dot(&g, direction);
        (xt, v, g, slope)
    };

    let armijo = |alpha: f64, phi: f64| phi <= phi0 + c1 * alpha * dphi0;
    let mut best: Option<(f64, LineSearchResult)> = None;

    let mut prev_alpha = 0.0;
    let mut prev_phi = phi0;
    let mut bracket: Option<(f64, f64, f64, f64)> = None; // (lo, phi_lo, hi, phi_hi)
    let mut alpha = alpha_init.max(1e-16);
    for i in 0..30 {
        let (xt, phi, grad, slope) = eval(objective, alpha);
        if !all_finite(phi, &grad) {
            return LineSearchOutcome::NonFinite;
        }
        if armijo(alpha, phi) && best.as_ref().map_or(true, |(_, b)| phi < b.phi) {
            best = Some((alpha, LineSearchResult { x: xt.clone(), phi, grad: grad.clone() }));
        }
        if !armijo(alpha, phi) || (i > 0 && phi >= prev_phi) {
            bracket = Some((prev_alpha, prev_phi, alpha, phi));
            break;
        }
        if slope.abs() <= -c2 * dphi0 {
            return LineSearchOutcome::Accepted(LineSearchResult { x: xt, phi, grad });
        }
        if slope >= 0.0 {
            bracket = Some((alpha, phi, prev_alpha, prev_phi));
            break;
        }
        prev_alpha = alpha;
        prev_phi = phi;
        alpha *= 2.0;
        if alpha > 1e12 {
            break;
        }
    }

    if let Some((mut lo, mut phi_lo, mut hi, mut phi_hi)) = bracket {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if (hi - lo).abs() < 1e-16 * (1.0 + lo.abs()) {
                break;
            }
            let (xt, phi, grad, slope) = eval(objective, mid);
            if !all_finite(phi, &grad) {
                return LineSearchOutcome::NonFinite;
            }
            if armijo(mid, phi) && best.as_ref().map_or(true, |(_, b)| phi < b.phi) {
                best = Some((mid, LineSearchResult { x: xt.clone(), phi, grad: grad.clone() }));
            }
            if !armijo(mid, phi) || phi >= phi_lo {
                hi = mid;
                phi_hi = phi;
            } else {
                if slope.abs() <= -c2 * dphi0 {
                    return LineSearchOutcome::Accepted(LineSearchResult { x: xt, phi, grad });
                }
                if slope * (hi - lo) >= 0.0 {
                    hi = lo;
                    phi_hi = phi_lo;
                }
                lo = mid;
                phi_lo = phi;
            }
        }
        let _ = phi_hi;
    }

    match best {
        Some((_, r)) => LineSearchOutcome::Accepted(r),
        None => LineSearchOutcome::Failed,
    }
}

/// Maximizes `objective` (value and gradient callback) from `theta0`.
/// Stops when the gradient max-norm falls below the tolerance or the
/// iteration budget is exhausted; accepted steps never decrease the
/// objective.
pub fn maximize(
    objective: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    theta0: &[f64],
    settings: &OptimizerSettings,
) -> Result<(Vec<f64>, OptimizationTrace), OptimizeError> {
    // minimize φ = −f
    let mut phi_eval = |x: &[f64]| {
        let (v, mut g) = objective(x);
        for gi in g.iter_mut() {
            *gi = -*gi;
        }
        (-v, g)
    };

    let mut x = theta0.to_vec();
    let (mut phi, mut grad) = phi_eval(&x);
    if !all_finite(phi, &grad) {
        return Err(OptimizeError::NonFinite { iteration: 0 });
    }
    let mut values = vec![-phi];
    let mut history = History::new(settings.memory);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..settings.max_iterations {
        if max_norm(&grad) <= settings.gradient_tolerance {
            converged = true;
            break;
        }
        iterations = iter + 1;

        let mut direction = history.direction(&grad);
        let mut dphi0 = dot(&direction, &grad);
        if dphi0 >= 0.0 {
            // not a descent direction: reset to steepest descent
            history = History::new(settings.memory);
            direction = grad.iter().map(|g| -g).collect();
            dphi0 = dot(&direction, &grad);
        }
        let alpha_init = if history.pairs.is_empty() {
            (1.0 / dot(&grad, &grad).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut outcome = wolfe_line_search(
            &mut phi_eval,
            &x,
            phi,
            dphi0,
            &direction,
            alpha_init,
            settings.wolfe_sufficient_decrease,
            settings.wolfe_curvature,
        );
        if matches!(outcome, LineSearchOutcome::Failed) && !history.pairs.is_empty() {
            // fall back to a plain gradient step
            history = History::new(settings.memory);
            let direction: Vec<f64> = grad.iter().map(|g| -g).collect();
            let dphi0 = dot(&direction, &grad);
            outcome = wolfe_line_search(
                &mut phi_eval,
                &x,
                phi,
                dphi0,
                &direction,
                (1.0 / dot(&grad, &grad).sqrt()).min(1.0),
                settings.wolfe_sufficient_decrease,
                settings.wolfe_curvature,
            );
        }
        let accepted = match outcome {
            LineSearchOutcome::Accepted(r) => r,
            LineSearchOutcome::NonFinite => {
                return Err(OptimizeError::NonFinite { iteration: iter })
            }
            LineSearchOutcome::Failed => {
                return Err(OptimizeError::LineSearchFailed { iteration: iter })
            }
        };

        let s: Vec<f64> = accepted.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = accepted.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        history.push(s, y);
        x = accepted.x;
        phi = accepted.phi;
        grad = accepted.grad;
        values.push(-phi);
    }
    if max_norm(&grad) <= settings.gradient_tolerance {
        converged = true;
    }

    let trace = OptimizationTrace {
        iterations,
        final_value: -phi,
        final_gradient_norm: max_norm(&grad),
        converged,
        values,
    };
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Assignment, ParameterVector};
    use crate::inference::{brute_force_marginals, InferenceMethod};
    use crate::objectives::exact_loglik;

    #[test]
    fn quadratic_converges_to_center() {
        let center = [0.9, -1.3, 0.5, 2.0];
        let mut obj = |x: &[f64]| {
            let v: f64 = x.iter().zip(&center).map(|(xi, c)| -(xi - c) * (xi - c)).sum();
            let g: Vec<f64> = x.iter().zip(&center).map(|(xi, c)| -2.0 * (xi - c)).collect();
            (v, g)
        };
        let (x, trace) = maximize(&mut obj, &[0.0; 4], &OptimizerSettings::default()).unwrap();
        assert!(trace.converged);
        for (xi, c) in x.iter().zip(&center) {
            assert!((xi - c).abs() < 1e-6);
        }
    }

    #[test]
    fn negated_rosenbrock_converges() {
        let mut obj = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = -(1.0 - a).powi(2) - 100.0 * (b - a * a).powi(2);
            let g = vec![
                2.0 * (1.0 - a) + 400.0 * a * (b - a * a),
                -200.0 * (b - a * a),
            ];
            (v, g)
        };
        let settings = OptimizerSettings {
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            ..OptimizerSettings::default()
        };
        let (x, trace) = maximize(&mut obj, &[0.0, 0.0], &settings).unwrap();
        assert!(trace.converged, "trace: {trace:?}");
        assert!((x[0] - 1.0).abs() < 1e-4);
        assert!((x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn accepted_steps_never_decrease_objective() {
        let mut obj = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = -(1.0 - a).powi(2) - 100.0 * (b - a * a).powi(2);
            let g = vec![
                2.0 * (1.0 - a) + 400.0 * a * (b - a * a),
                -200.0 * (b - a * a),
            ];
            (v, g)
        };
        let (_, trace) = maximize(&mut obj, &[-1.2, 1.0], &OptimizerSettings::default()).unwrap();
        for w in trace.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "descent step in trace: {w:?}");
        }
    }

    #[test]
    fn restart_from_optimum_terminates_immediately() {
        let center = [0.3, 0.7];
        let mut obj = |x: &[f64]| {
            let v: f64 = x.iter().zip(&center).map(|(xi, c)| -(xi - c) * (xi - c)).sum();
            let g: Vec<f64> = x.iter().zip(&center).map(|(xi, c)| -2.0 * (xi - c)).collect();
            (v, g)
        };
        let (x1, _) = maximize(&mut obj, &[5.0, -5.0], &OptimizerSettings::default()).unwrap();
        let (_, trace) = maximize(&mut obj, &x1, &OptimizerSettings::default()).unwrap();
        assert!(trace.converged);
        assert!(trace.iterations <= 2);
    }

    #[test]
    fn memory_size_does_not_change_optimum() {
        let mut obj = |x: &[f64]| {
            // strictly concave with varying curvature per coordinate
            let mut v = 0.0;
            let mut g = Vec::with_capacity(x.len());
            for (i, &xi) in x.iter().enumerate() {
                let w = 1.0 + i as f64;
                let c = (i as f64) * 0.25 - 1.0;
                v -= w * (xi - c) * (xi - c);
                g.push(-2.0 * w * (xi - c));
            }
            (v, g)
        };
        let small = OptimizerSettings {
            memory: 1,
            ..OptimizerSettings::default()
        };
        let large = OptimizerSettings {
            memory: 20,
            ..OptimizerSettings::default()
        };
        let (x_small, t_small) = maximize(&mut obj, &[0.0; 6], &small).unwrap();
        let (x_large, t_large) = maximize(&mut obj, &[0.0; 6], &large).unwrap();
        assert!(t_small.converged && t_large.converged);
        for (a, b) in x_small.iter().zip(&x_large) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn nan_callback_aborts_with_diagnostic() {
        let mut obj = |_: &[f64]| (f64::NAN, vec![0.0, 0.0]);
        let err = maximize(&mut obj, &[0.0, 0.0], &OptimizerSettings::default()).unwrap_err();
        assert!(matches!(err, OptimizeError::NonFinite { .. }));
    }

    #[test]
    fn exact_training_moment_matches() {
        // two binary nodes, one edge factor; data covers all configurations
        let g = build_graph(&[2, 2], &[vec![0, 1]]).unwrap();
        let data = vec![
            Assignment(vec![0, 0]),
            Assignment(vec![0, 0]),
            Assignment(vec![0, 0]),
            Assignment(vec![0, 1]),
            Assignment(vec![1, 0]),
            Assignment(vec![1, 1]),
            Assignment(vec![1, 1]),
        ];
        let n = data.len() as f64;
        let mut obj = |x: &[f64]| {
            let theta = ParameterVector::new(x.to_vec()).unwrap();
            let r = exact_loglik(&g, &theta, &data, &InferenceMethod::BruteForce).unwrap();
            (r.value, r.gradient)
        };
        let settings = OptimizerSettings {
            gradient_tolerance: 1e-7,
            ..OptimizerSettings::default()
        };
        let (x, trace) = maximize(&mut obj, &vec![0.0; 4], &settings).unwrap();
        assert!(trace.converged);
        let theta = ParameterVector::new(x).unwrap();
        let m = brute_force_marginals(&g, &theta).unwrap();
        let empirical = [3.0 / n, 1.0 / n, 1.0 / n, 2.0 / n];
        for (p, e) in m.factor[0].iter().zip(&empirical) {
            assert!((p - e).abs() < 1e-4, "moment mismatch {p} vs {e}");
        }
    }
}
