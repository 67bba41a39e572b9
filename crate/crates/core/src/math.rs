//! Log-space numeric helpers shared by inference and the objectives.

/// log(exp(a) + exp(b)) without leaving log-space.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ exp(x_i) over a slice; empty input yields -inf.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Streaming log-sum-exp accumulator: feeds one term at a time so callers
/// can fold over large enumerations without materializing them.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            // rescale the running sum to the new maximum
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

/// Normalizes a vector of log-weights into a probability distribution.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let z = logsumexp(log_weights);
    log_weights.iter().map(|w| (w - z).exp()).collect()
}

/// x·log(x) with the 0·log(0) = 0 convention used in entropy sums.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Visits every configuration of a vector of finite domains in
/// lexicographic order (first coordinate most significant), calling `f`
/// with the current configuration. Zero-length input visits the single
/// empty configuration once.
pub fn for_each_config(cardinalities: &[usize], mut f: impl FnMut(&[usize])) {
    if cardinalities.iter().any(|&c| c == 0) {
        return;
    }
    let mut values = vec![0usize; cardinalities.len()];
    loop {
        f(&values);
        // odometer increment from the least-significant (last) coordinate
        let mut pos = cardinalities.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            values[pos] += 1;
            if values[pos] < cardinalities[pos] {
                break;
            }
            values[pos] = 0;
        }
    }
}

/// Number of joint configurations, or `None` on overflow.
pub fn state_space_size(cardinalities: &[usize]) -> Option<usize> {
    cardinalities
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
}
