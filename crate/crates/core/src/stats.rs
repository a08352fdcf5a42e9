//! Binomial estimates and the k-sigma agreement checks used against closed forms.

use serde::{Deserialize, Serialize};

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl Estimate {
    /// `successes / trials` with SE `√(p̂(1−p̂)/trials)`; an empty sample gives NaN.
    pub fn proportion(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
                trials,
            };
        }
        let p = successes as f64 / trials as f64;
        Self {
            mean: p,
            std_err: binomial_std_err(p, trials),
            trials,
        }
    }

    /// Distance to `target` in units of the binomial SE evaluated at `target`.
    ///
    /// Using the reference probability keeps the test meaningful when the
    /// empirical frequency is exactly 0 or 1.
    pub fn z_score(&self, target: f64) -> f64 {
        let se = binomial_std_err(target, self.trials);
        let diff = (self.mean - target).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }

    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

pub fn binomial_std_err(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}
