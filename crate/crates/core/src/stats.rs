//! Confidence intervals for error-rate estimates and per-trial RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Tail mass used by the one-sided bounds at the edges (0 or n errors).
pub const ONE_SIDED_ALPHA: f64 = 0.05;

/// Generator for trial `index` of a run seeded with `master`.
///
/// Every trial gets its own ChaCha stream, so a trial's randomness does not
/// depend on which worker runs it or in what order.
pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, p: f64) -> bool {
        self.low <= p && p <= self.high
    }

    /// True when `p` lies strictly outside the interval.
    pub fn separates(&self, p: f64) -> bool {
        p < self.low || p > self.high
    }
}

/// 95% interval for `errors` out of `trials`.
///
/// Wilson score interval in the interior; at 0 (or `trials`) errors the
/// exact one-sided bound `1 - 0.05^(1/n)` replaces the open side.
pub fn error_rate_interval(errors: usize, trials: usize) -> Interval {
    assert!(errors <= trials, "more errors than trials");
    if trials == 0 {
        return Interval { low: 0.0, high: 1.0 };
    }
    let n = trials as f64;
    if errors == 0 {
        return Interval {
            low: 0.0,
            high: 1.0 - ONE_SIDED_ALPHA.powf(1.0 / n),
        };
    }
    if errors == trials {
        return Interval {
            low: ONE_SIDED_ALPHA.powf(1.0 / n),
            high: 1.0,
        };
    }
    wilson(errors, trials, Z_95)
}

/// Wilson score interval with normal quantile `z`.
pub fn wilson(errors: usize, trials: usize, z: f64) -> Interval {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        low: (centre - half).max(0.0),
        high: (centre + half).min(1.0),
    }
}
