//! Percentile bootstrap over per-case values.
//!
//! Resampling draws indices from ChaCha20 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`: each index is `x % n` for the next `u64` output
//! `x`, rejecting `x >= 2^64 - (2^64 mod n)` so every index is equally
//! likely. Percentiles interpolate linearly between order statistics at
//! position `q * (resamples - 1)`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            lower: self.lower * factor,
            upper: self.upper * factor,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn bounded(rng: &mut ChaCha20Rng, n: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % n;
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<ConfidenceInterval> {
    if values.is_empty() {
        return Err(Error::invalid("bootstrap needs at least one value"));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::invalid("bootstrap needs 0 < level < 1 and resamples >= 1"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let sum: f64 = (0..n).map(|_| values[bounded(&mut rng, n as u64) as usize]).sum();
            sum / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        mean,
        lower: percentile(&means, alpha),
        upper: percentile(&means, 1.0 - alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_inputs() {
        let c = bootstrap_ci(&[5.0, 5.0, 5.0, 5.0], 0.95, 1000, 1).unwrap();
        assert_eq!((c.mean, c.lower, c.upper), (5.0, 5.0, 5.0));
        let c = bootstrap_ci(&[3.0], 0.95, 1000, 1).unwrap();
        assert_eq!((c.mean, c.lower, c.upper), (3.0, 3.0, 3.0));
        assert!(bootstrap_ci(&[], 0.95, 1000, 1).is_err());
        assert!(bootstrap_ci(&[1.0], 1.0, 1000, 1).is_err());
    }

    #[test]
    fn bernoulli_width_matches_normal_approximation() {
        let values: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        let c = bootstrap_ci(&values, 0.95, 1000, 42).unwrap();
        let expected = 2.0 * 1.96 * 0.5 / 1000f64.sqrt();
        assert!(c.lower <= 0.5 && 0.5 <= c.upper);
        assert!((c.width() - expected).abs() <= 0.2 * expected, "{c:?}");
    }

    #[test]
    fn seed_determinism() {
        let v: Vec<f64> = (0..50).map(|i| (i * 7 % 11) as f64).collect();
        assert_eq!(bootstrap_ci(&v, 0.95, 200, 9).unwrap(), bootstrap_ci(&v, 0.95, 200, 9).unwrap());
        let a = bootstrap_ci(&v, 0.95, 200, 9).unwrap();
        let b = bootstrap_ci(&v, 0.95, 200, 10).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_ne!((a.lower, a.upper), (b.lower, b.upper));
    }

    #[test]
    fn bounded_is_in_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for n in [1u64, 2, 3, 7, 1000] {
            for _ in 0..100 {
                assert!(bounded(&mut rng, n) < n);
            }
        }
    }
}
