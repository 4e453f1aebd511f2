//! Synthetic Gaussian mixtures with controllable class overlap.
//!
//! Each class is a unit-variance spherical Gaussian around a mean
//! placed so that the closest pair of means sits `separation`
//! standard deviations apart. With `separation >= 6` the class
//! posteriors are numerically one-hot; smaller separations give
//! genuinely overlapping clusters.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Whether the mixture should behave like a deterministic labeling
/// (one-hot posteriors) or a genuinely stochastic one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Deterministic,
    Stochastic,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Deterministic => "deterministic",
            Scenario::Stochastic => "stochastic",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "deterministic" => Ok(Scenario::Deterministic),
            "stochastic" => Ok(Scenario::Stochastic),
            other => Err(Error::config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Minimum separation under which nearest-mean posteriors round to
/// one-hot in double precision.
pub const DETERMINISTIC_MIN_SEPARATION: f64 = 6.0;

/// Class means with minimum pairwise distance `separation`: a scaled
/// orthogonal arrangement when the space is wide enough, otherwise a
/// circle (or a line for one dimension).
pub fn mixture_means(k: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut means = vec![vec![0.0; dim]; k];
    if dim >= k {
        // Pairwise distances are all exactly `separation`.
        let r = separation / f64::sqrt(2.0);
        for (c, mean) in means.iter_mut().enumerate() {
            mean[c] = r;
        }
    } else if dim >= 2 {
        // Adjacent means sit exactly `separation` apart on the circle.
        let r = separation / (2.0 * (std::f64::consts::PI / k as f64).sin());
        for (c, mean) in means.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
            mean[0] = r * theta.cos();
            mean[1] = r * theta.sin();
        }
    } else {
        for (c, mean) in means.iter_mut().enumerate() {
            mean[0] = separation * c as f64;
        }
    }
    means
}

/// Draws `n_per_class` unit-variance Gaussian samples around each
/// class mean, with labels interleaved so any prefix stays balanced.
pub fn synth_gaussian_mixture(
    k: usize,
    n_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
    scenario: Scenario,
) -> Result<LabeledDataset> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 classes, got {k}")));
    }
    if dim == 0 {
        return Err(Error::config("need at least 1 feature dimension"));
    }
    if n_per_class == 0 {
        return Err(Error::config("need at least 1 example per class"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::config(format!(
            "separation must be finite and nonnegative, got {separation}"
        )));
    }
    if scenario == Scenario::Deterministic && separation < DETERMINISTIC_MIN_SEPARATION {
        return Err(Error::config(format!(
            "deterministic scenario needs separation >= {DETERMINISTIC_MIN_SEPARATION}, \
             got {separation}; use the stochastic scenario for overlapping clusters"
        )));
    }

    let means = mixture_means(k, dim, separation);
    let n = k * n_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[[i, j]] = means[c][j] + z;
        }
        labels.push(c + 1);
    }
    LabeledDataset::new(features, labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise_min_distance(means: &[Vec<f64>]) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..means.len() {
            for b in a + 1..means.len() {
                let d2: f64 = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = synth_gaussian_mixture(3, 40, 5, 8.0, 7, Scenario::Deterministic).unwrap();
        let b = synth_gaussian_mixture(3, 40, 5, 8.0, 7, Scenario::Deterministic).unwrap();
        assert_eq!(a, b);
        let c = synth_gaussian_mixture(3, 40, 5, 8.0, 8, Scenario::Deterministic).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn class_counts_are_exact_and_interleaved() {
        let data = synth_gaussian_mixture(4, 25, 3, 2.0, 1, Scenario::Stochastic).unwrap();
        assert_eq!(data.n(), 100);
        let mut counts = [0usize; 4];
        for &y in &data.labels {
            counts[y - 1] += 1;
        }
        assert_eq!(counts, [25; 4]);
        assert_eq!(&data.labels[..5], &[1, 2, 3, 4, 1]);
    }

    #[test]
    fn deterministic_scenario_demands_wide_separation() {
        assert!(synth_gaussian_mixture(3, 10, 2, 4.0, 0, Scenario::Deterministic).is_err());
        assert!(synth_gaussian_mixture(3, 10, 2, 6.0, 0, Scenario::Deterministic).is_ok());
        assert!(synth_gaussian_mixture(3, 10, 2, 4.0, 0, Scenario::Stochastic).is_ok());
    }

    #[test]
    fn mean_arrangements_hit_the_requested_separation() {
        for (k, dim) in [(3, 8), (5, 5), (5, 2), (7, 3), (4, 1)] {
            let means = mixture_means(k, dim, 6.5);
            let min = pairwise_min_distance(&means);
            assert!((min - 6.5).abs() < 1e-9, "k={k} dim={dim} min={min}");
        }
    }

    #[test]
    fn wide_separation_leaves_no_bayes_confusion() {
        // Independent route: classify a fresh draw by nearest
        // empirical class mean and count mistakes.
        let data = synth_gaussian_mixture(3, 10_000, 4, 10.0, 42, Scenario::Deterministic).unwrap();
        let mut means = vec![vec![0.0; data.dim()]; 3];
        let mut counts = [0.0f64; 3];
        for (i, &y) in data.labels.iter().enumerate() {
            counts[y - 1] += 1.0;
            for j in 0..data.dim() {
                means[y - 1][j] += data.features[[i, j]];
            }
        }
        for (mean, &c) in means.iter_mut().zip(&counts) {
            for v in mean.iter_mut() {
                *v /= c;
            }
        }
        let mut errors = 0usize;
        for (i, &y) in data.labels.iter().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for (c, mean) in means.iter().enumerate() {
                let d2: f64 = (0..data.dim())
                    .map(|j| (data.features[[i, j]] - mean[j]).powi(2))
                    .sum();
                if d2 < best.0 {
                    best = (d2, c + 1);
                }
            }
            if best.1 != y {
                errors += 1;
            }
        }
        let rate = errors as f64 / data.n() as f64;
        assert!(rate < 0.001, "error rate {rate}");
    }

    #[test]
    fn narrow_separation_overlaps() {
        let data = synth_gaussian_mixture(2, 4000, 2, 1.0, 3, Scenario::Stochastic).unwrap();
        // With means one sigma apart, nearest-mean misclassifies
        // roughly 31% of draws; anything above 15% shows real overlap.
        let means = mixture_means(2, 2, 1.0);
        let mut errors = 0usize;
        for (i, &y) in data.labels.iter().enumerate() {
            let d = |c: usize| -> f64 {
                (0..2)
                    .map(|j| (data.features[[i, j]] - means[c][j]).powi(2))
                    .sum()
            };
            let pred = if d(0) <= d(1) { 1 } else { 2 };
            if pred != y {
                errors += 1;
            }
        }
        let rate = errors as f64 / data.n() as f64;
        assert!(rate > 0.15, "error rate {rate}");
    }

    #[test]
    fn rejects_degenerate_requests() {
        assert!(synth_gaussian_mixture(1, 10, 2, 8.0, 0, Scenario::Stochastic).is_err());
        assert!(synth_gaussian_mixture(3, 0, 2, 8.0, 0, Scenario::Stochastic).is_err());
        assert!(synth_gaussian_mixture(3, 10, 0, 8.0, 0, Scenario::Stochastic).is_err());
        assert!(synth_gaussian_mixture(3, 10, 2, -1.0, 0, Scenario::Stochastic).is_err());
        assert!(synth_gaussian_mixture(3, 10, 2, f64::NAN, 0, Scenario::Stochastic).is_err());
    }
}
