//! Shared numeric helpers: simplex checks and projection, deterministic
//! summation, and the tie-breaking argmax used everywhere predictions
//! are turned into labels.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for accepting a vector as a probability distribution.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Sums in a fixed pairwise tree so results do not depend on chunking
/// or accumulation order chosen by callers.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Checks that `f` lies on the probability simplex within `tol`:
/// every component at least `-tol` and the total within `tol` of 1.
pub fn check_simplex(f: &[f64], tol: f64) -> Result<()> {
    if f.len() < 2 {
        return Err(Error::domain(format!(
            "probability vector needs at least 2 components, got {}",
            f.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &v) in f.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::domain(format!("component {i} is not finite")));
        }
        if v < -tol {
            return Err(Error::domain(format!("component {i} is negative ({v})")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::domain(format!(
            "probability vector sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Index of the maximum component; exact ties resolve to the lowest
/// index. Returns a 0-based index.
pub fn argmax_tie_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Uniform sample from the probability simplex (normalized unit-rate
/// exponentials).
pub fn sample_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..k)
            .map(|_| {
                let u: f64 = rng.random();
                -(1.0 - u).ln()
            })
            .collect();
        let total: f64 = v.iter().sum();
        if total > 0.0 && total.is_finite() {
            for x in &mut v {
                *x /= total;
            }
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairwise_sum_matches_sequential() {
        let xs: Vec<f64> = (1..=1000).map(|i| 1.0 / i as f64).collect();
        let seq: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - seq).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }

    #[test]
    fn simplex_check_accepts_and_rejects() {
        assert!(check_simplex(&[0.2, 0.3, 0.5], SIMPLEX_TOL).is_ok());
        assert!(check_simplex(&[0.5, 0.6], SIMPLEX_TOL).is_err());
        assert!(check_simplex(&[-0.1, 1.1], SIMPLEX_TOL).is_err());
        assert!(check_simplex(&[1.0], SIMPLEX_TOL).is_err());
        assert!(check_simplex(&[f64::NAN, 1.0], SIMPLEX_TOL).is_err());
    }

    #[test]
    fn projection_is_identity_on_simplex_points() {
        let f = [0.2, 0.3, 0.5];
        let p = project_to_simplex(&f);
        for (a, b) in f.iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_lands_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = project_to_simplex(&v);
            check_simplex(&p, 1e-9).unwrap();
        }
    }

    #[test]
    fn projection_minimizes_distance_against_grid() {
        // Coarse grid over the 3-simplex certifies the projection is the
        // nearest simplex point.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project_to_simplex(&v);
            let dp: f64 = v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
            let res = 60usize;
            for i in 0..=res {
                for j in 0..=(res - i) {
                    let g = [
                        i as f64 / res as f64,
                        j as f64 / res as f64,
                        (res - i - j) as f64 / res as f64,
                    ];
                    let dg: f64 = v.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum();
                    assert!(dp <= dg + 1e-9);
                }
            }
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_tie_lowest(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax_tie_lowest(&[0.5, 0.5, 0.0]), 0);
        assert_eq!(argmax_tie_lowest(&[0.1]), 0);
    }

    #[test]
    fn simplex_samples_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let f = sample_simplex(4, &mut rng);
            check_simplex(&f, 1e-9).unwrap();
        }
    }
}
