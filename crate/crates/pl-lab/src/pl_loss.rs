//! Losses against candidate label sets.
//!
//! The average form charges the mean of the per-label losses over the
//! candidate set. The soft-target form instead treats the uniform
//! distribution on the candidate set as a training target: for MAE and
//! MSE that is the distance between `f` and the target vector, while
//! for the index-based kinds it is the expectation of the per-label
//! loss under the target, which coincides with the average form by
//! linearity. The two genuinely differ only for MAE and MSE.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelset::LabelSet;
use crate::loss::{LossKind, LossSpec};
use crate::numeric::{check_simplex, pairwise_sum, SIMPLEX_TOL};

/// One partially labeled example: features, the candidate set, and the
/// true label when it was retained for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct PlExample {
    pub features: Vec<f64>,
    pub candidates: LabelSet,
    pub true_label: Option<usize>,
}

/// Which of the two candidate-set loss forms to optimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlLossForm {
    Average,
    SoftTarget,
}

impl fmt::Display for PlLossForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlLossForm::Average => "average",
            PlLossForm::SoftTarget => "soft_target",
        })
    }
}

impl FromStr for PlLossForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "average" => Ok(PlLossForm::Average),
            "soft_target" => Ok(PlLossForm::SoftTarget),
            other => Err(Error::config(format!("unknown pl loss form '{other}'"))),
        }
    }
}

fn check_pair(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Result<()> {
    spec.validate()?;
    check_simplex(f, SIMPLEX_TOL)?;
    if s.k() != f.len() {
        return Err(Error::domain(format!(
            "candidate set over k={} but prediction has {} classes",
            s.k(),
            f.len()
        )));
    }
    Ok(())
}

/// Mean of the per-label losses over the candidate set.
pub fn average_pl_loss(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Result<f64> {
    check_pair(spec, f, s)?;
    Ok(average_pl_loss_raw(spec, f, s))
}

pub(crate) fn average_pl_loss_raw(spec: &LossSpec, f: &[f64], s: &LabelSet) -> f64 {
    let sum: f64 = s.iter().map(|y| spec.value_raw(f, y)).sum();
    sum / s.len() as f64
}

/// Gradient of [`average_pl_loss`] in `f`.
pub fn average_pl_gradient(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Result<Vec<f64>> {
    check_pair(spec, f, s)?;
    Ok(average_pl_gradient_raw(spec, f, s))
}

pub(crate) fn average_pl_gradient_raw(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Vec<f64> {
    let mut g = vec![0.0; f.len()];
    for y in s.iter() {
        for (slot, v) in g.iter_mut().zip(spec.gradient_raw(f, y)) {
            *slot += v;
        }
    }
    let inv = 1.0 / s.len() as f64;
    for v in &mut g {
        *v *= inv;
    }
    g
}

/// Loss against the uniform distribution on the candidate set.
pub fn soft_target_pl_loss(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Result<f64> {
    check_pair(spec, f, s)?;
    Ok(soft_target_pl_loss_raw(spec, f, s))
}

pub(crate) fn soft_target_pl_loss_raw(spec: &LossSpec, f: &[f64], s: &LabelSet) -> f64 {
    match spec.kind {
        LossKind::Mae => {
            let t = 1.0 / s.len() as f64;
            f.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let target = if s.contains(j + 1) { t } else { 0.0 };
                    (target - v).abs()
                })
                .sum()
        }
        LossKind::Mse => {
            let t = 1.0 / s.len() as f64;
            f.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let target = if s.contains(j + 1) { t } else { 0.0 };
                    (target - v) * (target - v)
                })
                .sum()
        }
        _ => average_pl_loss_raw(spec, f, s),
    }
}

/// Gradient of [`soft_target_pl_loss`] in `f`. At the MAE kinks where
/// a component equals its target exactly, 0 (a valid subgradient) is
/// returned.
pub fn soft_target_pl_gradient(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Result<Vec<f64>> {
    check_pair(spec, f, s)?;
    Ok(soft_target_pl_gradient_raw(spec, f, s))
}

pub(crate) fn soft_target_pl_gradient_raw(spec: &LossSpec, f: &[f64], s: &LabelSet) -> Vec<f64> {
    match spec.kind {
        LossKind::Mae => {
            let t = 1.0 / s.len() as f64;
            f.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let target = if s.contains(j + 1) { t } else { 0.0 };
                    if v > target {
                        1.0
                    } else if v < target {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        LossKind::Mse => {
            let t = 1.0 / s.len() as f64;
            f.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let target = if s.contains(j + 1) { t } else { 0.0 };
                    2.0 * (v - target)
                })
                .collect()
        }
        _ => average_pl_gradient_raw(spec, f, s),
    }
}

/// Dispatches on the loss form.
pub fn pl_loss(form: PlLossForm, spec: &LossSpec, f: &[f64], s: &LabelSet) -> Result<f64> {
    match form {
        PlLossForm::Average => average_pl_loss(spec, f, s),
        PlLossForm::SoftTarget => soft_target_pl_loss(spec, f, s),
    }
}

/// Dispatches on the loss form.
pub fn pl_gradient(
    form: PlLossForm,
    spec: &LossSpec,
    f: &[f64],
    s: &LabelSet,
) -> Result<Vec<f64>> {
    match form {
        PlLossForm::Average => average_pl_gradient(spec, f, s),
        PlLossForm::SoftTarget => soft_target_pl_gradient(spec, f, s),
    }
}

/// Mean candidate-set loss of `predict` over a dataset. The mean is
/// accumulated in a fixed pairwise tree, so the result is independent
/// of any chunking a caller might apply.
pub fn empirical_pl_risk<F>(
    spec: &LossSpec,
    form: PlLossForm,
    examples: &[PlExample],
    mut predict: F,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if examples.is_empty() {
        return Err(Error::domain("empirical risk over an empty dataset"));
    }
    let mut losses = Vec::with_capacity(examples.len());
    for ex in examples {
        let f = predict(&ex.features);
        losses.push(pl_loss(form, spec, &f, &ex.candidates)?);
    }
    Ok(pairwise_sum(&losses) / losses.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sample_simplex;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(k: usize, labels: &[usize]) -> LabelSet {
        LabelSet::from_labels(k, labels).unwrap()
    }

    #[test]
    fn average_mae_frozen_values() {
        let spec = LossSpec::mae();
        let f = [1.0, 0.0, 0.0];
        let s = set(3, &[1, 2]);
        // Mean of 0 (label 1) and 2 (label 2).
        assert!((average_pl_loss(&spec, &f, &s).unwrap() - 1.0).abs() < 1e-12);

        let f = [0.5, 0.5, 0.0];
        assert!((average_pl_loss(&spec, &f, &s).unwrap() - 1.0).abs() < 1e-12);
        // The soft-target form is happy with mass split over the set.
        assert!(soft_target_pl_loss(&spec, &f, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singleton_sets_reduce_to_the_supervised_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for kind in LossKind::ALL {
            let spec = LossSpec::new(kind);
            for _ in 0..50 {
                let k = rng.random_range(2..=5);
                let f = sample_simplex(k, &mut rng);
                let y = rng.random_range(1..=k);
                let s = set(k, &[y]);
                let avg = average_pl_loss(&spec, &f, &s).unwrap();
                let sup = spec.value(&f, y).unwrap();
                assert!((avg - sup).abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn expectation_form_collapses_for_index_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for kind in [
            LossKind::Rce,
            LossKind::Gce,
            LossKind::Pce,
            LossKind::Cce,
            LossKind::Focal,
        ] {
            let spec = LossSpec::new(kind);
            for _ in 0..50 {
                let k = rng.random_range(2..=6);
                let f = sample_simplex(k, &mut rng);
                let mask = rng.random_range(1..(1u64 << k) - 1);
                let s = LabelSet::new(k, mask).unwrap();
                let a = average_pl_loss(&spec, &f, &s).unwrap();
                let t = soft_target_pl_loss(&spec, &f, &s).unwrap();
                assert!((a - t).abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn soft_target_differs_from_average_for_vector_kinds() {
        let spec = LossSpec::mse();
        let f = [0.5, 0.5, 0.0];
        let s = set(3, &[1, 2]);
        let soft = soft_target_pl_loss(&spec, &f, &s).unwrap();
        let avg = average_pl_loss(&spec, &f, &s).unwrap();
        assert!(soft.abs() < 1e-12);
        assert!(avg > 0.4);
    }

    #[test]
    fn soft_target_singleton_matches_supervised() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for kind in [LossKind::Mae, LossKind::Mse] {
            let spec = LossSpec::new(kind);
            for _ in 0..50 {
                let k = rng.random_range(2..=5);
                let f = sample_simplex(k, &mut rng);
                let y = rng.random_range(1..=k);
                let s = set(k, &[y]);
                let soft = soft_target_pl_loss(&spec, &f, &s).unwrap();
                let sup = spec.value(&f, y).unwrap();
                assert!((soft - sup).abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn average_loss_stays_within_per_class_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for kind in LossKind::ALL {
            let spec = LossSpec::new(kind);
            for _ in 0..200 {
                let k = rng.random_range(2..=6);
                let b = spec.bounds(k).unwrap();
                let f = sample_simplex(k, &mut rng);
                let mask = rng.random_range(1..(1u64 << k) - 1);
                let s = LabelSet::new(k, mask).unwrap();
                let v = average_pl_loss(&spec, &f, &s).unwrap();
                assert!(v >= -1e-9);
                if b.bounded {
                    assert!(v <= b.per_class_sup + 1e-9);
                }
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        const H: f64 = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for kind in LossKind::ALL {
            let spec = LossSpec::new(kind);
            for form in [PlLossForm::Average, PlLossForm::SoftTarget] {
                let mut checked = 0;
                while checked < 40 {
                    let k = rng.random_range(2..=5);
                    let mut f = sample_simplex(k, &mut rng);
                    for v in &mut f {
                        *v = v.clamp(0.03, 0.97);
                    }
                    let total: f64 = f.iter().sum();
                    for v in &mut f {
                        *v /= total;
                    }
                    let mask = rng.random_range(1..(1u64 << k) - 1);
                    let s = LabelSet::new(k, mask).unwrap();
                    // Stay away from the kinks of the piecewise kinds.
                    if kind == LossKind::Pce
                        && s.iter().any(|y| (f[y - 1] - 1.0 / spec.tau).abs() < 1e-4)
                    {
                        continue;
                    }
                    if kind == LossKind::Mae
                        && form == PlLossForm::SoftTarget
                        && f.iter()
                            .enumerate()
                            .any(|(j, &v)| {
                                let t = if s.contains(j + 1) {
                                    1.0 / s.len() as f64
                                } else {
                                    0.0
                                };
                                (v - t).abs() < 1e-4
                            })
                    {
                        continue;
                    }
                    let g = pl_gradient(form, &spec, &f, &s).unwrap();
                    for j in 0..k {
                        let mut hi = f.clone();
                        let mut lo = f.clone();
                        hi[j] += H;
                        lo[j] -= H;
                        let (vh, vl) = match form {
                            PlLossForm::Average => (
                                average_pl_loss_raw(&spec, &hi, &s),
                                average_pl_loss_raw(&spec, &lo, &s),
                            ),
                            PlLossForm::SoftTarget => (
                                soft_target_pl_loss_raw(&spec, &hi, &s),
                                soft_target_pl_loss_raw(&spec, &lo, &s),
                            ),
                        };
                        let fd = (vh - vl) / (2.0 * H);
                        let scale = fd.abs().max(1.0);
                        assert!(
                            (g[j] - fd).abs() <= 1e-4 * scale,
                            "{kind} {form} coord {j}: {} vs {fd}",
                            g[j]
                        );
                    }
                    checked += 1;
                }
            }
        }
    }

    #[test]
    fn empirical_risk_matches_direct_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let k = 4;
        let spec = LossSpec::gce();
        let examples: Vec<PlExample> = (0..57)
            .map(|_| {
                let mask = rng.random_range(1..(1u64 << k) - 1);
                PlExample {
                    features: sample_simplex(k, &mut rng),
                    candidates: LabelSet::new(k, mask).unwrap(),
                    true_label: None,
                }
            })
            .collect();
        // The predictor just echoes the stored simplex point.
        let risk = empirical_pl_risk(&spec, PlLossForm::Average, &examples, |x| x.to_vec())
            .unwrap();
        let mut direct = 0.0;
        for ex in &examples {
            direct += average_pl_loss(&spec, &ex.features, &ex.candidates).unwrap();
        }
        direct /= examples.len() as f64;
        assert!((risk - direct).abs() < 1e-12);
    }

    #[test]
    fn empirical_risk_rejects_empty_input() {
        let spec = LossSpec::mae();
        assert!(empirical_pl_risk(&spec, PlLossForm::Average, &[], |x| x.to_vec()).is_err());
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let spec = LossSpec::mae();
        let s = set(4, &[1, 2]);
        assert!(average_pl_loss(&spec, &[0.5, 0.5], &s).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

        #[test]
        fn permuting_labels_permutes_nothing_observable(
            seed in any::<u64>(),
            k in 3usize..=6,
        ) {
            // Relabeling classes by a permutation and permuting f and s
            // the same way leaves both loss forms unchanged.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = sample_simplex(k, &mut rng);
            let mask = rng.random_range(1..(1u64 << k) - 1);
            let s = LabelSet::new(k, mask).unwrap();
            let mut perm: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let mut pf = vec![0.0; k];
            for (old, &new) in perm.iter().enumerate() {
                pf[new] = f[old];
            }
            let plabels: Vec<usize> = s.iter().map(|l| perm[l - 1] + 1).collect();
            let ps = LabelSet::from_labels(k, &plabels).unwrap();
            for kind in LossKind::ALL {
                let spec = LossSpec::new(kind);
                for form in [PlLossForm::Average, PlLossForm::SoftTarget] {
                    let a = pl_loss(form, &spec, &f, &s).unwrap();
                    let b = pl_loss(form, &spec, &pf, &ps).unwrap();
                    prop_assert!((a - b).abs() < 1e-12, "{} {}", kind, form);
                }
            }
        }
    }
}
