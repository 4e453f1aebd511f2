//! Robustness-bound constants.
//!
//! Everything here reduces to one quantity: the inclusion weight
//! `w_y(t) = sum over sets s containing t of p(s|y) / |s|`, computed
//! by direct summation over the enumerated set space. The weight of
//! the true label (`t = y`) scales the regret bound; the weights of
//! incorrect labels are what the true label must dominate. The
//! uniform-process corollaries additionally get the incorrect-label
//! weight `A'` and the classifier bound `A'(C2-C1)/(A-A')`.

use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::generate::{pl_transition_matrix, BaseProcess, GenerationConfig, ProcessKind};
use crate::labelset::PlSpace;
use crate::loss::LossSpec;

/// The certified statements: three main-text theorems, their three
/// uniform-process corollaries, and the four composite-process
/// theorems from the appendix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    Thm1,
    Thm2,
    Thm3,
    Cor1,
    Cor2,
    Cor3,
    Thm5,
    Thm6,
    Thm7,
    Thm8,
}

impl TheoremId {
    pub const ALL: [TheoremId; 10] = [
        TheoremId::Thm1,
        TheoremId::Thm2,
        TheoremId::Thm3,
        TheoremId::Cor1,
        TheoremId::Cor2,
        TheoremId::Cor3,
        TheoremId::Thm5,
        TheoremId::Thm6,
        TheoremId::Thm7,
        TheoremId::Thm8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TheoremId::Thm1 => "thm1",
            TheoremId::Thm2 => "thm2",
            TheoremId::Thm3 => "thm3",
            TheoremId::Cor1 => "cor1",
            TheoremId::Cor2 => "cor2",
            TheoremId::Cor3 => "cor3",
            TheoremId::Thm5 => "thm5",
            TheoremId::Thm6 => "thm6",
            TheoremId::Thm7 => "thm7",
            TheoremId::Thm8 => "thm8",
        }
    }

    /// Corollaries assume the uniform specialization of their process
    /// and gain the sharper `A'`-based bounds.
    pub fn is_corollary(&self) -> bool {
        matches!(self, TheoremId::Cor1 | TheoremId::Cor2 | TheoremId::Cor3)
    }

    /// Statements whose regret bound needs a separable problem
    /// (zero Bayes risk); the corollaries drop that requirement.
    pub fn needs_zero_bayes_risk(&self) -> bool {
        !self.is_corollary()
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thm1" => Ok(TheoremId::Thm1),
            "thm2" => Ok(TheoremId::Thm2),
            "thm3" => Ok(TheoremId::Thm3),
            "cor1" => Ok(TheoremId::Cor1),
            "cor2" => Ok(TheoremId::Cor2),
            "cor3" => Ok(TheoremId::Cor3),
            "thm5" => Ok(TheoremId::Thm5),
            "thm6" => Ok(TheoremId::Thm6),
            "thm7" => Ok(TheoremId::Thm7),
            "thm8" => Ok(TheoremId::Thm8),
            other => Err(Error::config(format!("unknown theorem id '{other}'"))),
        }
    }
}

/// `w[y-1][t-1]`: the probability-weighted reciprocal-size inclusion
/// weight of label `t` in a set drawn for true label `y`. Every row
/// sums to 1 because each set spreads its mass `p(s|y)` evenly over
/// its members.
pub fn inclusion_weights(cfg: &GenerationConfig) -> Result<Vec<Vec<f64>>> {
    let q = pl_transition_matrix(cfg)?;
    let space = PlSpace::new(cfg.k).expect("k validated by the transition matrix");
    let k = cfg.k;
    let mut w = vec![vec![0.0; k]; k];
    for (row, wrow) in q.iter().zip(&mut w) {
        for (idx, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let s = space.set_at(idx);
            let share = p / s.len() as f64;
            for t in s.iter() {
                wrow[t - 1] += share;
            }
        }
    }
    Ok(w)
}

/// Constants of one theorem for one config and loss.
#[derive(Clone, Debug, Serialize)]
pub struct BoundConstants {
    /// Largest true-label inclusion weight, `max_y w_y(y)`.
    pub a: f64,
    /// Shared incorrect-label inclusion weight (corollaries only).
    pub a_prime: Option<f64>,
    /// Per label `i`, the largest incorrect-label weight
    /// `max_{y != i} w_y(i)`.
    pub h: Vec<f64>,
    /// Per label `i`, its own true-label weight `w_i(i)`.
    pub d: Vec<f64>,
    /// Full-set rejection normalizer of the (base) flipping process;
    /// 1 when nothing flips.
    pub m: f64,
    /// Bound on the excess risk of the Bayes classifier under the
    /// candidate-set risk; `None` when the loss is unbounded.
    pub bound_value: Option<f64>,
    /// Bound on the excess supervised risk of the optimal
    /// candidate-set classifier (corollaries only, and only when the
    /// true label dominates).
    pub classifier_bound: Option<f64>,
}

fn flipping_normalizer(cfg: &GenerationConfig) -> f64 {
    let is_flipping = cfg.process == ProcessKind::Flipping
        || cfg.base == Some(BaseProcess::Flipping);
    if !is_flipping {
        return 1.0;
    }
    let k = cfg.k;
    let rate = |y: usize, i: usize| -> f64 {
        if let Some(rows) = &cfg.eta_flip {
            rows[y - 1][i - 1]
        } else {
            cfg.uniform_eta.unwrap_or(0.0)
        }
    };
    let mut m: f64 = 1.0;
    for y in 1..=k {
        let mut skip = 1.0;
        for i in 1..=k {
            if i != y {
                skip *= rate(y, i);
            }
        }
        m = m.max(1.0 / (1.0 - skip));
    }
    m
}

/// The process each statement is about.
pub(crate) fn check_process(cfg: &GenerationConfig, id: TheoremId) -> Result<()> {
    let ok = match id {
        TheoremId::Thm1 => cfg.process == ProcessKind::Sampling,
        TheoremId::Thm2 => cfg.process == ProcessKind::Flipping,
        TheoremId::Thm3 => cfg.process == ProcessKind::ArbitrarySampling,
        TheoremId::Cor1 => cfg.process == ProcessKind::Sampling && cfg.eta_sets.is_none(),
        TheoremId::Cor2 => cfg.process == ProcessKind::Flipping && cfg.eta_flip.is_none(),
        TheoremId::Cor3 => {
            cfg.process == ProcessKind::ArbitrarySampling && cfg.eta_sets.is_none()
        }
        TheoremId::Thm5 => {
            cfg.process == ProcessKind::AmbiguousNoise && cfg.base == Some(BaseProcess::Sampling)
        }
        TheoremId::Thm6 => {
            cfg.process == ProcessKind::AmbiguousNoise && cfg.base == Some(BaseProcess::Flipping)
        }
        TheoremId::Thm7 => {
            cfg.process == ProcessKind::NoisyAmbiguity && cfg.base == Some(BaseProcess::Sampling)
        }
        TheoremId::Thm8 => {
            cfg.process == ProcessKind::NoisyAmbiguity && cfg.base == Some(BaseProcess::Flipping)
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{id} does not cover the {} process{}",
            cfg.process,
            match cfg.base {
                Some(b) => format!(" with a {b:?} base").to_lowercase(),
                None => String::new(),
            }
        )))
    }
}

/// Evaluates the constants of `theorem` for this config and loss by
/// direct summation over the set space.
pub fn bound_constants(
    cfg: &GenerationConfig,
    spec: &LossSpec,
    theorem: TheoremId,
) -> Result<BoundConstants> {
    check_process(cfg, theorem)?;
    let w = inclusion_weights(cfg)?;
    let k = cfg.k;
    let bounds = spec.bounds(k)?;
    let gap = bounds.sum_gap();

    let d: Vec<f64> = (0..k).map(|i| w[i][i]).collect();
    let h: Vec<f64> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&y| y != i)
                .map(|y| w[y][i])
                .fold(0.0, f64::max)
        })
        .collect();
    let a = d.iter().fold(0.0, |acc: f64, &v| acc.max(v));
    let a_prime = if theorem.is_corollary() {
        Some(h.iter().fold(0.0, |acc: f64, &v| acc.max(v)))
    } else {
        None
    };

    let bound_value = if !bounds.bounded {
        None
    } else if let Some(ap) = a_prime {
        Some(ap * gap)
    } else {
        Some(a * gap)
    };
    let classifier_bound = match a_prime {
        Some(ap) if bounds.bounded && a > ap => Some(ap * gap / (a - ap)),
        _ => None,
    };

    Ok(BoundConstants {
        a,
        a_prime,
        h,
        d,
        m: flipping_normalizer(cfg),
        bound_value,
        classifier_bound,
    })
}
