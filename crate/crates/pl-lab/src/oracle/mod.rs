//! Exact-risk oracles on small discrete problems.
//!
//! A [`DiscreteProblem`] pins the joint distribution of one finite
//! classification task: instance weights and per-instance class
//! posteriors. On such a problem every quantity the robustness
//! statements talk about is computable exactly: the Bayes classifier,
//! the optimal candidate-set classifier, both risks, the bound
//! constants, and the domination conditions. The submodules split the
//! work: [`simplex`] hosts the per-instance minimizer, [`constants`]
//! the bound constants, [`theorems`] the certification of each
//! statement.

pub mod constants;
pub mod simplex;
pub mod theorems;

pub use constants::{bound_constants, inclusion_weights, BoundConstants, TheoremId};
pub use simplex::simplex_minimize;
pub use theorems::{
    check_theorem, domination_check, ConditionCheck, DominationChecks, InequalityCheck,
    TheoremReport, CERT_TOL,
};

use crate::error::{Error, Result};
use crate::generate::{pl_transition_matrix, GenerationConfig};
use crate::labelset::PlSpace;
use crate::loss::LossSpec;
use crate::numeric::{argmax_tie_lowest, check_simplex, pairwise_sum};
use crate::pl_loss::average_pl_loss_raw;

/// Probability tolerance for problem definitions. Tighter than the
/// working simplex tolerance because problems are data, not iterates.
pub const PROBLEM_TOL: f64 = 1e-12;

/// Class-count cap for the optimal candidate-set classifier, whose
/// objective enumerates the whole set space.
pub const MAX_ORACLE_K: usize = 12;

/// One support point: its marginal weight and class posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub weight: f64,
    pub posterior: Vec<f64>,
}

/// A finite-support classification task with known distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteProblem {
    pub k: usize,
    pub instances: Vec<Instance>,
}

impl DiscreteProblem {
    pub fn new(k: usize, instances: Vec<Instance>) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {k}")));
        }
        if instances.is_empty() {
            return Err(Error::domain("a problem needs at least one instance"));
        }
        for (i, inst) in instances.iter().enumerate() {
            if !(inst.weight > 0.0 && inst.weight.is_finite()) {
                return Err(Error::domain(format!(
                    "instance {i} has weight {}, expected positive",
                    inst.weight
                )));
            }
            if inst.posterior.len() != k {
                return Err(Error::domain(format!(
                    "instance {i} posterior has {} entries, expected {k}",
                    inst.posterior.len()
                )));
            }
            check_simplex(&inst.posterior, PROBLEM_TOL)
                .map_err(|e| Error::domain(format!("instance {i}: {e}")))?;
        }
        let total: f64 = pairwise_sum(&instances.iter().map(|i| i.weight).collect::<Vec<_>>());
        if (total - 1.0).abs() > PROBLEM_TOL {
            return Err(Error::domain(format!(
                "instance weights sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteProblem { k, instances })
    }

    /// Equal-weight instances from bare posteriors.
    pub fn uniform(k: usize, posteriors: Vec<Vec<f64>>) -> Result<Self> {
        let m = posteriors.len();
        if m == 0 {
            return Err(Error::domain("a problem needs at least one instance"));
        }
        let w = 1.0 / m as f64;
        let mut instances: Vec<Instance> = posteriors
            .into_iter()
            .map(|posterior| Instance {
                weight: w,
                posterior,
            })
            .collect();
        // Absorb the 1/m rounding residue into the first weight so the
        // sum is exactly 1.
        let total: f64 = pairwise_sum(&vec![w; m]);
        instances[0].weight += 1.0 - total;
        Self::new(k, instances)
    }

    /// A separable problem: one-hot posteriors at the given labels,
    /// equal weights. Its Bayes risk is 0 for every loss kind.
    pub fn separable(k: usize, labels: &[usize]) -> Result<Self> {
        let posteriors = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if y < 1 || y > k {
                    return Err(Error::domain(format!(
                        "label {y} at instance {i} outside 1..={k}"
                    )));
                }
                let mut p = vec![0.0; k];
                p[y - 1] = 1.0;
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(k, posteriors)
    }

    pub fn n(&self) -> usize {
        self.instances.len()
    }

    /// Whether every posterior is one-hot, which forces a Bayes risk
    /// of 0.
    pub fn is_separable(&self) -> bool {
        self.instances
            .iter()
            .all(|i| i.posterior.iter().any(|&p| (p - 1.0).abs() <= 1e-9))
    }
}

/// A classifier restricted to a problem's support: one probability
/// vector per instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierTable {
    pub rows: Vec<Vec<f64>>,
}

impl ClassifierTable {
    /// Predicted labels, ties to the lowest index.
    pub fn predictions(&self) -> Vec<usize> {
        self.rows.iter().map(|r| argmax_tie_lowest(r) + 1).collect()
    }
}

fn check_table(problem: &DiscreteProblem, table: &ClassifierTable) -> Result<()> {
    if table.rows.len() != problem.n() {
        return Err(Error::domain(format!(
            "table has {} rows for {} instances",
            table.rows.len(),
            problem.n()
        )));
    }
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != problem.k {
            return Err(Error::domain(format!(
                "table row {i} has {} entries, expected {}",
                row.len(),
                problem.k
            )));
        }
        check_simplex(row, crate::numeric::SIMPLEX_TOL)
            .map_err(|e| Error::domain(format!("table row {i}: {e}")))?;
    }
    Ok(())
}

/// Minimizes the label-weighted supervised loss `sum_t v_t l(f, t)`
/// over the simplex. `v` must be nonnegative but need not normalize.
fn minimize_weighted(spec: &LossSpec, v: &[f64]) -> Result<Vec<f64>> {
    let k = v.len();
    let objective = |f: &[f64]| -> f64 {
        let mut acc = 0.0;
        for t in 1..=k {
            if v[t - 1] != 0.0 {
                acc += v[t - 1] * spec.value_raw(f, t);
            }
        }
        acc
    };
    let gradient = |f: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; k];
        for t in 1..=k {
            if v[t - 1] != 0.0 {
                for (slot, d) in g.iter_mut().zip(spec.gradient_raw(f, t)) {
                    *slot += v[t - 1] * d;
                }
            }
        }
        g
    };
    simplex_minimize(objective, gradient, k)
}

/// The supervised-risk minimizer, instance by instance.
pub fn bayes_classifier(problem: &DiscreteProblem, spec: &LossSpec) -> Result<ClassifierTable> {
    spec.validate()?;
    let rows = problem
        .instances
        .iter()
        .map(|inst| minimize_weighted(spec, &inst.posterior))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierTable { rows })
}

/// Per-instance weights `v_t = sum_y p(y|x) w_y(t)` that turn the
/// candidate-set risk into a label-weighted supervised risk. The
/// rearrangement is exact for the average-form loss, and `v` is itself
/// a probability vector.
fn pl_label_weights(posterior: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
    let k = posterior.len();
    let mut v = vec![0.0; k];
    for (y0, &p) in posterior.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for t in 0..k {
            v[t] += p * w[y0][t];
        }
    }
    v
}

/// The candidate-set-risk minimizer under the average-form loss.
pub fn optimal_pl_classifier(
    problem: &DiscreteProblem,
    cfg: &GenerationConfig,
    spec: &LossSpec,
) -> Result<ClassifierTable> {
    spec.validate()?;
    cfg.validate()?;
    if cfg.k != problem.k {
        return Err(Error::domain(format!(
            "config has k={} but problem has k={}",
            cfg.k, problem.k
        )));
    }
    if problem.k > MAX_ORACLE_K {
        return Err(Error::domain(format!(
            "optimal candidate-set classifier needs k <= {MAX_ORACLE_K}, got {}",
            problem.k
        )));
    }
    let w = inclusion_weights(cfg)?;
    let rows = problem
        .instances
        .iter()
        .map(|inst| minimize_weighted(spec, &pl_label_weights(&inst.posterior, &w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierTable { rows })
}

/// Exact supervised risk of a classifier table, summed with a fixed
/// pairwise tree so the result is reproducible to the bit.
pub fn exact_supervised_risk(
    problem: &DiscreteProblem,
    spec: &LossSpec,
    table: &ClassifierTable,
) -> Result<f64> {
    spec.validate()?;
    check_table(problem, table)?;
    let per_instance: Vec<f64> = problem
        .instances
        .iter()
        .zip(&table.rows)
        .map(|(inst, f)| {
            let terms: Vec<f64> = (1..=problem.k)
                .map(|y| inst.posterior[y - 1] * spec.value_raw(f, y))
                .collect();
            inst.weight * pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&per_instance))
}

/// Exact candidate-set risk (average-form loss) of a classifier
/// table, enumerating the whole set space.
pub fn exact_pl_risk(
    problem: &DiscreteProblem,
    cfg: &GenerationConfig,
    spec: &LossSpec,
    table: &ClassifierTable,
) -> Result<f64> {
    spec.validate()?;
    cfg.validate()?;
    if cfg.k != problem.k {
        return Err(Error::domain(format!(
            "config has k={} but problem has k={}",
            cfg.k, problem.k
        )));
    }
    check_table(problem, table)?;
    let q = pl_transition_matrix(cfg)?;
    let space = PlSpace::new(problem.k).expect("k validated by the transition matrix");
    let per_instance: Vec<f64> = problem
        .instances
        .iter()
        .zip(&table.rows)
        .map(|(inst, f)| {
            let terms: Vec<f64> = (0..space.len())
                .map(|idx| {
                    let mass: f64 = inst
                        .posterior
                        .iter()
                        .zip(&q)
                        .map(|(&p, row)| p * row[idx])
                        .sum();
                    if mass == 0.0 {
                        0.0
                    } else {
                        mass * average_pl_loss_raw(spec, f, &space.set_at(idx))
                    }
                })
                .collect();
            inst.weight * pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&per_instance))
}
