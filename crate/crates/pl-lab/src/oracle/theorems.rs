//! Certification of the robustness statements.
//!
//! For a finite problem, a generation process, and a loss, this
//! module computes the Bayes classifier, the optimal candidate-set
//! classifier, all four exact risks, the bound constants, and then
//! checks every inequality the applicable statement makes, within a
//! small tolerance absorbing optimizer slack. Preconditions (true
//! label domination, rate thresholds, separability where the
//! statement demands it) are evaluated first; when they fail the
//! inequalities are still reported, but the report cannot pass.

use serde::Serialize;

use crate::error::Result;
use crate::generate::{GenerationConfig, ProcessKind};
use crate::loss::LossSpec;

use super::constants::{bound_constants, check_process, inclusion_weights, TheoremId};
use super::{
    bayes_classifier, exact_pl_risk, exact_supervised_risk, optimal_pl_classifier,
    BoundConstants, DiscreteProblem,
};

/// Slack for certified inequalities: the per-instance minimizer is
/// accurate to well under this.
pub const CERT_TOL: f64 = 1e-4;

/// One named precondition and whether it holds.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub holds: bool,
}

impl ConditionCheck {
    fn new(name: impl Into<String>, holds: bool) -> Self {
        ConditionCheck {
            name: name.into(),
            holds,
        }
    }
}

/// Every precondition that makes sense for a config, evaluated by
/// enumeration.
#[derive(Clone, Debug, Serialize)]
pub struct DominationChecks {
    pub checks: Vec<ConditionCheck>,
    pub all_hold: bool,
}

impl DominationChecks {
    pub fn holds(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.holds)
    }
}

/// The exact shared condition: in every row of inclusion weights the
/// true label strictly outweighs each incorrect label.
fn true_label_dominates(cfg: &GenerationConfig) -> Result<bool> {
    let w = inclusion_weights(cfg)?;
    for (y0, row) in w.iter().enumerate() {
        for (i0, &wi) in row.iter().enumerate() {
            if i0 != y0 && row[y0] <= wi {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Evaluates the domination condition plus the process-specific rate
/// reductions for this config.
pub fn domination_check(cfg: &GenerationConfig) -> Result<DominationChecks> {
    cfg.validate()?;
    let mut checks = vec![ConditionCheck::new(
        "true_label_dominates",
        true_label_dominates(cfg)?,
    )];
    match cfg.process {
        ProcessKind::Sampling => {
            // No incorrect label may appear almost surely.
            let q = crate::generate::pl_transition_matrix(cfg)?;
            let mut ok = true;
            for (y0, row) in q.iter().enumerate() {
                for i0 in 0..cfg.k {
                    if i0 == y0 {
                        continue;
                    }
                    let mass: f64 = row
                        .iter()
                        .enumerate()
                        .filter(|(idx, _)| (*idx as u64 + 1) >> i0 & 1 == 1)
                        .map(|(_, &p)| p)
                        .sum();
                    if mass >= 1.0 {
                        ok = false;
                    }
                }
            }
            checks.push(ConditionCheck::new("incorrect_label_mass_below_one", ok));
        }
        ProcessKind::Flipping => {}
        ProcessKind::ArbitrarySampling => {
            if let Some(g) = cfg.gamma_pl {
                checks.push(ConditionCheck::new("gamma_pl_below_half", g < 0.5));
            }
        }
        ProcessKind::AmbiguousNoise => {
            let t = cfg.noise_matrix()?;
            let mut ok = true;
            for (y0, row) in t.iter().enumerate() {
                for (i0, &p) in row.iter().enumerate() {
                    // gamma_y + gamma-bar_{y i} < 1 rearranges to
                    // T[y][i] < T[y][y].
                    if i0 != y0 && p >= row[y0] {
                        ok = false;
                    }
                }
            }
            checks.push(ConditionCheck::new("class_noise_pair_sums_below_one", ok));
            if let Some(g) = cfg.uniform_gamma {
                checks.push(ConditionCheck::new(
                    "symmetric_noise_below_k_minus_1_over_k",
                    g < (cfg.k - 1) as f64 / cfg.k as f64,
                ));
            }
        }
        ProcessKind::NoisyAmbiguity => {
            let max_gamma = if let Some(gs) = &cfg.gamma_sets {
                gs.iter().copied().fold(0.0, f64::max)
            } else {
                cfg.gamma_pl.unwrap_or(0.0)
            };
            checks.push(ConditionCheck::new(
                "set_flip_rate_at_most_one_over_k",
                max_gamma <= 1.0 / cfg.k as f64,
            ));
        }
    }
    let all_hold = checks.iter().all(|c| c.holds);
    Ok(DominationChecks { checks, all_hold })
}

/// The preconditions gating one particular statement.
fn gating_conditions(
    problem: &DiscreteProblem,
    cfg: &GenerationConfig,
    id: TheoremId,
) -> Result<Vec<ConditionCheck>> {
    let all = domination_check(cfg)?;
    let pick = |name: &str| -> ConditionCheck {
        ConditionCheck::new(name, all.holds(name).unwrap_or(false))
    };
    let mut conditions = match id {
        TheoremId::Thm1 => vec![pick("incorrect_label_mass_below_one")],
        TheoremId::Thm2 | TheoremId::Cor1 | TheoremId::Cor2 => vec![],
        TheoremId::Cor3 => vec![ConditionCheck::new(
            "gamma_pl_below_half",
            all.holds("gamma_pl_below_half").unwrap_or(false),
        )],
        TheoremId::Thm3
        | TheoremId::Thm5
        | TheoremId::Thm6
        | TheoremId::Thm7
        | TheoremId::Thm8 => vec![pick("true_label_dominates")],
    };
    if id.needs_zero_bayes_risk() {
        conditions.push(ConditionCheck::new(
            "deterministic_posteriors",
            problem.is_separable(),
        ));
    }
    Ok(conditions)
}

/// One certified inequality: `lhs <= rhs` within [`CERT_TOL`].
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs + CERT_TOL,
        }
    }
}

/// Full certification record for one (problem, config, loss,
/// statement) combination.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub loss: String,
    pub k: usize,
    pub instances: usize,
    pub conditions: Vec<ConditionCheck>,
    pub conditions_met: bool,
    pub constants: BoundConstants,
    /// `R(f*)`: the Bayes risk.
    pub supervised_risk_bayes: f64,
    /// `R(f*_PL)`: supervised risk of the candidate-set minimizer.
    pub supervised_risk_pl: f64,
    /// `R_PL(f*)`: candidate-set risk of the Bayes classifier.
    pub pl_risk_bayes: f64,
    /// `R_PL(f*_PL)`: the optimal candidate-set risk.
    pub pl_risk_pl: f64,
    pub inequalities: Vec<InequalityCheck>,
    /// Instance-wise prediction agreement of the two classifiers;
    /// populated for symmetric losses, where it is the statement's
    /// first claim.
    pub argmax_agreement: Option<bool>,
    pub pass: bool,
}

/// Certifies one statement on one problem. Preconditions that fail
/// flip `conditions_met` and force `pass = false`; all quantities are
/// still computed and reported.
pub fn check_theorem(
    problem: &DiscreteProblem,
    cfg: &GenerationConfig,
    spec: &LossSpec,
    id: TheoremId,
) -> Result<TheoremReport> {
    check_process(cfg, id)?;
    let constants = bound_constants(cfg, spec, id)?;
    let conditions = gating_conditions(problem, cfg, id)?;
    let conditions_met = conditions.iter().all(|c| c.holds);

    let bayes = bayes_classifier(problem, spec)?;
    let pl_opt = optimal_pl_classifier(problem, cfg, spec)?;
    let supervised_risk_bayes = exact_supervised_risk(problem, spec, &bayes)?;
    let supervised_risk_pl = exact_supervised_risk(problem, spec, &pl_opt)?;
    let pl_risk_bayes = exact_pl_risk(problem, cfg, spec, &bayes)?;
    let pl_risk_pl = exact_pl_risk(problem, cfg, spec, &pl_opt)?;

    let pl_regret = pl_risk_bayes - pl_risk_pl;
    let mut inequalities = vec![InequalityCheck::new("pl_regret_nonnegative", 0.0, pl_regret)];
    if let Some(bound) = constants.bound_value {
        inequalities.push(InequalityCheck::new("pl_regret_bounded", pl_regret, bound));
    }
    if let Some(bound) = constants.classifier_bound {
        let sup_regret = supervised_risk_pl - supervised_risk_bayes;
        inequalities.push(InequalityCheck::new(
            "classifier_regret_nonnegative",
            0.0,
            sup_regret,
        ));
        inequalities.push(InequalityCheck::new(
            "classifier_regret_bounded",
            sup_regret,
            bound,
        ));
    }

    let bounds = spec.bounds(problem.k)?;
    let argmax_agreement = if bounds.symmetric {
        Some(bayes.predictions() == pl_opt.predictions())
    } else {
        None
    };

    let pass = conditions_met
        && inequalities.iter().all(|c| c.holds)
        && argmax_agreement.unwrap_or(true);

    Ok(TheoremReport {
        theorem: id,
        loss: spec.kind.name().to_string(),
        k: problem.k,
        instances: problem.n(),
        conditions,
        conditions_met,
        constants,
        supervised_risk_bayes,
        supervised_risk_pl,
        pl_risk_bayes,
        pl_risk_pl,
        inequalities,
        argmax_agreement,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use crate::numeric::sample_simplex;
    use crate::oracle::ClassifierTable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stochastic_problem(seed: u64, k: usize, m: usize) -> DiscreteProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DiscreteProblem::uniform(k, (0..m).map(|_| sample_simplex(k, &mut rng)).collect())
            .unwrap()
    }

    fn separable_problem(seed: u64, k: usize, m: usize) -> DiscreteProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(1..=k)).collect();
        DiscreteProblem::separable(k, &labels).unwrap()
    }

    #[test]
    fn uniform_sampling_satisfies_every_check() {
        let checks = domination_check(&GenerationConfig::uniform_sampling(3)).unwrap();
        assert!(checks.all_hold, "{checks:?}");
        assert_eq!(checks.holds("true_label_dominates"), Some(true));
        assert_eq!(checks.holds("incorrect_label_mass_below_one"), Some(true));
    }

    #[test]
    fn arbitrary_sampling_condition_is_sharp_at_one_half() {
        let pass = domination_check(&GenerationConfig::uniform_arbitrary(3, 0.49)).unwrap();
        assert!(pass.all_hold);
        let fail = domination_check(&GenerationConfig::uniform_arbitrary(3, 0.51)).unwrap();
        assert!(!fail.all_hold);
        assert_eq!(fail.holds("gamma_pl_below_half"), Some(false));
        // The exact domination flips at the same threshold.
        assert_eq!(fail.holds("true_label_dominates"), Some(false));
        assert_eq!(pass.holds("true_label_dominates"), Some(true));
    }

    #[test]
    fn symmetric_class_noise_condition_is_sharp_at_two_thirds() {
        let pass = domination_check(&GenerationConfig::sampling_noise(3, 0.6)).unwrap();
        assert_eq!(
            pass.holds("symmetric_noise_below_k_minus_1_over_k"),
            Some(true)
        );
        assert_eq!(pass.holds("true_label_dominates"), Some(true));
        let fail = domination_check(&GenerationConfig::sampling_noise(3, 0.75)).unwrap();
        assert_eq!(
            fail.holds("symmetric_noise_below_k_minus_1_over_k"),
            Some(false)
        );
        assert_eq!(fail.holds("true_label_dominates"), Some(false));
    }

    #[test]
    fn set_flip_reduction_is_sufficient_but_not_sharp() {
        // Under the one-over-k threshold both the reduction and the
        // exact condition hold.
        let c = domination_check(&GenerationConfig::noisy_flipping(3, 0.1, 0.3)).unwrap();
        assert_eq!(c.holds("set_flip_rate_at_most_one_over_k"), Some(true));
        assert_eq!(c.holds("true_label_dominates"), Some(true));
        // Past it the reduction fails while the exact condition can
        // survive; at a high enough rate both fail.
        let mid = domination_check(&GenerationConfig::noisy_flipping(3, 0.1, 0.5)).unwrap();
        assert_eq!(mid.holds("set_flip_rate_at_most_one_over_k"), Some(false));
        assert_eq!(mid.holds("true_label_dominates"), Some(true));
        let far = domination_check(&GenerationConfig::noisy_flipping(3, 0.1, 0.7)).unwrap();
        assert_eq!(far.holds("true_label_dominates"), Some(false));
    }

    #[test]
    fn symmetric_loss_on_separable_problem_has_zero_gap_and_matching_argmax() {
        let problem = separable_problem(3, 3, 10);
        let cfg = GenerationConfig::uniform_sampling(3);
        let report =
            check_theorem(&problem, &cfg, &LossSpec::mae(), TheoremId::Thm1).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.conditions_met);
        let gap = report.pl_risk_bayes - report.pl_risk_pl;
        assert!(gap.abs() <= CERT_TOL, "gap {gap}");
        assert_eq!(report.argmax_agreement, Some(true));
        assert_eq!(report.constants.bound_value, Some(0.0));
        assert!(report.supervised_risk_bayes.abs() < 1e-9);
    }

    #[test]
    fn mse_uniform_sampling_bound_is_one_third() {
        let problem = stochastic_problem(11, 3, 8);
        let cfg = GenerationConfig::uniform_sampling(3);
        let report =
            check_theorem(&problem, &cfg, &LossSpec::mse(), TheoremId::Cor1).unwrap();
        assert!(report.pass, "{report:?}");
        assert!((report.constants.bound_value.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let gap = report.pl_risk_bayes - report.pl_risk_pl;
        assert!(gap >= -CERT_TOL && gap <= 1.0 / 3.0 + CERT_TOL, "gap {gap}");
    }

    #[test]
    fn violated_rate_condition_flags_the_report() {
        let problem = stochastic_problem(4, 3, 6);
        let cfg = GenerationConfig::uniform_arbitrary(3, 0.51);
        let report =
            check_theorem(&problem, &cfg, &LossSpec::mse(), TheoremId::Cor3).unwrap();
        assert!(!report.conditions_met);
        assert!(!report.pass);
        // The inequalities are still present, informationally.
        assert!(!report.inequalities.is_empty());

        let ok = check_theorem(
            &problem,
            &GenerationConfig::uniform_arbitrary(3, 0.49),
            &LossSpec::mse(),
            TheoremId::Cor3,
        )
        .unwrap();
        assert!(ok.conditions_met);
        assert!(ok.pass, "{ok:?}");
    }

    #[test]
    fn separability_is_required_by_the_general_statements() {
        let problem = stochastic_problem(9, 3, 4);
        let cfg = GenerationConfig::uniform_sampling(3);
        let report =
            check_theorem(&problem, &cfg, &LossSpec::mse(), TheoremId::Thm1).unwrap();
        assert!(!report.conditions_met);
        let flag = report
            .conditions
            .iter()
            .find(|c| c.name == "deterministic_posteriors")
            .unwrap();
        assert!(!flag.holds);
    }

    #[test]
    fn composite_statements_certify_on_separable_problems() {
        let problem = separable_problem(21, 3, 8);
        let cases = [
            (GenerationConfig::sampling_noise(3, 0.3), TheoremId::Thm5),
            (GenerationConfig::flipping_noise(3, 0.1, 0.3), TheoremId::Thm6),
            (GenerationConfig::noisy_sampling(3, 0.3), TheoremId::Thm7),
            (GenerationConfig::noisy_flipping(3, 0.1, 0.3), TheoremId::Thm8),
        ];
        for (cfg, id) in cases {
            for spec in [LossSpec::mae(), LossSpec::mse(), LossSpec::gce()] {
                let report = check_theorem(&problem, &cfg, &spec, id).unwrap();
                assert!(report.conditions_met, "{id} {}", spec.kind);
                assert!(report.pass, "{id} {}: {report:?}", spec.kind);
            }
        }
    }

    #[test]
    fn clean_uniform_risk_decomposes_into_sum_and_supervised_parts() {
        // Identity: R_PL(f) = A' * E[class sum] + (A - A') * R(f),
        // for every classifier, on clean uniform processes.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (cfg, id) in [
            (GenerationConfig::uniform_sampling(3), TheoremId::Cor1),
            (GenerationConfig::uniform_flipping(3, 0.2), TheoremId::Cor2),
            (GenerationConfig::uniform_arbitrary(3, 0.3), TheoremId::Cor3),
        ] {
            let problem = stochastic_problem(rng.random(), 3, 5);
            for kind in [LossKind::Mae, LossKind::Mse, LossKind::Gce, LossKind::Cce] {
                let spec = LossSpec::new(kind);
                let c = bound_constants(&cfg, &spec, id).unwrap();
                let a = c.a;
                let ap = c.a_prime.unwrap();
                for _ in 0..5 {
                    let table = ClassifierTable {
                        rows: (0..5).map(|_| sample_simplex(3, &mut rng)).collect(),
                    };
                    let pl = exact_pl_risk(&problem, &cfg, &spec, &table).unwrap();
                    let sup = exact_supervised_risk(&problem, &spec, &table).unwrap();
                    let mean_sum: f64 = problem
                        .instances
                        .iter()
                        .zip(&table.rows)
                        .map(|(inst, f)| inst.weight * spec.class_sum(f).unwrap())
                        .sum();
                    let decomposed = ap * mean_sum + (a - ap) * sup;
                    assert!(
                        (pl - decomposed).abs() < 1e-9,
                        "{id} {kind}: {pl} vs {decomposed}"
                    );
                }
            }
        }
    }

    #[test]
    fn bounded_kinds_certify_across_processes_on_small_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let cases = [
            (GenerationConfig::uniform_sampling(3), TheoremId::Thm1),
            (GenerationConfig::uniform_flipping(3, 0.15), TheoremId::Thm2),
            (GenerationConfig::uniform_arbitrary(3, 0.3), TheoremId::Thm3),
        ];
        for (cfg, id) in cases {
            for kind in [LossKind::Mse, LossKind::Gce, LossKind::Pce] {
                let spec = LossSpec::new(kind);
                for _ in 0..3 {
                    let problem = separable_problem(rng.random(), 3, 6);
                    let report = check_theorem(&problem, &cfg, &spec, id).unwrap();
                    assert!(report.pass, "{id} {kind}: {report:?}");
                }
            }
        }
    }

    #[test]
    fn reports_serialize_to_json() {
        let problem = separable_problem(2, 3, 4);
        let cfg = GenerationConfig::uniform_sampling(3);
        let report = check_theorem(&problem, &cfg, &LossSpec::cce(), TheoremId::Thm1).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"theorem\":\"thm1\""), "{json}");
        assert!(json.contains("pl_regret_nonnegative"), "{json}");
        // Unbounded loss: no bound inequality, no bound constant.
        assert!(!json.contains("pl_regret_bounded"), "{json}");
    }
}
