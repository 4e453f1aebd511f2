//! Mini-batch SGD on candidate-set losses.
//!
//! The loop is single threaded and fully deterministic: parameters
//! come from the model spec's init seed, the per-epoch shuffles come
//! from the training seed, and batches reduce in a fixed order, so a
//! rerun with the same inputs is bit-identical. Metrics (candidate-set
//! risk on the training data, test zero-one error, and transductive
//! accuracy against retained true labels) are recomputed at each epoch
//! end with the parameters frozen.

pub mod model;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::numeric::{argmax_tie_lowest, pairwise_sum};
use crate::pl_loss::{pl_gradient, pl_loss, PlExample, PlLossForm};

pub use model::{
    backward, forward, load_params, params_digest, params_from_bytes, params_to_bytes,
    save_params, Arch, Layer, ModelSpec, Params,
};

use model::{backward_batch, forward_batch};

/// Multiply the learning rate by `factor` every `every_epochs` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub every_epochs: usize,
    pub factor: f64,
}

/// SGD hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decay: Option<StepDecay>,
}

impl OptimizerConfig {
    pub fn new(learning_rate: f64, epochs: usize) -> Self {
        OptimizerConfig {
            learning_rate,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 256,
            epochs,
            decay: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::config(format!(
                "weight decay {} must be nonnegative and finite",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1".to_string()));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1".to_string()));
        }
        if let Some(d) = self.decay {
            if d.every_epochs == 0 {
                return Err(Error::config("decay interval must be at least 1".to_string()));
            }
            if !(d.factor > 0.0 && d.factor <= 1.0) {
                return Err(Error::config(format!(
                    "decay factor {} outside (0, 1]",
                    d.factor
                )));
            }
        }
        Ok(())
    }

    /// Learning rate in force during 0-based epoch `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.decay {
            None => self.learning_rate,
            Some(d) => {
                self.learning_rate * d.factor.powi((epoch / d.every_epochs) as i32)
            }
        }
    }
}

/// Per-epoch metric traces plus the final parameter digest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    /// Candidate-set risk on the training data at each epoch end.
    pub pl_risk: Vec<f64>,
    /// Zero-one error on the held-out labeled data.
    pub test_error: Vec<f64>,
    /// Agreement with retained true labels on the training instances;
    /// NaN when no example kept its label.
    pub transductive_acc: Vec<f64>,
    /// SHA-256 of the final parameter blob (empty after a CSV read,
    /// which does not carry it).
    pub params_digest: String,
}

const CSV_HEADER: &str = "epoch,pl_risk,test_error,transductive_acc";

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.pl_risk.len()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for e in 0..self.epochs() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                self.pl_risk[e],
                self.test_error[e],
                self.transductive_acc[e]
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::data::write_bytes(path, self.to_csv_string().as_bytes())
    }

    pub fn from_csv_str(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == CSV_HEADER => {}
            other => {
                return Err(format!(
                    "line 1: expected header '{CSV_HEADER}', got {other:?}"
                ))
            }
        }
        let mut report = TrainReport {
            pl_risk: vec![],
            test_error: vec![],
            transductive_acc: vec![],
            params_digest: String::new(),
        };
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(format!(
                    "line {line_no}: expected 4 fields, got {}",
                    fields.len()
                ));
            }
            let epoch: usize = fields[0]
                .trim()
                .parse()
                .map_err(|e| format!("line {line_no}: bad epoch: {e}"))?;
            if epoch != report.pl_risk.len() + 1 {
                return Err(format!(
                    "line {line_no}: epoch {epoch} out of order (expected {})",
                    report.pl_risk.len() + 1
                ));
            }
            let mut vals = [0.0f64; 3];
            for (slot, field) in vals.iter_mut().zip(&fields[1..]) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|e| format!("line {line_no}: bad value '{field}': {e}"))?;
            }
            report.pl_risk.push(vals[0]);
            report.test_error.push(vals[1]);
            report.transductive_acc.push(vals[2]);
        }
        Ok(report)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let bytes = crate::data::read_bytes(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        Self::from_csv_str(text).map_err(|m| Error::parse(path.display().to_string(), m))
    }
}

/// Zero-one evaluation of a model on labeled data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub error: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
}

/// Argmax predictions (ties to the lowest class index) scored against
/// the labels. `accuracy + error == 1` exactly.
pub fn evaluate(spec: &ModelSpec, params: &Params, data: &LabeledDataset) -> Result<EvalResult> {
    if data.k != spec.k {
        return Err(Error::domain(format!(
            "dataset has k={}, model has k={}",
            data.k, spec.k
        )));
    }
    let cache = forward_batch(spec, params, data.features.view())?;
    let correct = cache
        .probs
        .axis_iter(Axis(0))
        .zip(&data.labels)
        .filter(|(row, &y)| argmax_tie_lowest(row.as_slice().expect("row contiguous")) + 1 == y)
        .count();
    let accuracy = correct as f64 / data.n() as f64;
    Ok(EvalResult {
        error: 1.0 - accuracy,
        accuracy,
        correct,
        n: data.n(),
    })
}

fn check_training_inputs(
    spec: &ModelSpec,
    data: &[PlExample],
    test: &LabeledDataset,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::domain("training data is empty".to_string()));
    }
    for (i, ex) in data.iter().enumerate() {
        if ex.features.len() != spec.input_dim {
            return Err(Error::domain(format!(
                "example {i} has {} features, model expects {}",
                ex.features.len(),
                spec.input_dim
            )));
        }
        if ex.candidates.k() != spec.k {
            return Err(Error::domain(format!(
                "example {i} has candidates over k={}, model has k={}",
                ex.candidates.k(),
                spec.k
            )));
        }
    }
    if test.dim() != spec.input_dim {
        return Err(Error::domain(format!(
            "test data has {} features, model expects {}",
            test.dim(),
            spec.input_dim
        )));
    }
    if test.k != spec.k {
        return Err(Error::domain(format!(
            "test data has k={}, model has k={}",
            test.k, spec.k
        )));
    }
    Ok(())
}

/// Trains a model on candidate-set data and returns the final
/// parameters together with the per-epoch report.
pub fn train(
    spec: &ModelSpec,
    opt: &OptimizerConfig,
    loss: &LossSpec,
    form: PlLossForm,
    data: &[PlExample],
    test: &LabeledDataset,
    seed: u64,
) -> Result<(Params, TrainReport)> {
    spec.validate()?;
    opt.validate()?;
    loss.validate()?;
    check_training_inputs(spec, data, test)?;

    let n = data.len();
    let flat: Vec<f64> = data.iter().flat_map(|ex| ex.features.iter().copied()).collect();
    let x = Array2::from_shape_vec((n, spec.input_dim), flat).expect("checked dims");

    let mut params = Params::init(spec)?;
    let mut velocity = Params::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut report = TrainReport {
        pl_risk: Vec::with_capacity(opt.epochs),
        test_error: Vec::with_capacity(opt.epochs),
        transductive_acc: Vec::with_capacity(opt.epochs),
        params_digest: String::new(),
    };

    for epoch in 0..opt.epochs {
        order.shuffle(&mut rng);
        let lr = opt.lr_at(epoch);
        for (batch_no, chunk) in order.chunks(opt.batch_size).enumerate() {
            let at = |what: &str| {
                Error::Numeric(format!(
                    "non-finite {what} at epoch {}, batch {} ({} loss)",
                    epoch + 1,
                    batch_no + 1,
                    loss.kind
                ))
            };
            let batch = x.select(Axis(0), chunk);
            let cache = forward_batch(spec, &params, batch.view())?;
            if !cache.probs.iter().all(|v| v.is_finite()) {
                return Err(at("prediction"));
            }
            let mut g = Array2::zeros((chunk.len(), spec.k));
            for (row, &idx) in chunk.iter().enumerate() {
                let p = cache.probs.row(row).to_vec();
                let gi = pl_gradient(form, loss, &p, &data[idx].candidates)?;
                if !gi.iter().all(|v| v.is_finite()) {
                    return Err(at("gradient"));
                }
                for (col, v) in gi.into_iter().enumerate() {
                    g[(row, col)] = v;
                }
            }
            let grad = backward_batch(&params, &cache, g.view())?;
            velocity.scale(opt.momentum);
            velocity.axpy(1.0, &grad);
            let mut delta = velocity.clone();
            delta.axpy(opt.weight_decay, &params);
            params.axpy(-lr, &delta);
        }

        let cache = forward_batch(spec, &params, x.view())?;
        // An update in the epoch's last batch can blow up parameters
        // with no later batch forward to notice; catch it here before
        // the loss layer rejects the predictions as a domain error.
        if !cache.probs.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite prediction at epoch {} metrics pass ({} loss)",
                epoch + 1,
                loss.kind
            )));
        }
        let mut losses = Vec::with_capacity(n);
        let mut labeled = 0usize;
        let mut agreed = 0usize;
        for (i, ex) in data.iter().enumerate() {
            let p = cache.probs.row(i).to_vec();
            let l = pl_loss(form, loss, &p, &ex.candidates)?;
            if !l.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite epoch risk at epoch {} ({} loss)",
                    epoch + 1,
                    loss.kind
                )));
            }
            losses.push(l);
            if let Some(y) = ex.true_label {
                labeled += 1;
                if argmax_tie_lowest(&p) + 1 == y {
                    agreed += 1;
                }
            }
        }
        report.pl_risk.push(pairwise_sum(&losses) / n as f64);
        report.test_error.push(evaluate(spec, &params, test)?.error);
        report.transductive_acc.push(if labeled == 0 {
            f64::NAN
        } else {
            agreed as f64 / labeled as f64
        });
    }

    report.params_digest = params_digest(spec, &params)?;
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_gaussian_mixture, Scenario};
    use crate::generate::{corrupt_dataset, GenerationConfig};
    use crate::labelset::LabelSet;
    use crate::loss::LossKind;

    fn singleton_examples(data: &LabeledDataset) -> Vec<PlExample> {
        data.labels
            .iter()
            .enumerate()
            .map(|(i, &y)| PlExample {
                features: data.features.row(i).to_vec(),
                candidates: LabelSet::new(data.k, 1u64 << (y - 1)).unwrap(),
                true_label: Some(y),
            })
            .collect()
    }

    fn small_pl_run(k: usize, seed: u64) -> (Vec<PlExample>, LabeledDataset) {
        let clean =
            synth_gaussian_mixture(k, 40, 2, 7.0, seed, Scenario::Deterministic).unwrap();
        let test =
            synth_gaussian_mixture(k, 30, 2, 7.0, seed + 1, Scenario::Deterministic).unwrap();
        let cfg = GenerationConfig::uniform_sampling(k);
        let examples = corrupt_dataset(&cfg, &clean, seed + 2).unwrap();
        (examples, test)
    }

    #[test]
    fn same_seed_reruns_are_bit_identical() {
        let (examples, test) = small_pl_run(3, 5);
        let spec = ModelSpec::mlp(2, vec![8], 3, 9);
        let opt = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 16,
            epochs: 4,
            decay: None,
        };
        let run = || {
            train(
                &spec,
                &opt,
                &LossSpec::mae(),
                PlLossForm::Average,
                &examples,
                &test,
                77,
            )
            .unwrap()
        };
        let (p1, r1) = run();
        let (p2, r2) = run();
        assert_eq!(p1, p2);
        assert_eq!(r1, r2);
        assert!(!r1.params_digest.is_empty());

        let (_, r3) = train(
            &spec,
            &opt,
            &LossSpec::mae(),
            PlLossForm::Average,
            &examples,
            &test,
            78,
        )
        .unwrap();
        assert_ne!(r1.pl_risk, r3.pl_risk);
    }

    #[test]
    fn supervised_logistic_regression_separates_two_classes() {
        let data = synth_gaussian_mixture(2, 60, 2, 8.0, 3, Scenario::Deterministic).unwrap();
        let test = synth_gaussian_mixture(2, 60, 2, 8.0, 4, Scenario::Deterministic).unwrap();
        let spec = ModelSpec::linear(2, 2, 1);
        let opt = OptimizerConfig {
            learning_rate: 0.5,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 50,
            decay: None,
        };
        let (_, report) = train(
            &spec,
            &opt,
            &LossSpec::cce(),
            PlLossForm::Average,
            &singleton_examples(&data),
            &test,
            11,
        )
        .unwrap();
        let final_acc = 1.0 - report.test_error.last().unwrap();
        assert!(final_acc >= 0.99, "accuracy {final_acc}");
    }

    #[test]
    fn convex_linear_mse_risk_never_increases_much() {
        let clean =
            synth_gaussian_mixture(3, 50, 2, 3.0, 21, Scenario::Stochastic).unwrap();
        let test = synth_gaussian_mixture(3, 30, 2, 3.0, 22, Scenario::Stochastic).unwrap();
        let cfg = GenerationConfig::uniform_sampling(3);
        let examples = corrupt_dataset(&cfg, &clean, 23).unwrap();
        let spec = ModelSpec::linear(2, 3, 2);
        let opt = OptimizerConfig {
            learning_rate: 0.2,
            momentum: 0.0,
            weight_decay: 0.0,
            batch_size: 25,
            epochs: 30,
            decay: None,
        };
        let (_, report) = train(
            &spec,
            &opt,
            &LossSpec::mse(),
            PlLossForm::Average,
            &examples,
            &test,
            24,
        )
        .unwrap();
        for w in report.pl_risk.windows(2) {
            assert!(w[1] <= w[0] + 0.02, "risk rose {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn runaway_learning_rate_aborts_with_location() {
        // A saturated softmax freezes (its Jacobian vanishes), so the
        // explosion must come through the decay term: lr*wd >> 1
        // multiplies the parameters past f64 range within a few
        // batches.
        let (examples, test) = small_pl_run(3, 31);
        let spec = ModelSpec::linear(2, 3, 1);
        let opt = OptimizerConfig {
            learning_rate: 1e305,
            momentum: 0.9,
            weight_decay: 0.1,
            batch_size: 16,
            epochs: 5,
            decay: None,
        };
        let err = train(
            &spec,
            &opt,
            &LossSpec::cce(),
            PlLossForm::Average,
            &examples,
            &test,
            1,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Numeric(_)), "{msg}");
        assert!(msg.contains("epoch"), "{msg}");
        assert!(msg.contains("cce"), "{msg}");
    }

    #[test]
    fn evaluate_is_exact_on_hand_built_data() {
        let spec = ModelSpec::linear(2, 2, 0);
        // Logits = [x0, -x0]: predicts class 1 iff x0 > 0.
        let mut params = Params::zeros(&spec).unwrap();
        params.layers[0].w[(0, 0)] = 1.0;
        params.layers[0].w[(0, 1)] = -1.0;
        let data = LabeledDataset::new(
            Array2::from_shape_vec((2, 2), vec![1.0, 0.0, -1.0, 0.0]).unwrap(),
            vec![1, 2],
            2,
        )
        .unwrap();
        let eval = evaluate(&spec, &params, &data).unwrap();
        assert_eq!(eval.error, 0.0);
        assert_eq!(eval.accuracy, 1.0);

        // The zero model predicts class 1 everywhere (uniform output,
        // ties to the lowest index).
        let uniform = Params::zeros(&spec).unwrap();
        let eval = evaluate(&spec, &uniform, &data).unwrap();
        assert_eq!(eval.correct, 1);
        assert_eq!(eval.accuracy + eval.error, 1.0);
    }

    #[test]
    fn uniform_predictor_scores_one_over_k_on_balanced_labels() {
        let data = synth_gaussian_mixture(4, 25, 3, 2.0, 8, Scenario::Stochastic).unwrap();
        let spec = ModelSpec::linear(3, 4, 0);
        let params = Params::zeros(&spec).unwrap();
        let eval = evaluate(&spec, &params, &data).unwrap();
        assert_eq!(eval.accuracy, 0.25);
    }

    #[test]
    fn transductive_accuracy_matches_training_set_evaluation() {
        let (examples, test) = small_pl_run(3, 41);
        let spec = ModelSpec::linear(2, 3, 3);
        let opt = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 1,
            decay: None,
        };
        let (params, report) = train(
            &spec,
            &opt,
            &LossSpec::mae(),
            PlLossForm::Average,
            &examples,
            &test,
            42,
        )
        .unwrap();
        let flat: Vec<f64> = examples.iter().flat_map(|e| e.features.clone()).collect();
        let truths = LabeledDataset::new(
            Array2::from_shape_vec((examples.len(), 2), flat).unwrap(),
            examples.iter().map(|e| e.true_label.unwrap()).collect(),
            3,
        )
        .unwrap();
        let eval = evaluate(&spec, &params, &truths).unwrap();
        assert_eq!(report.transductive_acc[0], eval.accuracy);
    }

    #[test]
    fn unlabeled_training_data_reports_nan_transductive_accuracy() {
        let (mut examples, test) = small_pl_run(3, 51);
        for ex in &mut examples {
            ex.true_label = None;
        }
        let spec = ModelSpec::linear(2, 3, 3);
        let opt = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 2,
            decay: None,
        };
        let (_, report) = train(
            &spec,
            &opt,
            &LossSpec::mse(),
            PlLossForm::Average,
            &examples,
            &test,
            1,
        )
        .unwrap();
        assert!(report.transductive_acc.iter().all(|v| v.is_nan()));
        assert!(report.pl_risk.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn csv_round_trips_and_rejects_malformed_input() {
        let report = TrainReport {
            pl_risk: vec![0.5, 0.25, 0.125],
            test_error: vec![0.3, 0.2, 0.1],
            transductive_acc: vec![0.7, f64::NAN, 0.9],
            params_digest: "abc".to_string(),
        };
        let text = report.to_csv_string();
        assert!(text.starts_with("epoch,pl_risk,test_error,transductive_acc\n1,"));
        let back = TrainReport::from_csv_str(&text).unwrap();
        assert_eq!(back.pl_risk, report.pl_risk);
        assert_eq!(back.test_error, report.test_error);
        assert!(back.transductive_acc[1].is_nan());
        assert_eq!(back.params_digest, "");

        assert!(TrainReport::from_csv_str("nope\n").unwrap_err().contains("line 1"));
        let bad_fields = format!("{CSV_HEADER}\n1,0.5,0.3\n");
        assert!(TrainReport::from_csv_str(&bad_fields)
            .unwrap_err()
            .contains("line 2"));
        let bad_order = format!("{CSV_HEADER}\n2,0.5,0.3,0.7\n");
        assert!(TrainReport::from_csv_str(&bad_order)
            .unwrap_err()
            .contains("out of order"));
    }

    #[test]
    fn csv_files_round_trip_through_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let report = TrainReport {
            pl_risk: vec![1.0, 0.5],
            test_error: vec![0.4, 0.3],
            transductive_acc: vec![0.6, 0.65],
            params_digest: String::new(),
        };
        for name in ["r.csv", "r.csv.gz"] {
            let path = dir.path().join(name);
            report.write_csv(&path).unwrap();
            let back = TrainReport::read_csv(&path).unwrap();
            assert_eq!(back, report);
        }
    }

    #[test]
    fn decay_schedule_is_a_step_function() {
        let opt = OptimizerConfig {
            learning_rate: 1.0,
            momentum: 0.0,
            weight_decay: 0.0,
            batch_size: 1,
            epochs: 6,
            decay: Some(StepDecay {
                every_epochs: 2,
                factor: 0.5,
            }),
        };
        let lrs: Vec<f64> = (0..6).map(|e| opt.lr_at(e)).collect();
        assert_eq!(lrs, vec![1.0, 1.0, 0.5, 0.5, 0.25, 0.25]);
        let flat = OptimizerConfig::new(0.1, 3);
        assert_eq!(flat.lr_at(2), 0.1);
    }

    #[test]
    fn bad_hyperparameters_are_config_errors() {
        let base = OptimizerConfig::new(0.1, 10);
        let cases = [
            OptimizerConfig { learning_rate: 0.0, ..base.clone() },
            OptimizerConfig { momentum: 1.0, ..base.clone() },
            OptimizerConfig { weight_decay: -0.1, ..base.clone() },
            OptimizerConfig { batch_size: 0, ..base.clone() },
            OptimizerConfig { epochs: 0, ..base.clone() },
            OptimizerConfig {
                decay: Some(StepDecay { every_epochs: 0, factor: 0.5 }),
                ..base.clone()
            },
            OptimizerConfig {
                decay: Some(StepDecay { every_epochs: 1, factor: 0.0 }),
                ..base.clone()
            },
        ];
        for bad in cases {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn mismatched_training_inputs_are_rejected() {
        let (examples, test) = small_pl_run(3, 61);
        let opt = OptimizerConfig::new(0.1, 1);
        let spec_wrong_dim = ModelSpec::linear(5, 3, 0);
        assert!(train(
            &spec_wrong_dim,
            &opt,
            &LossSpec::mae(),
            PlLossForm::Average,
            &examples,
            &test,
            1
        )
        .is_err());
        let spec_wrong_k = ModelSpec::linear(2, 4, 0);
        assert!(train(
            &spec_wrong_k,
            &opt,
            &LossSpec::mae(),
            PlLossForm::Average,
            &examples,
            &test,
            1
        )
        .is_err());
        let spec = ModelSpec::linear(2, 3, 0);
        assert!(train(
            &spec,
            &opt,
            &LossSpec::mae(),
            PlLossForm::Average,
            &[],
            &test,
            1
        )
        .is_err());
    }

    #[test]
    fn every_loss_kind_survives_a_short_run() {
        let (examples, test) = small_pl_run(3, 71);
        let spec = ModelSpec::linear(2, 3, 5);
        let opt = OptimizerConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 3,
            decay: None,
        };
        for kind in LossKind::ALL {
            let (_, report) = train(
                &spec,
                &opt,
                &LossSpec::new(kind),
                PlLossForm::Average,
                &examples,
                &test,
                7,
            )
            .unwrap();
            assert_eq!(report.epochs(), 3);
            assert!(report.pl_risk.iter().all(|v| v.is_finite()), "{kind}");
        }
    }
}
