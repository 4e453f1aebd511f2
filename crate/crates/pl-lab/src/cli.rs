//! Subcommand implementations behind the `pl-lab` binary.
//!
//! Five commands: `gen` corrupts a labeled dataset into candidate
//! sets, `train` fits a model under a candidate-set loss,
//! `verify-bounds` certifies the risk-bound statements on exactly
//! solvable problems, `verify-losses` audits the declared loss ranges,
//! and `report` merges run outputs for plotting. Every command echoes
//! its fully resolved configuration (defaults included) into
//! `metadata.json`, and nothing depends on wall-clock state, so a
//! rerun from that echo reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 configuration or input problems, 3 numeric
//! breakdown, 4 unmet statement preconditions under `--strict`, 5
//! a certified bound or declared range violated.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::data::{
    load_idx, read_pl_dataset, synth_gaussian_mixture, write_pl_dataset, LabeledDataset,
    PlDataset, Scenario,
};
use crate::error::{Error, Result};
use crate::generate::{audit_pl_dataset, corrupt_dataset, GenerationConfig, ProcessKind};
use crate::labelset::MAX_ENUM_K;
use crate::loss::{LossKind, LossSpec};
use crate::numeric::sample_simplex;
use crate::oracle::{check_theorem, DiscreteProblem, TheoremId, TheoremReport, MAX_ORACLE_K};
use crate::pl_loss::PlLossForm;
use crate::train::{
    save_params, train, Arch, ModelSpec, OptimizerConfig, StepDecay, TrainReport,
};

#[derive(Parser, Debug)]
#[command(
    name = "pl-lab",
    version,
    about = "Candidate-set (partial-label) learning lab: dataset corruption, robust-loss training, exact-risk certification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Corrupt a labeled dataset into candidate label sets
    Gen(GenArgs),
    /// Train a classifier on a candidate-set dataset
    Train(TrainArgs),
    /// Certify the risk-bound statements on exactly solvable problems
    VerifyBounds(VerifyBoundsArgs),
    /// Audit each loss against its declared value ranges
    VerifyLosses(VerifyLossesArgs),
    /// Merge training-run reports into one long-format table
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Labeled source: 'synth:k=5,n=1000,dim=2,sep=7,seed=0,scenario=deterministic'
    /// or 'idx:IMAGES,LABELS'
    #[arg(long)]
    pub dataset: String,
    /// Benchmark preset: 1 uniform sampling, 2 uniform flipping 0.1,
    /// 3 flipping with class noise 0.3, 4 flipping with set flips 0.3
    #[arg(long, conflicts_with_all = ["process", "config"])]
    pub case: Option<u8>,
    /// Corruption process (sampling, flipping, arbitrary_sampling,
    /// ambiguous_noise, noisy_ambiguity); needs its rate flags
    #[arg(long, conflicts_with = "config")]
    pub process: Option<String>,
    /// Per-pair inclusion probability for flipping processes
    #[arg(long)]
    pub eta: Option<f64>,
    /// Class-label noise rate applied before set generation
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Probability that the candidate set misses the true label
    #[arg(long)]
    pub gamma_pl: Option<f64>,
    /// Set-complement flip rate applied after set generation
    #[arg(long)]
    pub gamma_s: Option<f64>,
    /// Base set process for the composite corruptions: sampling or flipping
    #[arg(long)]
    pub base: Option<String>,
    /// Full generation config as a JSON file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master corruption seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (dataset.pl + metadata.json)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Candidate-set dataset file written by `gen`
    #[arg(long)]
    pub dataset: PathBuf,
    /// Labeled evaluation data: 'synth:...' or 'idx:IMAGES,LABELS'
    #[arg(long)]
    pub test: String,
    /// Loss: mae, mse, rce, gce, pce, cce, or focal
    #[arg(long)]
    pub loss: String,
    /// Candidate-set loss form: average or soft_target
    #[arg(long, default_value = "average")]
    pub form: String,
    /// Model: 'linear' or 'mlp:W1,W2,...'
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// Training epochs [default: 250, or 50 with --desk]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 256, or 64 with --desk]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Learning rate
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// SGD momentum
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Weight decay
    #[arg(long, default_value_t = 0.0)]
    pub wd: f64,
    /// Multiply the learning rate by --decay-factor every N epochs
    #[arg(long, requires = "decay_factor")]
    pub decay_every: Option<usize>,
    /// Learning-rate decay factor, used with --decay-every
    #[arg(long, requires = "decay_every")]
    pub decay_factor: Option<f64>,
    /// Seed for parameter init and batch shuffling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Desk-scale defaults (epochs 50, batch 64) instead of the
    /// benchmark protocol
    #[arg(long)]
    pub desk: bool,
    /// Output directory (report.csv, model.params, metadata.json)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyBoundsArgs {
    /// Statement id (thm1, thm2, thm3, thm5..thm8, cor1..cor3) or
    /// 'all'; repeatable
    #[arg(long, required = true)]
    pub theorem: Vec<String>,
    /// Loss kind or 'all'; repeatable
    #[arg(long, default_value = "all")]
    pub loss: Vec<String>,
    /// Class count of the sampled problems (at most 12)
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Random problems per statement
    #[arg(long, default_value_t = 5)]
    pub problems: usize,
    /// Instances per problem
    #[arg(long, default_value_t = 8)]
    pub instances: usize,
    /// Flip rate for flipping-based processes
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Class-label noise rate for the noise-first processes
    #[arg(long, default_value_t = 0.3)]
    pub gamma: f64,
    /// Candidate-set noise rate for the arbitrary sampling process
    #[arg(long, default_value_t = 0.3)]
    pub gamma_pl: f64,
    /// Set-complement flip rate for the flip-after processes
    #[arg(long, default_value_t = 0.3)]
    pub gamma_s: f64,
    /// Problem-sampling seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Treat unmet preconditions as an error (exit 4)
    #[arg(long)]
    pub strict: bool,
    /// Directory for reports.json + metadata.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyLossesArgs {
    /// Loss kind or 'all'; repeatable
    #[arg(long, default_value = "all")]
    pub loss: Vec<String>,
    /// Class count to audit at
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Random simplex points per loss (vertices and centroid are
    /// always included)
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    /// Sampling seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for audits.json + metadata.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directories containing a report.csv
    pub runs: Vec<PathBuf>,
    /// Write the merged table here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps errors onto the documented exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => 3,
        Error::Conditions(_) => 4,
        Error::Violation(_) => 5,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::VerifyBounds(args) => cmd_verify_bounds(args),
        Command::VerifyLosses(args) => cmd_verify_losses(args),
        Command::Report(args) => cmd_report(args),
    }
}

/// Parallel job cap: `PL_LAB_THREADS` when set, otherwise the
/// available parallelism.
pub fn max_jobs() -> Result<usize> {
    match std::env::var("PL_LAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::config(format!("PL_LAB_THREADS is '{v}', expected a positive integer"))
            }),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs independent jobs across up to [`max_jobs`] threads; results
/// come back in submission order, so output is deterministic.
pub fn run_jobs<T, F>(jobs: Vec<F>) -> Result<Vec<T>>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let cap = max_jobs()?.min(jobs.len().max(1));
    if cap <= 1 {
        return Ok(jobs.into_iter().map(|j| j()).collect());
    }
    let n = jobs.len();
    let slots: Vec<Mutex<Option<F>>> = jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..cap {
            let tx = tx.clone();
            let slots = &slots;
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let job = slots[i].lock().expect("job slot").take().expect("job runs once");
                let _ = tx.send((i, job()));
            });
        }
    });
    drop(tx);
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (i, v) in rx {
        out[i] = Some(v);
    }
    Ok(out.into_iter().map(|v| v.expect("every job reported")).collect())
}

/// Where labeled examples come from.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synth(SynthSpec),
    Idx { images: PathBuf, labels: PathBuf },
    PlFile { path: PathBuf },
}

/// Fully resolved synthetic-mixture request.
#[derive(Clone, Debug, Serialize)]
pub struct SynthSpec {
    pub k: usize,
    pub n_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
    pub scenario: Scenario,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(format!("bad {key} '{value}': {e}")))
}

impl DataSource {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(body) = s.strip_prefix("synth:") {
            let mut k = None;
            let mut n = 1000usize;
            let mut dim = 2usize;
            let mut sep = 7.0f64;
            let mut seed = 0u64;
            let mut scenario = Scenario::Deterministic;
            for part in body.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let (key, value) = part.split_once('=').ok_or_else(|| {
                    Error::config(format!("synth entry '{part}' is not key=value"))
                })?;
                match key.trim() {
                    "k" => k = Some(parse_num("k", value)?),
                    "n" => n = parse_num("n", value)?,
                    "dim" => dim = parse_num("dim", value)?,
                    "sep" => sep = parse_num("sep", value)?,
                    "seed" => seed = parse_num("seed", value)?,
                    "scenario" => scenario = value.trim().parse()?,
                    other => {
                        return Err(Error::config(format!(
                            "unknown synth key '{other}' (expected k, n, dim, sep, seed, scenario)"
                        )))
                    }
                }
            }
            let k = k.ok_or_else(|| Error::config("synth spec needs k=...".to_string()))?;
            Ok(DataSource::Synth(SynthSpec {
                k,
                n_per_class: n,
                dim,
                separation: sep,
                seed,
                scenario,
            }))
        } else if let Some(body) = s.strip_prefix("idx:") {
            let parts: Vec<&str> = body.split(',').collect();
            if parts.len() != 2 || parts.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::config(format!(
                    "idx source '{s}' must be 'idx:IMAGES,LABELS'"
                )));
            }
            Ok(DataSource::Idx {
                images: PathBuf::from(parts[0].trim()),
                labels: PathBuf::from(parts[1].trim()),
            })
        } else {
            Ok(DataSource::PlFile {
                path: PathBuf::from(s),
            })
        }
    }

    pub fn load_labeled(&self) -> Result<LabeledDataset> {
        match self {
            DataSource::Synth(sp) => synth_gaussian_mixture(
                sp.k,
                sp.n_per_class,
                sp.dim,
                sp.separation,
                sp.seed,
                sp.scenario,
            ),
            DataSource::Idx { images, labels } => load_idx(images, labels),
            DataSource::PlFile { path } => Err(Error::config(format!(
                "'{}' is a candidate-set file; this input needs labeled data ('synth:...' or 'idx:...')",
                path.display()
            ))),
        }
    }
}

fn write_metadata(out_dir: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(out_dir.join("metadata.json"), text)?;
    Ok(())
}

fn forbid_flag<T>(value: &Option<T>, flag: &str, context: &str) -> Result<()> {
    if value.is_some() {
        Err(Error::config(format!("--{flag} does not apply with {context}")))
    } else {
        Ok(())
    }
}

fn require_flag<T: Copy>(value: &Option<T>, flag: &str, context: &str) -> Result<T> {
    value
        .ok_or_else(|| Error::config(format!("{context} needs --{flag}")))
}

fn resolve_generation_config(args: &GenArgs, k: usize) -> Result<GenerationConfig> {
    let no_rates = |context: &str| -> Result<()> {
        forbid_flag(&args.eta, "eta", context)?;
        forbid_flag(&args.gamma, "gamma", context)?;
        forbid_flag(&args.gamma_pl, "gamma-pl", context)?;
        forbid_flag(&args.gamma_s, "gamma-s", context)?;
        forbid_flag(&args.base, "base", context)?;
        Ok(())
    };
    if let Some(path) = &args.config {
        no_rates("--config (the file carries all rates)")?;
        let bytes = crate::data::read_bytes(path)?;
        let cfg: GenerationConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        if cfg.k != k {
            return Err(Error::config(format!(
                "config file has k={} but the dataset has k={k}",
                cfg.k
            )));
        }
        return Ok(cfg);
    }
    if let Some(case) = args.case {
        no_rates("--case (presets fix all rates)")?;
        return GenerationConfig::case_preset(case, k);
    }
    let Some(name) = &args.process else {
        return Err(Error::config(
            "choose a corruption: --case N, --process NAME, or --config FILE".to_string(),
        ));
    };
    let process: ProcessKind = name.parse()?;
    let base_flipping = || -> Result<bool> {
        let base = args
            .base
            .as_deref()
            .ok_or_else(|| Error::config(format!("--process {process} needs --base sampling|flipping")))?;
        match base.to_ascii_lowercase().as_str() {
            "sampling" => Ok(false),
            "flipping" => Ok(true),
            other => Err(Error::config(format!(
                "unknown base process '{other}' (expected sampling or flipping)"
            ))),
        }
    };
    match process {
        ProcessKind::Sampling => {
            no_rates("--process sampling (it has no rates)")?;
            Ok(GenerationConfig::uniform_sampling(k))
        }
        ProcessKind::Flipping => {
            let eta = require_flag(&args.eta, "eta", "--process flipping")?;
            forbid_flag(&args.gamma, "gamma", "--process flipping")?;
            forbid_flag(&args.gamma_pl, "gamma-pl", "--process flipping")?;
            forbid_flag(&args.gamma_s, "gamma-s", "--process flipping")?;
            forbid_flag(&args.base, "base", "--process flipping")?;
            Ok(GenerationConfig::uniform_flipping(k, eta))
        }
        ProcessKind::ArbitrarySampling => {
            let gamma_pl = require_flag(&args.gamma_pl, "gamma-pl", "--process arbitrary_sampling")?;
            forbid_flag(&args.eta, "eta", "--process arbitrary_sampling")?;
            forbid_flag(&args.gamma, "gamma", "--process arbitrary_sampling")?;
            forbid_flag(&args.gamma_s, "gamma-s", "--process arbitrary_sampling")?;
            forbid_flag(&args.base, "base", "--process arbitrary_sampling")?;
            Ok(GenerationConfig::uniform_arbitrary(k, gamma_pl))
        }
        ProcessKind::AmbiguousNoise => {
            let gamma = require_flag(&args.gamma, "gamma", "--process ambiguous_noise")?;
            forbid_flag(&args.gamma_pl, "gamma-pl", "--process ambiguous_noise")?;
            forbid_flag(&args.gamma_s, "gamma-s", "--process ambiguous_noise")?;
            if base_flipping()? {
                let eta = require_flag(&args.eta, "eta", "--base flipping")?;
                Ok(GenerationConfig::flipping_noise(k, eta, gamma))
            } else {
                forbid_flag(&args.eta, "eta", "--base sampling")?;
                Ok(GenerationConfig::sampling_noise(k, gamma))
            }
        }
        ProcessKind::NoisyAmbiguity => {
            let gamma_s = require_flag(&args.gamma_s, "gamma-s", "--process noisy_ambiguity")?;
            forbid_flag(&args.gamma, "gamma", "--process noisy_ambiguity")?;
            forbid_flag(&args.gamma_pl, "gamma-pl", "--process noisy_ambiguity")?;
            if base_flipping()? {
                let eta = require_flag(&args.eta, "eta", "--base flipping")?;
                Ok(GenerationConfig::noisy_flipping(k, eta, gamma_s))
            } else {
                forbid_flag(&args.eta, "eta", "--base sampling")?;
                Ok(GenerationConfig::noisy_sampling(k, gamma_s))
            }
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let source = DataSource::parse(&args.dataset)?;
    let data = source.load_labeled()?;
    let cfg = resolve_generation_config(&args, data.k)?;
    cfg.validate()?;
    let examples = corrupt_dataset(&cfg, &data, args.seed)?;
    let audit = if data.k <= MAX_ENUM_K {
        Some(audit_pl_dataset(&cfg, &examples)?)
    } else {
        None
    };
    let ds = PlDataset::new(data.k, data.dim(), examples, Some(cfg.clone()), Some(args.seed))?;
    std::fs::create_dir_all(&args.out)?;
    let dataset_path = args.out.join("dataset.pl");
    write_pl_dataset(&dataset_path, &ds)?;
    let metadata = json!({
        "command": "gen",
        "version": env!("CARGO_PKG_VERSION"),
        "dataset": source,
        "generation": cfg,
        "seed": args.seed,
        "examples": ds.n(),
        "outputs": ["dataset.pl"],
        "audit": audit,
    });
    write_metadata(&args.out, &metadata)?;
    println!(
        "wrote {} candidate-set examples (k={}, dim={}) to {}",
        ds.n(),
        ds.k,
        ds.dim,
        dataset_path.display()
    );
    if let Some(a) = &audit {
        println!(
            "audit: missing-label rate {:.4} (expected {:.4}); mean set size {:.3} (expected {:.3})",
            a.noise_rate.realized,
            a.noise_rate.expected,
            a.mean_set_size.realized,
            a.mean_set_size.expected
        );
        if let Some(chi) = &a.chi_square {
            println!(
                "audit: set-distribution chi-square p = {:.4} ({} dof)",
                chi.p_value, chi.degrees_of_freedom
            );
        }
        if !a.pass {
            eprintln!("warning: realized statistics deviate from the configured process");
        }
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let ds = read_pl_dataset(&args.dataset)?;
    let test_source = DataSource::parse(&args.test)?;
    let test = test_source.load_labeled()?;
    if test.k != ds.k {
        return Err(Error::domain(format!(
            "test data has k={} but the training set has k={}",
            test.k, ds.k
        )));
    }
    if test.dim() != ds.dim {
        return Err(Error::domain(format!(
            "test data has {} features but the training set has {}",
            test.dim(),
            ds.dim
        )));
    }
    let loss = LossSpec::new(args.loss.parse::<LossKind>()?);
    let form: PlLossForm = args.form.parse()?;
    let arch: Arch = args.model.parse()?;
    let spec = ModelSpec {
        arch,
        input_dim: ds.dim,
        k: ds.k,
        init_seed: args.seed,
    };
    let epochs = args.epochs.unwrap_or(if args.desk { 50 } else { 250 });
    let batch = args.batch.unwrap_or(if args.desk { 64 } else { 256 });
    let decay = match (args.decay_every, args.decay_factor) {
        (Some(every_epochs), Some(factor)) => Some(StepDecay {
            every_epochs,
            factor,
        }),
        (None, None) => None,
        _ => unreachable!("clap enforces the pairing"),
    };
    let opt = OptimizerConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        weight_decay: args.wd,
        batch_size: batch,
        epochs,
        decay,
    };
    let (params, report) = train(&spec, &opt, &loss, form, &ds.examples, &test, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    report.write_csv(&args.out.join("report.csv"))?;
    save_params(&args.out.join("model.params"), &spec, &params)?;
    let metadata = json!({
        "command": "train",
        "version": env!("CARGO_PKG_VERSION"),
        "dataset": args.dataset,
        "test": test_source,
        "loss": loss,
        "form": form,
        "model": spec,
        "optimizer": opt,
        "seed": args.seed,
        "desk": args.desk,
        "params_digest": report.params_digest,
        "final": {
            "pl_risk": report.pl_risk.last(),
            "test_error": report.test_error.last(),
            "transductive_acc": report.transductive_acc.last(),
        },
        "outputs": ["report.csv", "model.params"],
    });
    write_metadata(&args.out, &metadata)?;
    println!(
        "trained {epochs} epochs; final test error {:.4}; outputs in {}",
        report.test_error.last().expect("epochs >= 1"),
        args.out.display()
    );
    Ok(())
}

fn parse_theorem_list(specs: &[String]) -> Result<Vec<TheoremId>> {
    let mut out: Vec<TheoremId> = Vec::new();
    for s in specs {
        if s.eq_ignore_ascii_case("all") {
            for id in TheoremId::ALL {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        } else {
            let id: TheoremId = s.parse()?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    Ok(out)
}

fn parse_loss_list(specs: &[String]) -> Result<Vec<LossKind>> {
    let mut out: Vec<LossKind> = Vec::new();
    for s in specs {
        if s.eq_ignore_ascii_case("all") {
            for kind in LossKind::ALL {
                if !out.contains(&kind) {
                    out.push(kind);
                }
            }
        } else {
            let kind: LossKind = s.parse()?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
    }
    Ok(out)
}

fn theorem_config(id: TheoremId, args: &VerifyBoundsArgs) -> GenerationConfig {
    match id {
        TheoremId::Thm1 | TheoremId::Cor1 => GenerationConfig::uniform_sampling(args.k),
        TheoremId::Thm2 | TheoremId::Cor2 => GenerationConfig::uniform_flipping(args.k, args.eta),
        TheoremId::Thm3 | TheoremId::Cor3 => {
            GenerationConfig::uniform_arbitrary(args.k, args.gamma_pl)
        }
        TheoremId::Thm5 => GenerationConfig::sampling_noise(args.k, args.gamma),
        TheoremId::Thm6 => GenerationConfig::flipping_noise(args.k, args.eta, args.gamma),
        TheoremId::Thm7 => GenerationConfig::noisy_sampling(args.k, args.gamma_s),
        TheoremId::Thm8 => GenerationConfig::noisy_flipping(args.k, args.eta, args.gamma_s),
    }
}

/// Deterministic problem for (seed, index): separable when the
/// statement requires zero Bayes risk, stochastic posteriors
/// otherwise. Independent of the loss so every loss sees the same
/// problems.
fn problem_for(id: TheoremId, k: usize, m: usize, seed: u64, index: usize) -> DiscreteProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    if id.needs_zero_bayes_risk() {
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(1..=k)).collect();
        DiscreteProblem::separable(k, &labels).expect("labels in range")
    } else {
        let posteriors = (0..m).map(|_| sample_simplex(k, &mut rng)).collect();
        DiscreteProblem::uniform(k, posteriors).expect("simplex rows")
    }
}

#[derive(Serialize)]
struct IndexedReport {
    problem: usize,
    #[serde(flatten)]
    report: TheoremReport,
}

fn cmd_verify_bounds(args: VerifyBoundsArgs) -> Result<()> {
    if !(2..=MAX_ORACLE_K).contains(&args.k) {
        return Err(Error::config(format!(
            "exact certification supports k in 2..={MAX_ORACLE_K}, got {}",
            args.k
        )));
    }
    if args.problems == 0 || args.instances == 0 {
        return Err(Error::config(
            "--problems and --instances must be at least 1".to_string(),
        ));
    }
    let theorems = parse_theorem_list(&args.theorem)?;
    let losses = parse_loss_list(&args.loss)?;

    let mut jobs: Vec<Box<dyn FnOnce() -> Result<IndexedReport> + Send>> = Vec::new();
    for &id in &theorems {
        for &kind in &losses {
            for p in 0..args.problems {
                let cfg = theorem_config(id, &args);
                let (k, m, seed) = (args.k, args.instances, args.seed);
                jobs.push(Box::new(move || {
                    let problem = problem_for(id, k, m, seed, p);
                    let report = check_theorem(&problem, &cfg, &LossSpec::new(kind), id)?;
                    Ok(IndexedReport { problem: p, report })
                }));
            }
        }
    }
    let results = run_jobs(jobs)?;
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        reports.push(r?);
    }

    let mut violated: Vec<String> = Vec::new();
    let mut unmet = 0usize;
    for ir in &reports {
        let r = &ir.report;
        let gap = r.pl_risk_bayes - r.pl_risk_pl;
        let status = if !r.conditions_met {
            unmet += 1;
            "COND"
        } else if r.pass {
            "PASS"
        } else {
            violated.push(format!("{} {} problem {}", r.theorem.name(), r.loss, ir.problem));
            "FAIL"
        };
        let bound_txt = match r.constants.bound_value {
            Some(b) => format!(", bound {b:.6}"),
            None => String::new(),
        };
        println!(
            "[{status}] {} {} problem {}: pl regret {gap:.6}{bound_txt}",
            r.theorem.name(),
            r.loss,
            ir.problem
        );
    }

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let mut text = serde_json::to_string_pretty(&reports)?;
        text.push('\n');
        std::fs::write(out.join("reports.json"), text)?;
        let metadata = json!({
            "command": "verify-bounds",
            "version": env!("CARGO_PKG_VERSION"),
            "theorems": theorems.iter().map(|t| t.name()).collect::<Vec<_>>(),
            "losses": losses.iter().map(|l| l.name()).collect::<Vec<_>>(),
            "k": args.k,
            "problems": args.problems,
            "instances": args.instances,
            "eta": args.eta,
            "gamma": args.gamma,
            "gamma_pl": args.gamma_pl,
            "gamma_s": args.gamma_s,
            "seed": args.seed,
            "strict": args.strict,
            "outputs": ["reports.json"],
        });
        write_metadata(out, &metadata)?;
    }

    println!(
        "{} report(s): {} passed, {} precondition-gated, {} violated",
        reports.len(),
        reports.len() - unmet - violated.len(),
        unmet,
        violated.len()
    );
    if !violated.is_empty() {
        return Err(Error::Violation(format!(
            "{} certification(s) failed: {}",
            violated.len(),
            violated.join("; ")
        )));
    }
    if args.strict && unmet > 0 {
        return Err(Error::Conditions(format!(
            "{unmet} report(s) had unmet preconditions"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct LossAudit {
    loss: String,
    k: usize,
    points: usize,
    class_sum_min: f64,
    class_sum_max: Option<f64>,
    per_class_sup: Option<f64>,
    symmetric: bool,
    bounded: bool,
    observed_sum_min: f64,
    observed_sum_max: f64,
    observed_per_class_max: f64,
    violations: Vec<String>,
    pass: bool,
}

const AUDIT_TOL: f64 = 1e-9;

fn audit_loss(kind: LossKind, k: usize, samples: usize, seed: u64) -> Result<LossAudit> {
    let spec = LossSpec::new(kind);
    let bounds = spec.bounds(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(samples + 2 * k + 1);
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        points.push(v);
        // Near-vertex interior points stress the suprema from inside.
        let eps = 1e-9;
        let mut w = vec![eps; k];
        w[i] = 1.0 - (k - 1) as f64 * eps;
        points.push(w);
    }
    points.push(vec![1.0 / k as f64; k]);
    for _ in 0..samples {
        points.push(sample_simplex(k, &mut rng));
    }

    let mut sum_min = f64::INFINITY;
    let mut sum_max = f64::NEG_INFINITY;
    let mut per_class_max = f64::NEG_INFINITY;
    for f in &points {
        let sum = spec.class_sum(f)?;
        sum_min = sum_min.min(sum);
        sum_max = sum_max.max(sum);
        for y in 1..=k {
            per_class_max = per_class_max.max(spec.value(f, y)?);
        }
    }

    let mut violations = Vec::new();
    if sum_min < bounds.class_sum_min - AUDIT_TOL {
        violations.push(format!(
            "class sum {sum_min} under the declared minimum {}",
            bounds.class_sum_min
        ));
    }
    if bounds.bounded {
        if sum_max > bounds.class_sum_max + AUDIT_TOL {
            violations.push(format!(
                "class sum {sum_max} over the declared maximum {}",
                bounds.class_sum_max
            ));
        }
        if per_class_max > bounds.per_class_sup + AUDIT_TOL {
            violations.push(format!(
                "per-class value {per_class_max} over the declared supremum {}",
                bounds.per_class_sup
            ));
        }
    }
    if bounds.symmetric && sum_max - sum_min > AUDIT_TOL {
        violations.push(format!(
            "class sum varies by {} although the loss is declared symmetric",
            sum_max - sum_min
        ));
    }
    let pass = violations.is_empty();
    Ok(LossAudit {
        loss: kind.name().to_string(),
        k,
        points: points.len(),
        class_sum_min: bounds.class_sum_min,
        class_sum_max: bounds.bounded.then_some(bounds.class_sum_max),
        per_class_sup: bounds.bounded.then_some(bounds.per_class_sup),
        symmetric: bounds.symmetric,
        bounded: bounds.bounded,
        observed_sum_min: sum_min,
        observed_sum_max: sum_max,
        observed_per_class_max: per_class_max,
        violations,
        pass,
    })
}

fn cmd_verify_losses(args: VerifyLossesArgs) -> Result<()> {
    if args.k < 2 {
        return Err(Error::config(format!("need at least 2 classes, got {}", args.k)));
    }
    let losses = parse_loss_list(&args.loss)?;
    let jobs: Vec<_> = losses
        .iter()
        .map(|&kind| {
            let (k, samples, seed) = (args.k, args.samples, args.seed);
            move || audit_loss(kind, k, samples, seed)
        })
        .collect();
    let mut audits = Vec::with_capacity(losses.len());
    for r in run_jobs(jobs)? {
        audits.push(r?);
    }

    let mut failed = Vec::new();
    for a in &audits {
        let declared = match a.class_sum_max {
            Some(max) => format!("[{}, {max}]", a.class_sum_min),
            None => format!("[{}, unbounded)", a.class_sum_min),
        };
        println!(
            "[{}] {} k={}: class sums in [{:.6}, {:.6}], declared {declared}",
            if a.pass { "PASS" } else { "FAIL" },
            a.loss,
            a.k,
            a.observed_sum_min,
            a.observed_sum_max
        );
        for v in &a.violations {
            println!("  {v}");
        }
        if !a.pass {
            failed.push(a.loss.clone());
        }
    }

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let mut text = serde_json::to_string_pretty(&audits)?;
        text.push('\n');
        std::fs::write(out.join("audits.json"), text)?;
        let metadata = json!({
            "command": "verify-losses",
            "version": env!("CARGO_PKG_VERSION"),
            "losses": losses.iter().map(|l| l.name()).collect::<Vec<_>>(),
            "k": args.k,
            "samples": args.samples,
            "seed": args.seed,
            "outputs": ["audits.json"],
        });
        write_metadata(out, &metadata)?;
    }
    if !failed.is_empty() {
        return Err(Error::Violation(format!(
            "declared ranges violated for: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

const REPORT_METRICS: [&str; 3] = ["pl_risk", "test_error", "transductive_acc"];

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut table = String::from("run,epoch,metric,value\n");
    let mut skipped = 0usize;
    for dir in &args.runs {
        let path = dir.join("report.csv");
        let report = match TrainReport::read_csv(&path) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", dir.display());
                skipped += 1;
                continue;
            }
        };
        let run = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        for e in 0..report.epochs() {
            for (metric, series) in REPORT_METRICS.iter().zip([
                &report.pl_risk,
                &report.test_error,
                &report.transductive_acc,
            ]) {
                table.push_str(&format!("{run},{},{metric},{}\n", e + 1, series[e]));
            }
        }
    }
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, &table)?;
            println!(
                "merged {} run(s) into {}{}",
                args.runs.len() - skipped,
                path.display(),
                if skipped > 0 {
                    format!(" ({skipped} skipped)")
                } else {
                    String::new()
                }
            );
        }
        None => print!("{table}"),
    }
    Ok(())
}
