//! Candidate-set generation processes.
//!
//! Five stochastic processes turn a true label into a candidate set:
//!
//! - `Sampling`: a per-label distribution over the sets containing the
//!   true label (uniform over them when no table is given).
//! - `Flipping`: every other label enters the set independently with a
//!   per-pair rate; the full set is rejected and redrawn, which is
//!   where the normalizer `M` below comes from.
//! - `ArbitrarySampling`: a per-label distribution over *all* sets, so
//!   the true label may be missing. The uniform shortcut splits mass
//!   `1 - gamma_pl` over the sets containing the truth and `gamma_pl`
//!   over the rest.
//! - `AmbiguousNoise`: the label first flips through a class-noise
//!   transition matrix, then a clean base process builds the set from
//!   the (possibly wrong) label.
//! - `NoisyAmbiguity`: a clean base process builds the set, which is
//!   then replaced by its complement with a per-set rate.
//!
//! Exact set distributions are available by enumeration for
//! `k <= 20`; the samplers work for larger `k` whenever no explicit
//! per-set table forces enumeration.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::labelset::{LabelSet, PlSpace, MAX_ENUM_K, MAX_K};
use crate::numeric::{check_simplex, SIMPLEX_TOL};
use crate::pl_loss::PlExample;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Sampling,
    Flipping,
    ArbitrarySampling,
    AmbiguousNoise,
    NoisyAmbiguity,
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessKind::Sampling => "sampling",
            ProcessKind::Flipping => "flipping",
            ProcessKind::ArbitrarySampling => "arbitrary_sampling",
            ProcessKind::AmbiguousNoise => "ambiguous_noise",
            ProcessKind::NoisyAmbiguity => "noisy_ambiguity",
        })
    }
}

impl FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sampling" => Ok(ProcessKind::Sampling),
            "flipping" => Ok(ProcessKind::Flipping),
            "arbitrary_sampling" | "arbitrary" => Ok(ProcessKind::ArbitrarySampling),
            "ambiguous_noise" => Ok(ProcessKind::AmbiguousNoise),
            "noisy_ambiguity" => Ok(ProcessKind::NoisyAmbiguity),
            other => Err(Error::config(format!("unknown process '{other}'"))),
        }
    }
}

/// Clean sub-process used by the two composite processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseProcess {
    Sampling,
    Flipping,
}

/// Full description of a generation process. Explicit tables override
/// the scalar shortcuts; fields that a process does not use must stay
/// unset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub process: ProcessKind,
    pub k: usize,
    /// Per-label distributions over the whole set space, `k` rows of
    /// `2^k - 2` entries (`Sampling`, `ArbitrarySampling`, or a
    /// sampling base).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_sets: Option<Vec<Vec<f64>>>,
    /// Per-pair inclusion rates for flipping, `k x k` with unit
    /// diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_flip: Option<Vec<Vec<f64>>>,
    /// Row-stochastic class-noise transition matrix
    /// (`AmbiguousNoise`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_t: Option<Vec<Vec<f64>>>,
    /// Per-set complement-flip rates (`NoisyAmbiguity`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_sets: Option<Vec<f64>>,
    /// Clean sub-process for the composite processes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseProcess>,
    /// Scalar flipping rate shortcut, in `[0, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_eta: Option<f64>,
    /// Scalar symmetric class-noise rate shortcut, in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_gamma: Option<f64>,
    /// Scalar candidate-set noise rate: the share of mass on sets
    /// missing the truth (`ArbitrarySampling`) or the complement-flip
    /// rate (`NoisyAmbiguity`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_pl: Option<f64>,
}

impl GenerationConfig {
    fn empty(process: ProcessKind, k: usize) -> Self {
        GenerationConfig {
            process,
            k,
            eta_sets: None,
            eta_flip: None,
            noise_t: None,
            gamma_sets: None,
            base: None,
            uniform_eta: None,
            uniform_gamma: None,
            gamma_pl: None,
        }
    }

    /// Uniform distribution over the sets containing the true label.
    pub fn uniform_sampling(k: usize) -> Self {
        Self::empty(ProcessKind::Sampling, k)
    }

    /// Independent inclusion of every wrong label at rate `eta`.
    pub fn uniform_flipping(k: usize, eta: f64) -> Self {
        let mut c = Self::empty(ProcessKind::Flipping, k);
        c.uniform_eta = Some(eta);
        c
    }

    /// Uniform sampling that misses the true label with probability
    /// `gamma_pl`.
    pub fn uniform_arbitrary(k: usize, gamma_pl: f64) -> Self {
        let mut c = Self::empty(ProcessKind::ArbitrarySampling, k);
        c.gamma_pl = Some(gamma_pl);
        c
    }

    /// Symmetric class noise at rate `gamma`, then uniform sampling.
    pub fn sampling_noise(k: usize, gamma: f64) -> Self {
        let mut c = Self::empty(ProcessKind::AmbiguousNoise, k);
        c.base = Some(BaseProcess::Sampling);
        c.uniform_gamma = Some(gamma);
        c
    }

    /// Symmetric class noise at rate `gamma`, then uniform flipping at
    /// rate `eta`.
    pub fn flipping_noise(k: usize, eta: f64, gamma: f64) -> Self {
        let mut c = Self::empty(ProcessKind::AmbiguousNoise, k);
        c.base = Some(BaseProcess::Flipping);
        c.uniform_eta = Some(eta);
        c.uniform_gamma = Some(gamma);
        c
    }

    /// Uniform sampling, then complement flip at rate `gamma_s`.
    pub fn noisy_sampling(k: usize, gamma_s: f64) -> Self {
        let mut c = Self::empty(ProcessKind::NoisyAmbiguity, k);
        c.base = Some(BaseProcess::Sampling);
        c.gamma_pl = Some(gamma_s);
        c
    }

    /// Uniform flipping at rate `eta`, then complement flip at rate
    /// `gamma_s`.
    pub fn noisy_flipping(k: usize, eta: f64, gamma_s: f64) -> Self {
        let mut c = Self::empty(ProcessKind::NoisyAmbiguity, k);
        c.base = Some(BaseProcess::Flipping);
        c.uniform_eta = Some(eta);
        c.gamma_pl = Some(gamma_s);
        c
    }

    pub fn with_eta_sets(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.eta_sets = Some(rows);
        self
    }

    pub fn with_eta_flip(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.eta_flip = Some(rows);
        self
    }

    pub fn with_noise_t(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.noise_t = Some(rows);
        self
    }

    pub fn with_gamma_sets(mut self, gammas: Vec<f64>) -> Self {
        self.gamma_sets = Some(gammas);
        self
    }

    /// The four benchmark presets: 1 uniform sampling, 2 uniform
    /// flipping (eta 0.1), 3 flipping under symmetric class noise
    /// (eta 0.1, gamma 0.3), 4 noisy flipping (eta 0.1, gamma_s 0.3).
    pub fn case_preset(case: u8, k: usize) -> Result<Self> {
        match case {
            1 => Ok(Self::uniform_sampling(k)),
            2 => Ok(Self::uniform_flipping(k, 0.1)),
            3 => Ok(Self::flipping_noise(k, 0.1, 0.3)),
            4 => Ok(Self::noisy_flipping(k, 0.1, 0.3)),
            other => Err(Error::config(format!(
                "case preset must be 1..=4, got {other}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if !(2..=MAX_K).contains(&k) {
            return Err(Error::config(format!(
                "class count k={k} outside supported range 2..={MAX_K}"
            )));
        }
        self.check_field_usage()?;
        if let Some(rows) = &self.eta_sets {
            self.check_eta_sets(rows)?;
        }
        if let Some(rows) = &self.eta_flip {
            self.check_eta_flip(rows)?;
        }
        if let Some(rows) = &self.noise_t {
            self.check_noise_t(rows)?;
        }
        if let Some(gs) = &self.gamma_sets {
            if k > MAX_ENUM_K {
                return Err(Error::config(format!(
                    "gamma_sets requires k <= {MAX_ENUM_K}, got {k}"
                )));
            }
            let want = (1usize << k) - 2;
            if gs.len() != want {
                return Err(Error::config(format!(
                    "gamma_sets has {} entries, expected {want}",
                    gs.len()
                )));
            }
            for (i, &g) in gs.iter().enumerate() {
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::config(format!(
                        "gamma_sets entry {i} is {g}, outside [0, 1]"
                    )));
                }
            }
        }
        if let Some(e) = self.uniform_eta {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::config(format!(
                    "uniform_eta is {e}, outside [0, 1)"
                )));
            }
        }
        if let Some(g) = self.uniform_gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::config(format!(
                    "uniform_gamma is {g}, outside [0, 1]"
                )));
            }
        }
        if let Some(g) = self.gamma_pl {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::config(format!("gamma_pl is {g}, outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn check_field_usage(&self) -> Result<()> {
        let forbid = |cond: bool, field: &str| -> Result<()> {
            if cond {
                Err(Error::config(format!(
                    "field '{field}' does not apply to the {} process",
                    self.process
                )))
            } else {
                Ok(())
            }
        };
        match self.process {
            ProcessKind::Sampling => {
                forbid(self.eta_flip.is_some(), "eta_flip")?;
                forbid(self.noise_t.is_some(), "noise_t")?;
                forbid(self.gamma_sets.is_some(), "gamma_sets")?;
                forbid(self.base.is_some(), "base")?;
                forbid(self.uniform_eta.is_some(), "uniform_eta")?;
                forbid(self.uniform_gamma.is_some(), "uniform_gamma")?;
                forbid(self.gamma_pl.is_some(), "gamma_pl")?;
            }
            ProcessKind::Flipping => {
                forbid(self.eta_sets.is_some(), "eta_sets")?;
                forbid(self.noise_t.is_some(), "noise_t")?;
                forbid(self.gamma_sets.is_some(), "gamma_sets")?;
                forbid(self.base.is_some(), "base")?;
                forbid(self.uniform_gamma.is_some(), "uniform_gamma")?;
                forbid(self.gamma_pl.is_some(), "gamma_pl")?;
                if self.eta_flip.is_none() && self.uniform_eta.is_none() {
                    return Err(Error::config(
                        "flipping needs eta_flip or uniform_eta".to_string(),
                    ));
                }
            }
            ProcessKind::ArbitrarySampling => {
                forbid(self.eta_flip.is_some(), "eta_flip")?;
                forbid(self.noise_t.is_some(), "noise_t")?;
                forbid(self.gamma_sets.is_some(), "gamma_sets")?;
                forbid(self.base.is_some(), "base")?;
                forbid(self.uniform_eta.is_some(), "uniform_eta")?;
                forbid(self.uniform_gamma.is_some(), "uniform_gamma")?;
                if self.eta_sets.is_none() && self.gamma_pl.is_none() {
                    return Err(Error::config(
                        "arbitrary sampling needs eta_sets or gamma_pl".to_string(),
                    ));
                }
            }
            ProcessKind::AmbiguousNoise => {
                forbid(self.gamma_sets.is_some(), "gamma_sets")?;
                forbid(self.gamma_pl.is_some(), "gamma_pl")?;
                if self.noise_t.is_none() && self.uniform_gamma.is_none() {
                    return Err(Error::config(
                        "ambiguous noise needs noise_t or uniform_gamma".to_string(),
                    ));
                }
                self.check_base()?;
            }
            ProcessKind::NoisyAmbiguity => {
                forbid(self.noise_t.is_some(), "noise_t")?;
                forbid(self.uniform_gamma.is_some(), "uniform_gamma")?;
                if self.gamma_sets.is_none() && self.gamma_pl.is_none() {
                    return Err(Error::config(
                        "noisy ambiguity needs gamma_sets or gamma_pl".to_string(),
                    ));
                }
                self.check_base()?;
            }
        }
        Ok(())
    }

    fn check_base(&self) -> Result<()> {
        match self.base {
            None => Err(Error::config(format!(
                "the {} process needs a base sub-process",
                self.process
            ))),
            Some(BaseProcess::Sampling) => {
                if self.eta_flip.is_some() {
                    return Err(Error::config(
                        "field 'eta_flip' does not apply to a sampling base".to_string(),
                    ));
                }
                if self.uniform_eta.is_some() {
                    return Err(Error::config(
                        "field 'uniform_eta' does not apply to a sampling base".to_string(),
                    ));
                }
                Ok(())
            }
            Some(BaseProcess::Flipping) => {
                if self.eta_sets.is_some() {
                    return Err(Error::config(
                        "field 'eta_sets' does not apply to a flipping base".to_string(),
                    ));
                }
                if self.eta_flip.is_none() && self.uniform_eta.is_none() {
                    return Err(Error::config(
                        "a flipping base needs eta_flip or uniform_eta".to_string(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn check_eta_sets(&self, rows: &[Vec<f64>]) -> Result<()> {
        let k = self.k;
        if k > MAX_ENUM_K {
            return Err(Error::config(format!(
                "eta_sets requires k <= {MAX_ENUM_K}, got {k}"
            )));
        }
        if rows.len() != k {
            return Err(Error::config(format!(
                "eta_sets has {} rows, expected {k}",
                rows.len()
            )));
        }
        let want = (1usize << k) - 2;
        // Rows must stay on the sets containing the label except under
        // arbitrary sampling.
        let clean_support = self.process != ProcessKind::ArbitrarySampling;
        for (y0, row) in rows.iter().enumerate() {
            if row.len() != want {
                return Err(Error::config(format!(
                    "eta_sets row {y0} has {} entries, expected {want}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (idx, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "eta_sets row {y0} entry {idx} is {p}, outside [0, 1]"
                    )));
                }
                let mask = idx as u64 + 1;
                if clean_support && mask >> y0 & 1 == 0 && p > 0.0 {
                    return Err(Error::config(format!(
                        "eta_sets row {y0} puts mass {p} on a set missing label {}",
                        y0 + 1
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config(format!(
                    "eta_sets row {y0} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    fn check_eta_flip(&self, rows: &[Vec<f64>]) -> Result<()> {
        let k = self.k;
        if rows.len() != k {
            return Err(Error::config(format!(
                "eta_flip has {} rows, expected {k}",
                rows.len()
            )));
        }
        for (y0, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::config(format!(
                    "eta_flip row {y0} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (j, &e) in row.iter().enumerate() {
                if j == y0 {
                    if (e - 1.0).abs() > 1e-12 {
                        return Err(Error::config(format!(
                            "eta_flip row {y0} diagonal is {e}, expected 1"
                        )));
                    }
                } else if !(0.0..1.0).contains(&e) {
                    return Err(Error::config(format!(
                        "eta_flip row {y0} entry {j} is {e}, outside [0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_noise_t(&self, rows: &[Vec<f64>]) -> Result<()> {
        let k = self.k;
        if rows.len() != k {
            return Err(Error::config(format!(
                "noise_t has {} rows, expected {k}",
                rows.len()
            )));
        }
        for (y0, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::config(format!(
                    "noise_t row {y0} has {} entries, expected {k}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "noise_t row {y0} entry {j} is {p}, outside [0, 1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config(format!(
                    "noise_t row {y0} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// The flipping rate for a wrong-label pair `(y, i)`, 1-based.
    fn flip_rate(&self, y: usize, i: usize) -> f64 {
        if let Some(rows) = &self.eta_flip {
            rows[y - 1][i - 1]
        } else {
            self.uniform_eta.unwrap_or(0.0)
        }
    }

    /// The class-noise transition matrix, materializing the symmetric
    /// shortcut when no explicit matrix is given.
    pub fn noise_matrix(&self) -> Result<Vec<Vec<f64>>> {
        if self.process != ProcessKind::AmbiguousNoise {
            return Err(Error::domain(format!(
                "the {} process has no class-noise matrix",
                self.process
            )));
        }
        self.validate()?;
        if let Some(rows) = &self.noise_t {
            return Ok(rows.clone());
        }
        let k = self.k;
        let gamma = self.uniform_gamma.unwrap();
        let off = gamma / (k - 1) as f64;
        Ok((0..k)
            .map(|y0| {
                (0..k)
                    .map(|j| if j == y0 { 1.0 - gamma } else { off })
                    .collect()
            })
            .collect())
    }

    /// The complement-flip rate of the set at `index`.
    fn gamma_at(&self, index: usize) -> f64 {
        if let Some(gs) = &self.gamma_sets {
            gs[index]
        } else {
            self.gamma_pl.unwrap_or(0.0)
        }
    }
}

fn require_enum_k(k: usize) -> Result<PlSpace> {
    PlSpace::new(k).map_err(|_| {
        Error::domain(format!(
            "exact distributions need k in 2..={MAX_ENUM_K}, got {k}"
        ))
    })
}

/// Distribution of a clean base process over the set space.
fn clean_distribution(cfg: &GenerationConfig, base: BaseProcess, y: usize) -> Result<Vec<f64>> {
    let space = require_enum_k(cfg.k)?;
    let n = space.len();
    let mut out = vec![0.0; n];
    match base {
        BaseProcess::Sampling => {
            if let Some(rows) = &cfg.eta_sets {
                out.copy_from_slice(&rows[y - 1]);
            } else {
                let p = 1.0 / ((1u64 << (cfg.k - 1)) - 1) as f64;
                for idx in 0..n {
                    if (idx as u64 + 1) >> (y - 1) & 1 == 1 {
                        out[idx] = p;
                    }
                }
            }
        }
        BaseProcess::Flipping => {
            let k = cfg.k;
            let mut total = 0.0;
            for idx in 0..n {
                let mask = idx as u64 + 1;
                if mask >> (y - 1) & 1 == 0 {
                    continue;
                }
                let mut p = 1.0;
                for i in 1..=k {
                    if i == y {
                        continue;
                    }
                    let rate = cfg.flip_rate(y, i);
                    p *= if mask >> (i - 1) & 1 == 1 {
                        rate
                    } else {
                        1.0 - rate
                    };
                }
                out[idx] = p;
                total += p;
            }
            // total = 1 - prod(eta), the mass surviving full-set
            // rejection; rates < 1 keep it positive.
            for v in &mut out {
                *v /= total;
            }
        }
    }
    Ok(out)
}

/// Exact distribution over the set space given the true label
/// (1-based). Requires `k <= 20`.
pub fn set_distribution(cfg: &GenerationConfig, y: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if y < 1 || y > cfg.k {
        return Err(Error::domain(format!("label {y} outside 1..={}", cfg.k)));
    }
    let space = require_enum_k(cfg.k)?;
    match cfg.process {
        ProcessKind::Sampling => clean_distribution(cfg, BaseProcess::Sampling, y),
        ProcessKind::Flipping => clean_distribution(cfg, BaseProcess::Flipping, y),
        ProcessKind::ArbitrarySampling => {
            if let Some(rows) = &cfg.eta_sets {
                Ok(rows[y - 1].clone())
            } else {
                let gamma = cfg.gamma_pl.unwrap();
                let half = ((1u64 << (cfg.k - 1)) - 1) as f64;
                let p_clean = (1.0 - gamma) / half;
                let p_noisy = gamma / half;
                Ok((0..space.len())
                    .map(|idx| {
                        if (idx as u64 + 1) >> (y - 1) & 1 == 1 {
                            p_clean
                        } else {
                            p_noisy
                        }
                    })
                    .collect())
            }
        }
        ProcessKind::AmbiguousNoise => {
            let t = cfg.noise_matrix()?;
            let base = cfg.base.unwrap();
            let mut out = vec![0.0; space.len()];
            for (r0, &w) in t[y - 1].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let clean = clean_distribution(cfg, base, r0 + 1)?;
                for (slot, p) in out.iter_mut().zip(clean) {
                    *slot += w * p;
                }
            }
            Ok(out)
        }
        ProcessKind::NoisyAmbiguity => {
            let base = cfg.base.unwrap();
            let clean = clean_distribution(cfg, base, y)?;
            let mut out = vec![0.0; space.len()];
            for (idx, &p) in clean.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let gamma = cfg.gamma_at(idx);
                out[idx] += (1.0 - gamma) * p;
                let comp = space.index_of(&space.set_at(idx).complement());
                out[comp] += gamma * p;
            }
            Ok(out)
        }
    }
}

/// Stacks [`set_distribution`] rows into the `k x (2^k - 2)`
/// label-to-set transition matrix.
pub fn pl_transition_matrix(cfg: &GenerationConfig) -> Result<Vec<Vec<f64>>> {
    (1..=cfg.k).map(|y| set_distribution(cfg, y)).collect()
}

/// The `k x k` marginal form of the flipping process: entry `(y, i)`
/// is the inclusion rate of label `i` before full-set rejection, with
/// a unit diagonal.
pub fn flipping_marginal_matrix(cfg: &GenerationConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.process != ProcessKind::Flipping {
        return Err(Error::domain(format!(
            "marginal form applies to the flipping process, not {}",
            cfg.process
        )));
    }
    cfg.validate()?;
    Ok((1..=cfg.k)
        .map(|y| {
            (1..=cfg.k)
                .map(|i| if i == y { 1.0 } else { cfg.flip_rate(y, i) })
                .collect()
        })
        .collect())
}

fn categorical<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (idx, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = idx;
            acc += p;
            if u < acc {
                return idx;
            }
        }
    }
    last_positive
}

fn sample_clean<R: Rng + ?Sized>(
    cfg: &GenerationConfig,
    base: BaseProcess,
    y: usize,
    rng: &mut R,
) -> Result<LabelSet> {
    let k = cfg.k;
    let full = (1u64 << k) - 1;
    match base {
        BaseProcess::Sampling => {
            if let Some(rows) = &cfg.eta_sets {
                let idx = categorical(&rows[y - 1], rng);
                LabelSet::new(k, idx as u64 + 1)
            } else {
                // Uniform over sets containing y: independent halves
                // with full-set rejection.
                loop {
                    let mut mask = 1u64 << (y - 1);
                    for i in 0..k {
                        if i != y - 1 && rng.random::<f64>() < 0.5 {
                            mask |= 1 << i;
                        }
                    }
                    if mask != full {
                        return LabelSet::new(k, mask);
                    }
                }
            }
        }
        BaseProcess::Flipping => loop {
            let mut mask = 1u64 << (y - 1);
            for i in 1..=k {
                if i != y && rng.random::<f64>() < cfg.flip_rate(y, i) {
                    mask |= 1 << (i - 1);
                }
            }
            if mask != full {
                return LabelSet::new(k, mask);
            }
        },
    }
}

fn draw_raw<R: Rng + ?Sized>(cfg: &GenerationConfig, y: usize, rng: &mut R) -> Result<LabelSet> {
    let k = cfg.k;
    match cfg.process {
        ProcessKind::Sampling => sample_clean(cfg, BaseProcess::Sampling, y, rng),
        ProcessKind::Flipping => sample_clean(cfg, BaseProcess::Flipping, y, rng),
        ProcessKind::ArbitrarySampling => {
            if let Some(rows) = &cfg.eta_sets {
                let idx = categorical(&rows[y - 1], rng);
                LabelSet::new(k, idx as u64 + 1)
            } else if rng.random::<f64>() < cfg.gamma_pl.unwrap() {
                // Uniform over the non-empty sets missing y.
                loop {
                    let mut mask = 0u64;
                    for i in 0..k {
                        if i != y - 1 && rng.random::<f64>() < 0.5 {
                            mask |= 1 << i;
                        }
                    }
                    if mask != 0 {
                        return LabelSet::new(k, mask);
                    }
                }
            } else {
                sample_clean(cfg, BaseProcess::Sampling, y, rng)
            }
        }
        ProcessKind::AmbiguousNoise => {
            let t = cfg.noise_matrix()?;
            let r = categorical(&t[y - 1], rng) + 1;
            sample_clean(cfg, cfg.base.unwrap(), r, rng)
        }
        ProcessKind::NoisyAmbiguity => {
            let s = sample_clean(cfg, cfg.base.unwrap(), y, rng)?;
            let gamma = if cfg.gamma_sets.is_some() {
                let space = require_enum_k(k)?;
                cfg.gamma_at(space.index_of(&s))
            } else {
                cfg.gamma_pl.unwrap_or(0.0)
            };
            if rng.random::<f64>() < gamma {
                Ok(s.complement())
            } else {
                Ok(s)
            }
        }
    }
}

/// Draws one candidate set for the true label `y`.
pub fn draw_label_set<R: Rng + ?Sized>(
    cfg: &GenerationConfig,
    y: usize,
    rng: &mut R,
) -> Result<LabelSet> {
    cfg.validate()?;
    if y < 1 || y > cfg.k {
        return Err(Error::domain(format!("label {y} outside 1..={}", cfg.k)));
    }
    draw_raw(cfg, y, rng)
}

/// Draws a corrupted label from row `y` of a row-stochastic transition
/// matrix. Returns a 1-based label.
pub fn corrupt_label<R: Rng + ?Sized>(t: &[Vec<f64>], y: usize, rng: &mut R) -> Result<usize> {
    if y < 1 || y > t.len() {
        return Err(Error::domain(format!("label {y} outside 1..={}", t.len())));
    }
    let row = &t[y - 1];
    if row.len() != t.len() {
        return Err(Error::config(format!(
            "noise matrix row {} has {} entries, expected {}",
            y - 1,
            row.len(),
            t.len()
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
        return Err(Error::config(format!(
            "noise matrix row {} is not a distribution (sum {sum})",
            y - 1
        )));
    }
    Ok(categorical(row, rng) + 1)
}

/// Probability that the drawn set misses the true label, under a class
/// prior. Exactly 0 for the clean processes.
pub fn pl_noise_rate(cfg: &GenerationConfig, prior: &[f64]) -> Result<f64> {
    cfg.validate()?;
    check_simplex(prior, SIMPLEX_TOL)?;
    if prior.len() != cfg.k {
        return Err(Error::domain(format!(
            "prior has {} entries but k={}",
            prior.len(),
            cfg.k
        )));
    }
    let mut rate = 0.0;
    for (y0, &w) in prior.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let dist = set_distribution(cfg, y0 + 1)?;
        let miss: f64 = dist
            .iter()
            .enumerate()
            .filter(|(idx, _)| (*idx as u64 + 1) >> y0 & 1 == 0)
            .map(|(_, &p)| p)
            .sum();
        rate += w * miss;
    }
    Ok(rate)
}

/// Replaces every true label with a drawn candidate set. Example `i`
/// consumes its own random stream derived from `(seed, i)`, so the
/// result does not depend on evaluation order.
pub fn corrupt_dataset(
    cfg: &GenerationConfig,
    data: &LabeledDataset,
    seed: u64,
) -> Result<Vec<PlExample>> {
    cfg.validate()?;
    if data.k != cfg.k {
        return Err(Error::domain(format!(
            "dataset has k={} but config has k={}",
            data.k, cfg.k
        )));
    }
    let mut out = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let s = draw_raw(cfg, data.labels[i], &mut rng)?;
        out.push(PlExample {
            features: data.features.row(i).to_vec(),
            candidates: s,
            true_label: Some(data.labels[i]),
        });
    }
    Ok(out)
}

/// One frequency check: a realized rate against its expectation with a
/// four-sigma band.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrequencyAudit {
    pub realized: f64,
    pub expected: f64,
    pub sigma: f64,
    pub pass: bool,
}

impl FrequencyAudit {
    fn check(realized: f64, expected: f64, sigma: f64) -> Self {
        let pass = (realized - expected).abs() <= 4.0 * sigma.max(f64::EPSILON);
        FrequencyAudit {
            realized,
            expected,
            sigma,
            pass,
        }
    }
}

/// Goodness-of-fit of the observed set counts against the exact
/// mixture distribution.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChiSquareAudit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Significance 0.001.
    pub pass: bool,
}

/// Statistical audit of a generated dataset against its config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationAudit {
    pub n: usize,
    pub noise_rate: FrequencyAudit,
    pub mean_set_size: FrequencyAudit,
    /// Present for `k <= 12`.
    pub chi_square: Option<ChiSquareAudit>,
    pub pass: bool,
}

/// Audits a generated dataset. Needs the retained true labels and the
/// exact distributions, so `k <= 20` (`k <= 12` for the chi-square
/// part).
pub fn audit_pl_dataset(cfg: &GenerationConfig, examples: &[PlExample]) -> Result<GenerationAudit> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::domain("cannot audit an empty dataset"));
    }
    let k = cfg.k;
    let space = require_enum_k(k)?;
    let n = examples.len();
    let mut label_counts = vec![0usize; k];
    let mut missing = 0usize;
    let mut size_sum = 0.0;
    let mut set_counts = vec![0usize; space.len()];
    for (i, ex) in examples.iter().enumerate() {
        let y = ex.true_label.ok_or_else(|| {
            Error::domain(format!("example {i} has no retained true label to audit"))
        })?;
        if y < 1 || y > k {
            return Err(Error::domain(format!(
                "example {i} has label {y} outside 1..={k}"
            )));
        }
        if ex.candidates.k() != k {
            return Err(Error::domain(format!(
                "example {i} has a candidate set over k={}",
                ex.candidates.k()
            )));
        }
        label_counts[y - 1] += 1;
        if !ex.candidates.contains(y) {
            missing += 1;
        }
        size_sum += ex.candidates.len() as f64;
        set_counts[space.index_of(&ex.candidates)] += 1;
    }

    // Expected noise rate and set size under the empirical label mix.
    let mut expected_miss = 0.0;
    let mut var_miss = 0.0;
    let mut expected_size = 0.0;
    let mut var_size = 0.0;
    let mut expected_counts = vec![0.0; space.len()];
    for (y0, &cnt) in label_counts.iter().enumerate() {
        if cnt == 0 {
            continue;
        }
        let dist = set_distribution(cfg, y0 + 1)?;
        let mut miss = 0.0;
        let mut mean_sz = 0.0;
        let mut mean_sz2 = 0.0;
        for (idx, &p) in dist.iter().enumerate() {
            let sz = (idx as u64 + 1).count_ones() as f64;
            if (idx as u64 + 1) >> y0 & 1 == 0 {
                miss += p;
            }
            mean_sz += p * sz;
            mean_sz2 += p * sz * sz;
            expected_counts[idx] += cnt as f64 * p;
        }
        let w = cnt as f64;
        expected_miss += w * miss;
        var_miss += w * miss * (1.0 - miss);
        expected_size += w * mean_sz;
        var_size += w * (mean_sz2 - mean_sz * mean_sz).max(0.0);
    }
    let nf = n as f64;
    let noise_rate = FrequencyAudit::check(
        missing as f64 / nf,
        expected_miss / nf,
        var_miss.sqrt() / nf,
    );
    let mean_set_size = FrequencyAudit::check(
        size_sum / nf,
        expected_size / nf,
        var_size.sqrt() / nf,
    );

    let chi_square = if k <= 12 {
        Some(chi_square_audit(&expected_counts, &set_counts))
    } else {
        None
    };

    let pass =
        noise_rate.pass && mean_set_size.pass && chi_square.map(|c| c.pass).unwrap_or(true);
    Ok(GenerationAudit {
        n,
        noise_rate,
        mean_set_size,
        chi_square,
        pass,
    })
}

fn chi_square_audit(expected: &[f64], observed: &[usize]) -> ChiSquareAudit {
    // Any count in a zero-probability bin is an immediate failure.
    for (idx, (&e, &o)) in expected.iter().zip(observed).enumerate() {
        if e == 0.0 && o > 0 {
            let _ = idx;
            return ChiSquareAudit {
                statistic: f64::INFINITY,
                degrees_of_freedom: 0,
                p_value: 0.0,
                pass: false,
            };
        }
    }
    // Pool bins whose expectation is below 5.
    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut pooled_e = 0.0;
    let mut pooled_o = 0.0;
    for (&e, &o) in expected.iter().zip(observed) {
        if e == 0.0 {
            continue;
        }
        if e < 5.0 {
            pooled_e += e;
            pooled_o += o as f64;
        } else {
            let d = o as f64 - e;
            stat += d * d / e;
            bins += 1;
        }
    }
    if pooled_e > 0.0 {
        let d = pooled_o - pooled_e;
        stat += d * d / pooled_e;
        bins += 1;
    }
    if bins < 2 {
        // A single admissible bin carries no test.
        return ChiSquareAudit {
            statistic: stat,
            degrees_of_freedom: 0,
            p_value: 1.0,
            pass: true,
        };
    }
    let df = bins - 1;
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    let p_value = 1.0 - dist.cdf(stat);
    ChiSquareAudit {
        statistic: stat,
        degrees_of_freedom: df,
        p_value,
        pass: p_value >= 0.001,
    }
}
