//! Multi-class losses evaluated on probability vectors.
//!
//! Seven losses share one interface: a loss takes a predicted
//! distribution `f` over `k` classes and a 1-based label `y`. Four of
//! them (MAE, MSE, RCE, PCE) are bounded per class and have bounded
//! class sums `sum_y l(f, y)`; MAE and RCE have *constant* class sums,
//! which is the symmetry property the robustness certificates build
//! on. CCE and focal loss are unbounded.
//!
//! Gradients are plain coordinate-wise derivatives of the written-out
//! formulas (not tangent-space reductions), so they agree with central
//! finite differences at interior points. Logarithms and reciprocals
//! clamp their argument at `eps` so every value and gradient is finite
//! on the whole simplex.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_simplex, SIMPLEX_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean absolute error `||e_y - f||_1`.
    Mae,
    /// Mean square error `||e_y - f||_2^2`.
    Mse,
    /// Reverse cross entropy with `log 0 := a`.
    Rce,
    /// Generalized cross entropy `(1 - f_y^q) / q`.
    Gce,
    /// Partially clipped cross entropy: linear below `1/tau`, `-log`
    /// above.
    Pce,
    /// Categorical cross entropy `-log f_y`.
    Cce,
    /// Focal loss `-(1 - f_y)^tau log f_y`.
    Focal,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Mae,
        LossKind::Mse,
        LossKind::Rce,
        LossKind::Gce,
        LossKind::Pce,
        LossKind::Cce,
        LossKind::Focal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
            LossKind::Rce => "rce",
            LossKind::Gce => "gce",
            LossKind::Pce => "pce",
            LossKind::Cce => "cce",
            LossKind::Focal => "focal",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(LossKind::Mae),
            "mse" => Ok(LossKind::Mse),
            "rce" => Ok(LossKind::Rce),
            "gce" => Ok(LossKind::Gce),
            "pce" => Ok(LossKind::Pce),
            "cce" => Ok(LossKind::Cce),
            "focal" | "fl" => Ok(LossKind::Focal),
            other => Err(Error::config(format!("unknown loss kind '{other}'"))),
        }
    }
}

/// A loss kind plus its scalar parameters. Parameters a kind does not
/// use are carried but ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// GCE power, in `(0, 1]`.
    pub q: f64,
    /// PCE clipping threshold (`> 1`) or focal exponent (`> 0`).
    pub tau: f64,
    /// RCE stand-in for `log 0`; must be negative.
    pub a_rce: f64,
    /// Floor applied inside logarithms and reciprocals.
    pub eps: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec {
            kind,
            q: 0.7,
            tau: match kind {
                LossKind::Focal => 2.0,
                _ => std::f64::consts::E,
            },
            a_rce: -4.0,
            eps: 1e-12,
        }
    }

    pub fn mae() -> Self {
        Self::new(LossKind::Mae)
    }

    pub fn mse() -> Self {
        Self::new(LossKind::Mse)
    }

    pub fn rce() -> Self {
        Self::new(LossKind::Rce)
    }

    pub fn gce() -> Self {
        Self::new(LossKind::Gce)
    }

    pub fn pce() -> Self {
        Self::new(LossKind::Pce)
    }

    pub fn cce() -> Self {
        Self::new(LossKind::Cce)
    }

    pub fn focal() -> Self {
        Self::new(LossKind::Focal)
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_a_rce(mut self, a: f64) -> Self {
        self.a_rce = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1e-6) {
            return Err(Error::config(format!(
                "eps must lie in (0, 1e-6], got {}",
                self.eps
            )));
        }
        match self.kind {
            LossKind::Gce => {
                if !(self.q > 0.0 && self.q <= 1.0) {
                    return Err(Error::config(format!(
                        "gce power q must lie in (0, 1], got {}",
                        self.q
                    )));
                }
            }
            LossKind::Pce => {
                if !(self.tau > 1.0 && self.tau.is_finite()) {
                    return Err(Error::config(format!(
                        "pce threshold tau must exceed 1, got {}",
                        self.tau
                    )));
                }
            }
            LossKind::Focal => {
                if !(self.tau > 0.0 && self.tau.is_finite()) {
                    return Err(Error::config(format!(
                        "focal exponent tau must be positive, got {}",
                        self.tau
                    )));
                }
            }
            LossKind::Rce => {
                if !(self.a_rce < 0.0 && self.a_rce.is_finite()) {
                    return Err(Error::config(format!(
                        "rce log-zero value a must be negative, got {}",
                        self.a_rce
                    )));
                }
            }
            LossKind::Mae | LossKind::Mse | LossKind::Cce => {}
        }
        Ok(())
    }

    fn check_args(&self, f: &[f64], y: usize) -> Result<()> {
        self.validate()?;
        check_simplex(f, SIMPLEX_TOL)?;
        if y < 1 || y > f.len() {
            return Err(Error::domain(format!("label {y} outside 1..={}", f.len())));
        }
        Ok(())
    }

    /// Loss at `f` for true label `y` (1-based).
    pub fn value(&self, f: &[f64], y: usize) -> Result<f64> {
        self.check_args(f, y)?;
        Ok(self.value_raw(f, y))
    }

    pub(crate) fn value_raw(&self, f: &[f64], y: usize) -> f64 {
        let fy = f[y - 1];
        match self.kind {
            LossKind::Mae => {
                let mut s = 0.0;
                for (j, &v) in f.iter().enumerate() {
                    let target = if j == y - 1 { 1.0 } else { 0.0 };
                    s += (target - v).abs();
                }
                s
            }
            LossKind::Mse => {
                let mut s = 0.0;
                for (j, &v) in f.iter().enumerate() {
                    let target = if j == y - 1 { 1.0 } else { 0.0 };
                    s += (target - v) * (target - v);
                }
                s
            }
            LossKind::Rce => {
                let off: f64 = f
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != y - 1)
                    .map(|(_, &v)| v)
                    .sum();
                -self.a_rce * off
            }
            LossKind::Gce => (1.0 - fy.max(0.0).powf(self.q)) / self.q,
            LossKind::Pce => {
                if fy <= 1.0 / self.tau {
                    -self.tau * fy + self.tau.ln() + 1.0
                } else {
                    -fy.ln()
                }
            }
            LossKind::Cce => -fy.max(self.eps).ln(),
            LossKind::Focal => -(1.0 - fy).max(0.0).powf(self.tau) * fy.max(self.eps).ln(),
        }
    }

    /// Coordinate-wise derivative of the loss at `f`. At the kinks of
    /// MAE the subgradient seen from the simplex interior is returned.
    pub fn gradient(&self, f: &[f64], y: usize) -> Result<Vec<f64>> {
        self.check_args(f, y)?;
        Ok(self.gradient_raw(f, y))
    }

    pub(crate) fn gradient_raw(&self, f: &[f64], y: usize) -> Vec<f64> {
        let k = f.len();
        let fy = f[y - 1];
        let mut g = vec![0.0; k];
        match self.kind {
            LossKind::Mae => {
                for (j, slot) in g.iter_mut().enumerate() {
                    *slot = if j == y - 1 { -1.0 } else { 1.0 };
                }
            }
            LossKind::Mse => {
                for (j, slot) in g.iter_mut().enumerate() {
                    let target = if j == y - 1 { 1.0 } else { 0.0 };
                    *slot = 2.0 * (f[j] - target);
                }
            }
            LossKind::Rce => {
                for (j, slot) in g.iter_mut().enumerate() {
                    *slot = if j == y - 1 { 0.0 } else { -self.a_rce };
                }
            }
            LossKind::Gce => {
                g[y - 1] = -fy.max(self.eps).powf(self.q - 1.0);
            }
            LossKind::Pce => {
                g[y - 1] = if fy <= 1.0 / self.tau {
                    -self.tau
                } else {
                    -1.0 / fy
                };
            }
            LossKind::Cce => {
                g[y - 1] = -1.0 / fy.max(self.eps);
            }
            LossKind::Focal => {
                let fyc = fy.max(self.eps);
                let r = (1.0 - fy).max(0.0);
                g[y - 1] = self.tau * r.powf(self.tau - 1.0) * fyc.ln() - r.powf(self.tau) / fyc;
            }
        }
        g
    }

    /// `sum_y value(f, y)` over all classes. The symmetric kinds have
    /// constant sums with closed forms, returned directly so callers
    /// see the constant with no accumulated rounding; risk code goes
    /// through [`Self::value`], which keeps the two routes
    /// independently checkable.
    pub fn class_sum(&self, f: &[f64]) -> Result<f64> {
        self.check_args(f, 1)?;
        let km1 = (f.len() - 1) as f64;
        match self.kind {
            LossKind::Mae => Ok(2.0 * km1),
            LossKind::Rce => Ok(-self.a_rce * km1),
            _ => Ok((1..=f.len()).map(|y| self.value_raw(f, y)).sum()),
        }
    }

    /// Per-class and class-sum bounds as a function of `k`.
    pub fn bounds(&self, k: usize) -> Result<LossBounds> {
        self.validate()?;
        if k < 2 {
            return Err(Error::domain(format!("need k >= 2, got {k}")));
        }
        let kf = k as f64;
        let b = match self.kind {
            LossKind::Mae => LossBounds::bounded(2.0, 2.0 * kf - 2.0, 2.0 * kf - 2.0, true),
            LossKind::Mse => LossBounds::bounded(2.0, kf - 1.0, 2.0 * kf - 2.0, false),
            LossKind::Rce => {
                let u = -self.a_rce;
                LossBounds::bounded(u, u * (kf - 1.0), u * (kf - 1.0), true)
            }
            LossKind::Gce => {
                let q = self.q;
                LossBounds::bounded(1.0 / q, (kf - kf.powf(1.0 - q)) / q, (kf - 1.0) / q, false)
            }
            LossKind::Pce => {
                let tau = self.tau;
                let u = tau.ln() + 1.0;
                let c1 = if kf <= tau {
                    kf * kf.ln()
                } else {
                    kf - tau + kf * tau.ln()
                };
                LossBounds::bounded(u, c1, (kf - 1.0) * u, false)
            }
            LossKind::Cce | LossKind::Focal => LossBounds::unbounded(),
        };
        Ok(b)
    }
}

/// Value range of a loss for a fixed class count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBounds {
    /// Supremum of the per-class loss (`inf` for unbounded kinds).
    pub per_class_sup: f64,
    /// Infimum of the class sum over the simplex.
    pub class_sum_min: f64,
    /// Supremum of the class sum (`inf` for unbounded kinds).
    pub class_sum_max: f64,
    /// Whether the class sum is the same for every `f`.
    pub symmetric: bool,
    /// Whether the per-class loss is bounded at all.
    pub bounded: bool,
}

impl LossBounds {
    fn bounded(u: f64, c1: f64, c2: f64, symmetric: bool) -> Self {
        LossBounds {
            per_class_sup: u,
            class_sum_min: c1,
            class_sum_max: c2,
            symmetric,
            bounded: true,
        }
    }

    fn unbounded() -> Self {
        LossBounds {
            per_class_sup: f64::INFINITY,
            class_sum_min: 0.0,
            class_sum_max: f64::INFINITY,
            symmetric: false,
            bounded: false,
        }
    }

    /// Width `C2 - C1` of the class-sum range (`inf` when unbounded).
    pub fn sum_gap(&self) -> f64 {
        self.class_sum_max - self.class_sum_min
    }
}
