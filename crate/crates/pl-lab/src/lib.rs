//! Partial-label learning lab.
//!
//! A dataset here carries *candidate label sets* instead of single
//! labels: each example comes with a non-empty proper subset of the
//! classes that (usually) contains the truth. This crate provides the
//! pieces needed to study classification under that weak supervision
//! end to end:
//!
//! - [`labelset`]: candidate sets as bitmasks and the enumerable space
//!   of all `2^k - 2` of them.
//! - [`loss`]: seven multi-class losses with their per-class and
//!   class-sum bounds.
//! - [`pl_loss`]: the average and soft-target candidate-set losses and
//!   empirical risks.
//! - [`generate`]: five stochastic processes that corrupt a labeled
//!   dataset into candidate sets, with exact set distributions,
//!   samplers, and statistical audits.
//! - [`oracle`]: exact risks and optimal classifiers on small discrete
//!   problems, plus the constants and inequality checks that certify
//!   when minimizing the candidate-set risk recovers the supervised
//!   optimum.
//! - [`train`]: from-scratch linear and MLP models trained with
//!   mini-batch SGD on candidate-set losses, deterministically.
//! - [`data`]: IDX image files, synthetic Gaussian mixtures, and the
//!   candidate-set dataset file format.
//! - [`cli`]: the subcommand implementations behind the `pl-lab`
//!   binary.

pub mod cli;
pub mod data;
pub mod error;
pub mod generate;
pub mod labelset;
pub mod loss;
pub mod numeric;
pub mod oracle;
pub mod pl_loss;
pub mod train;

pub use error::{Error, Result};
pub use labelset::{LabelSet, PlSpace};
pub use loss::{LossBounds, LossKind, LossSpec};
pub use pl_loss::{PlExample, PlLossForm};
