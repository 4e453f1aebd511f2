//! Dataset plumbing: fully labeled datasets, IDX image files,
//! synthetic Gaussian mixtures, and the candidate-set dataset format.

pub mod idx;
pub mod pl_file;
pub mod synth;

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::Array2;

use crate::error::{Error, Result};

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, serialize_idx_images, serialize_idx_labels};
pub use pl_file::{read_pl_dataset, read_pl_dataset_bytes, write_pl_dataset, write_pl_dataset_bytes, PlDataset};
pub use synth::{synth_gaussian_mixture, Scenario};

/// A fully labeled dataset: one feature row per example and 1-based
/// labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub k: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {k}")));
        }
        if labels.is_empty() {
            return Err(Error::domain("dataset is empty"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::domain(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        for (i, &y) in labels.iter().enumerate() {
            if y < 1 || y > k {
                return Err(Error::domain(format!(
                    "label {y} at example {i} outside 1..={k}"
                )));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

/// Reads a whole file, decompressing transparently when the path ends
/// in `.gz`.
pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if !is_gz(path) {
        return Ok(raw);
    }
    let mut out = Vec::new();
    GzDecoder::new(raw.as_slice())
        .read_to_end(&mut out)
        .map_err(|e| Error::parse(path.display().to_string(), format!("gzip: {e}")))?;
    Ok(out)
}

/// Writes a whole file, compressing when the path ends in `.gz`.
pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if !is_gz(path) {
        std::fs::write(path, bytes)?;
        return Ok(());
    }
    let file = std::fs::File::create(path)?;
    let mut enc = GzEncoder::new(file, Compression::default());
    enc.write_all(bytes)?;
    enc.finish()?;
    Ok(())
}
