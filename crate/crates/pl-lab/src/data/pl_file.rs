//! Candidate-set dataset persistence: a one-line JSON header followed
//! by one JSON record per example.
//!
//! The header carries the class count, example count, feature width,
//! and (when known) the generation config and master seed that
//! produced the file. Records store features, the candidate bitmask,
//! and the optional retained true label:
//!
//! ```text
//! {"format":"pl-dataset","version":1,"k":3,"n":1,"d":2,"seed":7,...}
//! {"x":[0.25,1.0],"s":5,"y":3}
//! ```
//!
//! Floats travel as shortest exact decimals, so a round trip
//! reproduces every bit, and re-writing a parsed file reproduces the
//! byte stream. Paths ending in `.gz` compress transparently.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::GenerationConfig;
use crate::labelset::{LabelSet, MAX_K};
use crate::pl_loss::PlExample;

const FORMAT: &str = "pl-dataset";
const VERSION: u32 = 1;

/// An in-memory candidate-set dataset plus its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PlDataset {
    pub k: usize,
    pub dim: usize,
    pub examples: Vec<PlExample>,
    pub config: Option<GenerationConfig>,
    pub seed: Option<u64>,
}

impl PlDataset {
    pub fn new(
        k: usize,
        dim: usize,
        examples: Vec<PlExample>,
        config: Option<GenerationConfig>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if !(2..=MAX_K).contains(&k) {
            return Err(Error::domain(format!(
                "class count k={k} outside supported range 2..={MAX_K}"
            )));
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != dim {
                return Err(Error::domain(format!(
                    "example {i} has {} features, expected {dim}",
                    ex.features.len()
                )));
            }
            if ex.candidates.k() != k {
                return Err(Error::domain(format!(
                    "example {i} has a candidate set over k={}, expected {k}",
                    ex.candidates.k()
                )));
            }
            if let Some(y) = ex.true_label {
                if y < 1 || y > k {
                    return Err(Error::domain(format!(
                        "example {i} has label {y} outside 1..={k}"
                    )));
                }
            }
        }
        if let Some(cfg) = &config {
            cfg.validate()?;
            if cfg.k != k {
                return Err(Error::domain(format!(
                    "config has k={} but dataset has k={k}",
                    cfg.k
                )));
            }
        }
        Ok(PlDataset {
            k,
            dim,
            examples,
            config,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    k: usize,
    n: usize,
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<GenerationConfig>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    x: Vec<f64>,
    s: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<usize>,
}

/// Serializes a dataset to the line-delimited text form.
pub fn write_pl_dataset_bytes(ds: &PlDataset) -> Result<Vec<u8>> {
    // Re-validate: the struct fields are public.
    let checked = PlDataset::new(
        ds.k,
        ds.dim,
        ds.examples.clone(),
        ds.config.clone(),
        ds.seed,
    )?;
    for (i, ex) in checked.examples.iter().enumerate() {
        if let Some(j) = ex.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "example {i} feature {j} is not finite and cannot be serialized"
            )));
        }
    }
    let header = Header {
        format: FORMAT.to_string(),
        version: VERSION,
        k: checked.k,
        n: checked.n(),
        d: checked.dim,
        seed: checked.seed,
        config: checked.config.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    for ex in &checked.examples {
        let record = Record {
            x: ex.features.clone(),
            s: ex.candidates.mask(),
            y: ex.true_label,
        };
        out.extend_from_slice(&serde_json::to_vec(&record)?);
        out.push(b'\n');
    }
    Ok(out)
}

fn read_inner(bytes: &[u8]) -> std::result::Result<PlDataset, String> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| format!("not valid UTF-8 at byte {}", e.valid_up_to()))?;
    let mut lines = text.split('\n').enumerate();
    let header_line = match lines.next() {
        Some((_, l)) if !l.is_empty() => l,
        _ => return Err("line 1: missing header".to_string()),
    };
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| format!("line 1: {e}"))?;
    if header.format != FORMAT {
        return Err(format!(
            "line 1: format '{}' is not '{FORMAT}'",
            header.format
        ));
    }
    if header.version != VERSION {
        return Err(format!(
            "line 1: version {} is not supported (this reader handles {VERSION})",
            header.version
        ));
    }
    let mut examples = Vec::with_capacity(header.n);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            // A final newline leaves one trailing empty split.
            continue;
        }
        let record: Record =
            serde_json::from_str(line).map_err(|e| format!("line {lineno}: {e}"))?;
        let candidates = LabelSet::new(header.k, record.s)
            .map_err(|e| format!("line {lineno}: bitmask {}: {e}", record.s))?;
        if record.x.len() != header.d {
            return Err(format!(
                "line {lineno}: {} features, header says {}",
                record.x.len(),
                header.d
            ));
        }
        if let Some(y) = record.y {
            if y < 1 || y > header.k {
                return Err(format!(
                    "line {lineno}: label {y} outside 1..={}",
                    header.k
                ));
            }
        }
        examples.push(PlExample {
            features: record.x,
            candidates,
            true_label: record.y,
        });
    }
    if examples.len() != header.n {
        return Err(format!(
            "header says n={} but file has {} records",
            header.n,
            examples.len()
        ));
    }
    PlDataset::new(header.k, header.d, examples, header.config, header.seed)
        .map_err(|e| e.to_string())
}

/// Parses the line-delimited text form. Errors name the line number.
pub fn read_pl_dataset_bytes(bytes: &[u8]) -> Result<PlDataset> {
    read_inner(bytes).map_err(|m| Error::parse("(pl dataset)", m))
}

/// Writes a dataset file, gzip-compressed when the path ends in `.gz`.
pub fn write_pl_dataset(path: &Path, ds: &PlDataset) -> Result<()> {
    let bytes = write_pl_dataset_bytes(ds)?;
    super::write_bytes(path, &bytes)
}

/// Reads a dataset file, gunzipping when the path ends in `.gz`.
pub fn read_pl_dataset(path: &Path) -> Result<PlDataset> {
    let bytes = super::read_bytes(path)?;
    read_inner(&bytes).map_err(|m| Error::parse(path.display().to_string(), m))
}
