//! The IDX container format used by the classic image benchmarks: a
//! big-endian magic number, big-endian dimension sizes, then a flat
//! byte payload.
//!
//! Parsing keeps the payload as raw bytes so that re-serializing a
//! parsed file reproduces the original byte stream exactly. Scaling to
//! `[0, 1]` features happens only when a parsed pair is assembled into
//! a [`LabeledDataset`].

use std::path::Path;

use ndarray::Array2;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 2051;
const LABELS_MAGIC: u32 = 2049;

/// A parsed image file: `n` images of `rows x cols` pixel bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixel bytes, `n * rows * cols` of them.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// Pixels scaled by 1/255 into an `n x (rows * cols)` matrix.
    pub fn to_features(&self) -> Array2<f64> {
        let d = self.rows * self.cols;
        Array2::from_shape_fn((self.n, d), |(i, j)| {
            f64::from(self.pixels[i * d + j]) / 255.0
        })
    }
}

fn read_u32(bytes: &[u8], off: usize) -> std::result::Result<u32, String> {
    match bytes.get(off..off + 4) {
        Some(w) => Ok(u32::from_be_bytes(w.try_into().expect("4-byte slice"))),
        None => Err(format!(
            "truncated: need 4 bytes at offset {off}, file has {}",
            bytes.len()
        )),
    }
}

fn images_inner(bytes: &[u8]) -> std::result::Result<IdxImages, String> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(format!(
            "magic {magic} (0x{magic:08x}) at offset 0, expected {IMAGES_MAGIC} for images"
        ));
    }
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let payload = (n as u64)
        .checked_mul(rows as u64)
        .and_then(|v| v.checked_mul(cols as u64))
        .ok_or_else(|| format!("dimensions {n} x {rows} x {cols} overflow"))?;
    let want = 16u64 + payload;
    if (bytes.len() as u64) < want {
        return Err(format!(
            "truncated: payload needs {payload} bytes at offset 16, file has {}",
            bytes.len()
        ));
    }
    if (bytes.len() as u64) > want {
        return Err(format!("{} stray bytes after offset {want}", bytes.len() as u64 - want));
    }
    Ok(IdxImages {
        n,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

fn labels_inner(bytes: &[u8]) -> std::result::Result<Vec<u8>, String> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(format!(
            "magic {magic} (0x{magic:08x}) at offset 0, expected {LABELS_MAGIC} for labels"
        ));
    }
    let n = read_u32(bytes, 4)? as usize;
    let want = 8u64 + n as u64;
    if (bytes.len() as u64) < want {
        return Err(format!(
            "truncated: payload needs {n} bytes at offset 8, file has {}",
            bytes.len()
        ));
    }
    if (bytes.len() as u64) > want {
        return Err(format!("{} stray bytes after offset {want}", bytes.len() as u64 - want));
    }
    Ok(bytes[8..].to_vec())
}

/// Parses an image file (magic 2051). Errors name the byte offset.
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    images_inner(bytes).map_err(|m| Error::parse("(idx images)", m))
}

/// Parses a label file (magic 2049) into raw label bytes.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    labels_inner(bytes).map_err(|m| Error::parse("(idx labels)", m))
}

/// Inverse of [`parse_idx_images`], bit-exact.
pub fn serialize_idx_images(images: &IdxImages) -> Result<Vec<u8>> {
    let d = images
        .n
        .checked_mul(images.rows)
        .and_then(|v| v.checked_mul(images.cols));
    if d != Some(images.pixels.len()) {
        return Err(Error::domain(format!(
            "{} pixel bytes for {} images of {} x {}",
            images.pixels.len(),
            images.n,
            images.rows,
            images.cols
        )));
    }
    for (name, v) in [
        ("count", images.n),
        ("rows", images.rows),
        ("cols", images.cols),
    ] {
        if v > u32::MAX as usize {
            return Err(Error::domain(format!("{name} {v} exceeds the 32-bit header")));
        }
    }
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.n as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    Ok(out)
}

/// Inverse of [`parse_idx_labels`], bit-exact.
pub fn serialize_idx_labels(labels: &[u8]) -> Result<Vec<u8>> {
    if labels.len() > u32::MAX as usize {
        return Err(Error::domain(format!(
            "count {} exceeds the 32-bit header",
            labels.len()
        )));
    }
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    Ok(out)
}

/// Loads an image/label file pair into a dataset: pixels scaled by
/// 1/255, label bytes shifted up by one, `k` taken from the largest
/// label byte. Paths ending in `.gz` are decompressed transparently.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let ibytes = super::read_bytes(images_path)?;
    let images =
        images_inner(&ibytes).map_err(|m| Error::parse(images_path.display().to_string(), m))?;
    let lbytes = super::read_bytes(labels_path)?;
    let labels =
        labels_inner(&lbytes).map_err(|m| Error::parse(labels_path.display().to_string(), m))?;
    if labels.len() != images.n {
        return Err(Error::parse(
            labels_path.display().to_string(),
            format!(
                "count mismatch: {} labels for {} images in {}",
                labels.len(),
                images.n,
                images_path.display()
            ),
        ));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    LabeledDataset::new(
        images.to_features(),
        labels.iter().map(|&b| b as usize + 1).collect(),
        k,
    )
}
