//! Linear and MLP classifiers with a softmax head, plus parameter
//! persistence.
//!
//! Everything is double precision and explicit: forward passes cache
//! what backward needs, batch gradients are the mean of per-example
//! gradients, and parameters serialize to a small versioned binary
//! blob whose SHA-256 doubles as the run's parameter digest.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{read_bytes, write_bytes};
use crate::error::{Error, Result};

const BLOB_MAGIC: &[u8; 4] = b"PLPB";
const BLOB_VERSION: u32 = 1;

/// Network shape: a bare softmax regression or a rectifier MLP with
/// the given hidden widths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Linear,
    Mlp(Vec<usize>),
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Linear => f.write_str("linear"),
            Arch::Mlp(widths) => {
                write!(f, "mlp:")?;
                for (i, w) in widths.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    /// `linear` or `mlp:W1,W2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "linear" {
            return Ok(Arch::Linear);
        }
        if let Some(widths) = lower.strip_prefix("mlp:") {
            let parsed: std::result::Result<Vec<usize>, _> =
                widths.split(',').map(|w| w.trim().parse::<usize>()).collect();
            if let Ok(ws) = parsed {
                if !ws.is_empty() {
                    return Ok(Arch::Mlp(ws));
                }
            }
        }
        Err(Error::config(format!(
            "unknown model '{s}' (expected 'linear' or 'mlp:W1,W2,...')"
        )))
    }
}

/// Full description of a model: shape, dimensions, and the seed its
/// initial parameters are drawn from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input_dim: usize,
    pub k: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, k: usize, init_seed: u64) -> Self {
        ModelSpec {
            arch: Arch::Linear,
            input_dim,
            k,
            init_seed,
        }
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>, k: usize, init_seed: u64) -> Self {
        ModelSpec {
            arch: Arch::Mlp(hidden),
            input_dim,
            k,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be at least 1".to_string()));
        }
        if self.k < 2 {
            return Err(Error::config(format!(
                "need at least 2 classes, got k={}",
                self.k
            )));
        }
        if let Arch::Mlp(widths) = &self.arch {
            if widths.is_empty() {
                return Err(Error::config(
                    "mlp needs at least one hidden width".to_string(),
                ));
            }
            if let Some(pos) = widths.iter().position(|&w| w == 0) {
                return Err(Error::config(format!("hidden width {pos} is zero")));
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        if let Arch::Mlp(widths) = &self.arch {
            for &w in widths {
                dims.push((prev, w));
                prev = w;
            }
        }
        dims.push((prev, self.k));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// One dense layer: weights are `fan_in x fan_out`, biases `fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// All parameters of a model. The same shape doubles as a gradient
/// and as a momentum buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub layers: Vec<Layer>,
}

impl Params {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Params {
            layers: spec
                .layer_dims()
                .into_iter()
                .map(|(i, o)| Layer {
                    w: Array2::zeros((i, o)),
                    b: Array1::zeros(o),
                })
                .collect(),
        })
    }

    /// Weights drawn uniformly from ±1/√fan_in, biases zero, all from
    /// [`ModelSpec::init_seed`].
    pub fn init(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(i, o)| {
                let bound = 1.0 / (i as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bounds");
                Layer {
                    w: Array2::from_shape_fn((i, o), |_| dist.sample(&mut rng)),
                    b: Array1::zeros(o),
                }
            })
            .collect();
        Ok(Params { layers })
    }

    /// In-place `self += c * other`, used by the optimizer.
    pub fn axpy(&mut self, c: f64, other: &Params) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.scaled_add(c, &b.w);
            a.b.scaled_add(c, &b.b);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for layer in &mut self.layers {
            layer.w.mapv_inplace(|v| v * c);
            layer.b.mapv_inplace(|v| v * c);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
}

/// Per-layer caches from a batched forward pass.
pub(crate) struct BatchCache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer; the last entry is the logits.
    pre: Vec<Array2<f64>>,
    pub probs: Array2<f64>,
}

fn check_dims(spec: &ModelSpec, params: &Params, width: usize) -> Result<()> {
    spec.validate()?;
    let dims = spec.layer_dims();
    if params.layers.len() != dims.len()
        || params
            .layers
            .iter()
            .zip(&dims)
            .any(|(l, &(i, o))| l.w.dim() != (i, o) || l.b.len() != o)
    {
        return Err(Error::domain("parameters do not fit the model spec".to_string()));
    }
    if width != spec.input_dim {
        return Err(Error::domain(format!(
            "input has {} features, model expects {}",
            width, spec.input_dim
        )));
    }
    Ok(())
}

pub(crate) fn forward_batch(
    spec: &ModelSpec,
    params: &Params,
    x: ArrayView2<'_, f64>,
) -> Result<BatchCache> {
    check_dims(spec, params, x.ncols())?;
    let layers = params.layers.len();
    let mut inputs = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut a = x.to_owned();
    for (idx, layer) in params.layers.iter().enumerate() {
        let z = a.dot(&layer.w) + &layer.b;
        inputs.push(a);
        if idx + 1 < layers {
            a = z.mapv(|v| v.max(0.0));
        } else {
            a = z.clone();
        }
        pre.push(z);
    }
    softmax_rows(&mut a);
    Ok(BatchCache {
        inputs,
        pre,
        probs: a,
    })
}

/// Class probabilities for one input.
pub fn forward(spec: &ModelSpec, params: &Params, x: &[f64]) -> Result<Vec<f64>> {
    let batch = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
    let cache = forward_batch(spec, params, batch.view())?;
    Ok(cache.probs.row(0).to_vec())
}

/// Mean over the batch of per-example parameter gradients, given the
/// per-example gradients with respect to the output probabilities.
pub(crate) fn backward_batch(
    params: &Params,
    cache: &BatchCache,
    grad_probs: ArrayView2<'_, f64>,
) -> Result<Params> {
    if grad_probs.dim() != cache.probs.dim() {
        return Err(Error::domain(format!(
            "probability gradient has shape {:?}, expected {:?}",
            grad_probs.dim(),
            cache.probs.dim()
        )));
    }
    let n = cache.probs.nrows() as f64;
    // Softmax pullback: dz = p .* (g - <g, p>).
    let inner = (&grad_probs * &cache.probs)
        .sum_axis(Axis(1))
        .insert_axis(Axis(1));
    let mut dz = &cache.probs * &(&grad_probs - &inner);

    let mut grads = vec![
        Layer {
            w: Array2::zeros((0, 0)),
            b: Array1::zeros(0),
        };
        params.layers.len()
    ];
    for l in (0..params.layers.len()).rev() {
        grads[l] = Layer {
            w: cache.inputs[l].t().dot(&dz) / n,
            b: dz.sum_axis(Axis(0)) / n,
        };
        if l > 0 {
            let da = dz.dot(&params.layers[l].w.t());
            dz = da * cache.pre[l - 1].mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        }
    }
    Ok(Params { layers: grads })
}

/// Parameter gradient for one input of the scalar loss whose gradient
/// with respect to the output probabilities is `grad_probs`.
pub fn backward(
    spec: &ModelSpec,
    params: &Params,
    x: &[f64],
    grad_probs: &[f64],
) -> Result<Params> {
    let batch = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
    let cache = forward_batch(spec, params, batch.view())?;
    if grad_probs.len() != spec.k {
        return Err(Error::domain(format!(
            "probability gradient has {} entries, expected {}",
            grad_probs.len(),
            spec.k
        )));
    }
    let g = Array2::from_shape_vec((1, grad_probs.len()), grad_probs.to_vec())
        .expect("row shape");
    backward_batch(params, &cache, g.view())
}

/// Serializes spec + parameters: magic, version, JSON spec header,
/// then every layer's weights and biases as little-endian doubles.
pub fn params_to_bytes(spec: &ModelSpec, params: &Params) -> Result<Vec<u8>> {
    check_dims(spec, params, spec.input_dim)?;
    let header = serde_json::to_vec(spec)?;
    let mut out = Vec::new();
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for layer in &params.layers {
        for &v in layer.w.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in layer.b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn blob_inner(bytes: &[u8]) -> std::result::Result<(ModelSpec, Params), String> {
    if bytes.len() < 12 {
        return Err(format!("blob is {} bytes, header needs 12", bytes.len()));
    }
    if &bytes[0..4] != BLOB_MAGIC {
        return Err(format!(
            "bad magic {:?} at offset 0, expected {BLOB_MAGIC:?}",
            &bytes[0..4]
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BLOB_VERSION {
        return Err(format!(
            "unsupported version {version} at offset 4, expected {BLOB_VERSION}"
        ));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body_at = 12usize.checked_add(header_len).ok_or("header length overflows")?;
    if bytes.len() < body_at {
        return Err(format!(
            "truncated at offset {}: JSON header of {header_len} bytes does not fit",
            bytes.len()
        ));
    }
    let spec: ModelSpec = serde_json::from_slice(&bytes[12..body_at])
        .map_err(|e| format!("spec header at offset 12: {e}"))?;
    spec.validate().map_err(|e| format!("spec header: {e}"))?;

    let values = &bytes[body_at..];
    let expected = spec.param_count() * 8;
    if values.len() != expected {
        return Err(format!(
            "parameter payload at offset {body_at} is {} bytes, expected {expected}",
            values.len()
        ));
    }
    let mut at = 0usize;
    let mut next = |count: usize| -> Vec<f64> {
        let vals = values[at..at + count * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        at += count * 8;
        vals
    };
    let layers = spec
        .layer_dims()
        .into_iter()
        .map(|(i, o)| Layer {
            w: Array2::from_shape_vec((i, o), next(i * o)).expect("sized above"),
            b: Array1::from_vec(next(o)),
        })
        .collect();
    Ok((spec, Params { layers }))
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<(ModelSpec, Params)> {
    blob_inner(bytes).map_err(|m| Error::parse("(params blob)", m))
}

pub fn save_params(path: &Path, spec: &ModelSpec, params: &Params) -> Result<()> {
    write_bytes(path, &params_to_bytes(spec, params)?)
}

pub fn load_params(path: &Path) -> Result<(ModelSpec, Params)> {
    blob_inner(&read_bytes(path)?).map_err(|m| Error::parse(path.display().to_string(), m))
}

/// SHA-256 of the serialized blob, as lowercase hex.
pub fn params_digest(spec: &ModelSpec, params: &Params) -> Result<String> {
    let bytes = params_to_bytes(spec, params)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
