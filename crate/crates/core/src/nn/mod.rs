//! A small deterministic neural-network engine in double precision:
//! dense, valid 2-D convolution, max-pooling, ReLU, sigmoid, inverted
//! dropout and flatten layers, with a logistic (sigmoid + BCE) or cosine
//! (linear + cosine proximity) output head.
//!
//! Activations are carried as `batch x (c*h*w)` matrices, row-major per
//! sample in channel, height, width order.

mod checkpoint;
mod gradcheck;
mod kernels;
mod loss;
mod model;
mod optim;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, BlockReport, GradCheckConfig, GradCheckReport};
pub use loss::{bce_clamp, loss_cosine, loss_logistic, BCE_EPS, COSINE_EPS};
pub use model::{Forward, Grads, ModelGraph};
pub(crate) use model::mix_seed;
pub use optim::{Optimizer, OptimizerConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("non-finite value after layer {layer}")]
    NonFinite { layer: String },
    #[error("zero-norm output row {0}")]
    ZeroVector(usize),
    #[error("checkpoint: {0}")]
    Format(#[from] crate::codec::CodecError),
}

/// Per-sample activation shape. Flat vectors are `(n, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn image(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn flat(n: usize) -> Self {
        Self { c: n, h: 1, w: 1 }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_flat(&self) -> bool {
        self.h == 1 && self.w == 1
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { out: usize },
    /// Valid padding, stride 1. `kh` spans frequency (rows), `kw` time.
    Conv2d { filters: usize, kh: usize, kw: usize },
    /// Non-overlapping, floor division.
    MaxPool { ph: usize, pw: usize },
    Relu,
    Sigmoid,
    Dropout { rate: f64 },
    Flatten,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        match *self {
            LayerSpec::Dense { out } => {
                if out == 0 {
                    return Err(NnError::InvalidLayer("dense with zero outputs".into()));
                }
                if !input.is_flat() {
                    return Err(NnError::ShapeMismatch(format!(
                        "dense expects a flat input, got {input}; insert flatten"
                    )));
                }
                Ok(Shape::flat(out))
            }
            LayerSpec::Conv2d { filters, kh, kw } => {
                if filters == 0 || kh == 0 || kw == 0 {
                    return Err(NnError::InvalidLayer("conv2d dims must be >= 1".into()));
                }
                if kh > input.h || kw > input.w {
                    return Err(NnError::ShapeMismatch(format!(
                        "conv2d {kh}x{kw} does not fit input {input}"
                    )));
                }
                Ok(Shape::image(filters, input.h - kh + 1, input.w - kw + 1))
            }
            LayerSpec::MaxPool { ph, pw } => {
                if ph == 0 || pw == 0 {
                    return Err(NnError::InvalidLayer("pool dims must be >= 1".into()));
                }
                if ph > input.h || pw > input.w {
                    return Err(NnError::ShapeMismatch(format!(
                        "pool {ph}x{pw} does not fit input {input}"
                    )));
                }
                Ok(Shape::image(input.c, input.h / ph, input.w / pw))
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(NnError::InvalidLayer(format!("dropout rate {rate} not in [0,1)")));
                }
                Ok(input)
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input),
            LayerSpec::Flatten => Ok(Shape::flat(input.len())),
        }
    }

    /// Number of trainable parameters given the input shape.
    pub fn param_count(&self, input: Shape) -> usize {
        match *self {
            LayerSpec::Dense { out } => out * input.len() + out,
            LayerSpec::Conv2d { filters, kh, kw } => filters * input.c * kh * kw + filters,
            _ => 0,
        }
    }
}

/// Output head: a dense layer followed by sigmoid (`Logistic`, trained with
/// binary cross-entropy) or left linear (`Cosine`, trained with the cosine
/// proximity loss).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Logistic(usize),
    Cosine(usize),
}

impl Head {
    pub fn dim(&self) -> usize {
        match *self {
            Head::Logistic(n) | Head::Cosine(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout masks are drawn from `seed`, so a train-mode pass is
    /// reproducible.
    Train { seed: u64 },
}
