//! The concrete architectures: audio CNNs over spectrogram patches, the
//! text MLP over tf-idf vectors and the shallow input-to-output network
//! used for timbre statistics, album vectors and fused features. Also
//! training, feature extraction, track averaging and late fusion.

mod features;
mod train;

pub use features::{
    average_tracks, fuse, ids_path, load_feature_vectors, read_feature_vectors,
    save_feature_vectors, write_feature_vectors, FeatureVectors,
    FusionInput, MissingPolicy, Modality,
};
pub use train::{
    extract_features, overfit, train, EpochRecord, Examples, InMemory, OverfitOutcome,
    TrainConfig, Trained,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Head, LayerSpec, ModelGraph, NnError, Shape};

pub const CNN_FEATURE_UNITS: usize = 512;
pub const TEXT_HIDDEN_UNITS: usize = 2048;
pub const LOW_WIDTHS: [usize; 4] = [64, 128, 128, 64];
pub const HIGH_WIDTHS: [usize; 4] = [256, 512, 1024, 1024];
/// Dropout on fused inputs for the cosine target.
pub const FUSION_COSINE_DROPOUT: f64 = 0.7;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("album {0} has no track vectors")]
    EmptyAlbum(usize),
    #[error("modality {modality} is missing for item {item:?}")]
    MissingModality { modality: Modality, item: String },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("feature dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("feature file: {0}")]
    Format(#[from] crate::codec::CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Logistic,
    Cosine,
}

impl HeadKind {
    pub fn head(self, dim: usize) -> Head {
        match self {
            HeadKind::Logistic => Head::Logistic(dim),
            HeadKind::Cosine => Head::Cosine(dim),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Logistic => "logistic",
            HeadKind::Cosine => "cosine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterShape {
    #[serde(rename = "3x3")]
    Sq3x3,
    #[serde(rename = "4x96")]
    T4x96,
    #[serde(rename = "4x70")]
    F4x70,
}

impl FilterShape {
    pub const ALL: [FilterShape; 3] = [FilterShape::Sq3x3, FilterShape::T4x96, FilterShape::F4x70];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterShape::Sq3x3 => "3x3",
            FilterShape::T4x96 => "4x96",
            FilterShape::F4x70 => "4x70",
        }
    }

    /// `(frequency, time)` kernel of conv layer `layer`.
    fn kernel(self, layer: usize) -> (usize, usize) {
        match (self, layer) {
            (FilterShape::Sq3x3, _) => (3, 3),
            (FilterShape::T4x96, 0) => (96, 4),
            (FilterShape::T4x96, _) => (1, 4),
            (FilterShape::F4x70, 0) => (70, 4),
            (FilterShape::F4x70, _) => (3, 3),
        }
    }

    /// Nominal `(frequency, time)` pooling after each conv layer.
    fn pool(self) -> (usize, usize) {
        match self {
            FilterShape::T4x96 => (1, 4),
            FilterShape::Sq3x3 | FilterShape::F4x70 => (2, 4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Width {
    Low,
    High,
}

impl Width {
    pub fn filters(self) -> [usize; 4] {
        match self {
            Width::Low => LOW_WIDTHS,
            Width::High => HIGH_WIDTHS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Width::Low => "low",
            Width::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioCnnConfig {
    pub filter_shape: FilterShape,
    pub width: Width,
    pub head: HeadKind,
    /// Defaults to 0.5 for high/cosine and 0 otherwise.
    pub dropout: Option<f64>,
}

impl AudioCnnConfig {
    pub fn new(filter_shape: FilterShape, width: Width, head: HeadKind) -> Self {
        Self {
            filter_shape,
            width,
            head,
            dropout: None,
        }
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout.unwrap_or(match (self.width, self.head) {
            (Width::High, HeadKind::Cosine) => 0.5,
            _ => 0.0,
        })
    }

    /// Settings label such as `low-4x70`.
    pub fn settings(&self) -> String {
        format!("{}-{}", self.width.as_str(), self.filter_shape.as_str())
    }
}

/// Layer stack of the audio CNN for an `n_bins x frames` input.
///
/// Each of the four conv layers is followed by ReLU and max-pooling. The
/// pool is shrunk along an axis when the nominal size would leave too few
/// rows or frames for the remaining kernels, so short inputs still build.
pub fn audio_cnn_specs(cfg: &AudioCnnConfig, n_bins: usize, frames: usize) -> Result<Vec<LayerSpec>, ZooError> {
    let rate = cfg.dropout_rate();
    if !(0.0..1.0).contains(&rate) {
        return Err(ZooError::ConfigInvalid(format!("dropout {rate} not in [0,1)")));
    }
    let filters = cfg.width.filters();
    let kernels: Vec<(usize, usize)> = (0..4).map(|l| cfg.filter_shape.kernel(l)).collect();
    let (nominal_ph, nominal_pw) = cfg.filter_shape.pool();
    let (mut h, mut w) = (n_bins, frames);
    let mut specs = Vec::new();
    for l in 0..4 {
        let (kh, kw) = kernels[l];
        if kh > h || kw > w {
            return Err(ZooError::ConfigInvalid(format!(
                "{} input {n_bins}x{frames} too small: conv {l} ({kh}x{kw}) sees {h}x{w}",
                cfg.settings()
            )));
        }
        h = h - kh + 1;
        w = w - kw + 1;
        let need_h = 1 + kernels[l + 1..].iter().map(|k| k.0 - 1).sum::<usize>();
        let need_w = 1 + kernels[l + 1..].iter().map(|k| k.1 - 1).sum::<usize>();
        if h < need_h || w < need_w {
            return Err(ZooError::ConfigInvalid(format!(
                "{} input {n_bins}x{frames} too small for four conv layers",
                cfg.settings()
            )));
        }
        let ph = nominal_ph.min(h / need_h).max(1);
        let pw = nominal_pw.min(w / need_w).max(1);
        specs.push(LayerSpec::Conv2d {
            filters: filters[l],
            kh,
            kw,
        });
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::MaxPool { ph, pw });
        h /= ph;
        w /= pw;
    }
    specs.push(LayerSpec::Flatten);
    specs.push(LayerSpec::Dense {
        out: CNN_FEATURE_UNITS,
    });
    specs.push(LayerSpec::Relu);
    if rate > 0.0 {
        specs.push(LayerSpec::Dropout { rate });
    }
    Ok(specs)
}

pub fn build_audio_cnn(
    cfg: &AudioCnnConfig,
    n_bins: usize,
    frames: usize,
    out_dim: usize,
    seed: u64,
) -> Result<ModelGraph, ZooError> {
    if out_dim == 0 {
        return Err(ZooError::ConfigInvalid("output dimension must be >= 1".into()));
    }
    let specs = audio_cnn_specs(cfg, n_bins, frames)?;
    Ok(ModelGraph::new(
        Shape::image(1, n_bins, frames),
        specs,
        cfg.head.head(out_dim),
        seed,
    )?)
}

pub fn audio_cnn_param_count(
    cfg: &AudioCnnConfig,
    n_bins: usize,
    frames: usize,
    out_dim: usize,
) -> Result<usize, ZooError> {
    let specs = audio_cnn_specs(cfg, n_bins, frames)?;
    Ok(ModelGraph::count_params(
        Shape::image(1, n_bins, frames),
        &specs,
        cfg.head.head(out_dim),
    )?)
}

pub fn text_mlp_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            out: TEXT_HIDDEN_UNITS,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            out: TEXT_HIDDEN_UNITS,
        },
        LayerSpec::Relu,
    ]
}

/// Two 2048-unit ReLU layers and the head; the second hidden activation is
/// the text feature vector.
pub fn build_text_mlp(in_dim: usize, out_dim: usize, head: HeadKind, seed: u64) -> Result<ModelGraph, ZooError> {
    if in_dim == 0 || out_dim == 0 {
        return Err(ZooError::ConfigInvalid("dimensions must be >= 1".into()));
    }
    Ok(ModelGraph::new(Shape::flat(in_dim), text_mlp_specs(), head.head(out_dim), seed)?)
}

pub fn text_mlp_param_count(in_dim: usize, out_dim: usize, head: HeadKind) -> Result<usize, ZooError> {
    Ok(ModelGraph::count_params(Shape::flat(in_dim), &text_mlp_specs(), head.head(out_dim))?)
}

/// Input wired straight to the head, with optional input dropout.
pub fn build_shallow(
    in_dim: usize,
    out_dim: usize,
    head: HeadKind,
    dropout: f64,
    seed: u64,
) -> Result<ModelGraph, ZooError> {
    if in_dim == 0 || out_dim == 0 {
        return Err(ZooError::ConfigInvalid("dimensions must be >= 1".into()));
    }
    let specs = if dropout > 0.0 {
        vec![LayerSpec::Dropout { rate: dropout }]
    } else {
        Vec::new()
    };
    Ok(ModelGraph::new(Shape::flat(in_dim), specs, head.head(out_dim), seed)?)
}
