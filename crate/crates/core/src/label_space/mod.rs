//! Label space: the genre taxonomy, ancestor-closed item/label matrices,
//! PPMI label co-occurrence and its SVD factorization into dense label and
//! item factors.

mod factors;
mod ppmi;
mod svd;
mod taxonomy;

pub use factors::{
    factorize, item_factors, label_scores_from_factor, read_factor_model, write_factor_model,
    FactorModel, DEFAULT_FACTOR_DIM,
};
pub use ppmi::{compute_ppmi, compute_ppmi_with, PpmiMatrix};
pub use svd::{svd_jacobi, Svd};
pub use taxonomy::{
    close_labels, parse_taxonomy, prune_rare_labels, ItemLabelMatrix, LabelNode, LabelTaxonomy,
    Pruned, MAX_DEPTH,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("empty branch path or empty segment in {0:?}")]
    EmptyPath(String),
    #[error("branch path {path:?} has {depth} levels, at most {max} allowed")]
    DepthExceeded { path: String, depth: usize, max: usize },
    #[error("unknown taxonomy path {0:?}")]
    UnknownPath(String),
    #[error("item {0} has no labels")]
    EmptyItem(usize),
    #[error("label id {label} out of range for {n_labels} labels")]
    LabelOutOfRange { label: usize, n_labels: usize },
    #[error("every label was pruned")]
    AllLabelsPruned,
    #[error("min_support must be at least 1")]
    InvalidSupport,
    #[error("item/label matrix is empty")]
    EmptyMatrix,
    #[error("label {0} has zero support")]
    ZeroSupportLabel(usize),
    #[error("factor dimension {d} exceeds label count {n}")]
    DimensionTooLarge { d: usize, n: usize },
    #[error("factor dimension must be at least 1")]
    ZeroDimension,
    #[error("item {0} has a zero label-factor sum")]
    ZeroFactorItem(usize),
    #[error("zero-norm factor vector")]
    ZeroVector,
    #[error("label factor matrix has {got} rows, expected {expected}")]
    FactorRowsMismatch { expected: usize, got: usize },
    #[error("factor model file: {0}")]
    Format(#[from] crate::codec::CodecError),
}
