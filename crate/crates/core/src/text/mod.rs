//! Text pipeline: review aggregation, tokenization, vocabulary, tf-idf
//! vectors and per-term information gain.

mod infogain;
mod tfidf;

pub use infogain::{term_information_gain, DEFAULT_TOP_TERMS};
pub use tfidf::{
    build_vocabulary, read_tfidf, tfidf, tfidf_with, write_tfidf, TfIdfMatrix, Vocabulary,
    DEFAULT_VOCAB_SIZE,
};

use thiserror::Error;

pub const DEFAULT_CHAR_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary size must be at least 1")]
    InvalidVocabSize,
    #[error("label column needs at least one positive and one negative document")]
    DegenerateLabel,
    #[error("{docs} documents but {labels} labels")]
    LengthMismatch { docs: usize, labels: usize },
    #[error("tf-idf file: {0}")]
    Format(#[from] crate::codec::CodecError),
}

/// Joins reviews with single spaces and keeps the first `limit` characters.
pub fn aggregate_and_truncate<S: AsRef<str>>(reviews: &[S], limit: usize) -> String {
    let mut joined = String::new();
    for (i, r) in reviews.iter().enumerate() {
        if i > 0 {
            joined.push(' ');
        }
        joined.push_str(r.as_ref());
    }
    match joined.char_indices().nth(limit) {
        Some((byte, _)) => joined[..byte].to_string(),
        None => joined,
    }
}

/// Lowercases, splits on non-alphanumeric characters and drops tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Enrichment terms are appended as ordinary words.
pub fn append_enrichment<S: AsRef<str>>(mut tokens: Vec<String>, enrichment: &[S]) -> Vec<String> {
    tokens.extend(enrichment.iter().map(|t| t.as_ref().to_string()));
    tokens
}

/// Turns a multi-word category name into a single vocabulary token.
pub fn normalize_enrichment_term(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}
