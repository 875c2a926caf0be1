use ndarray::Array2;

use super::{Dataset, Manifest, PipelineError, Split};
use crate::label_space::{close_labels, FactorModel, LabelTaxonomy};
use crate::metrics::{evaluate, scores_from_cosine_head, EvalReport, PredictionMatrix};
use crate::par::Exec;
use crate::text::{
    aggregate_and_truncate, append_enrichment, build_vocabulary, normalize_enrichment_term, term_information_gain,
    tokenize,
};
use crate::zoo::FeatureVectors;

/// Review tokens of every album, truncated to `char_limit` characters,
/// with normalized enrichment terms appended when `semantic` is set.
pub fn documents(manifest: &Manifest, char_limit: usize, semantic: bool) -> Vec<Vec<String>> {
    manifest
        .records
        .iter()
        .map(|r| {
            let tokens = tokenize(&aggregate_and_truncate(&r.reviews, char_limit));
            if semantic {
                let terms: Vec<String> = r.enrichment.iter().map(|t| normalize_enrichment_term(t)).collect();
                append_enrichment(tokens, &terms)
            } else {
                tokens
            }
        })
        .collect()
}

/// Scores a stored prediction matrix against manifest labels.
///
/// Columns follow `label_paths` when given, otherwise every taxonomy label
/// in node order. With `factors`, rows are cosine-head outputs and are
/// first mapped to label scores.
pub fn evaluate_predictions(
    manifest: &Manifest,
    tax: &LabelTaxonomy,
    label_paths: Option<&[String]>,
    preds: &FeatureVectors,
    factors: Option<&FactorModel>,
) -> Result<EvalReport, PipelineError> {
    let labels: Vec<usize> = match label_paths {
        Some(paths) => paths.iter().map(|p| tax.lookup(p)).collect::<Result<_, _>>()?,
        None => (0..tax.len()).collect(),
    };
    let scores = match factors {
        Some(f) => {
            if f.n_labels() != labels.len() {
                return Err(PipelineError::Data(format!(
                    "factor model has {} labels, expected {}",
                    f.n_labels(),
                    labels.len()
                )));
            }
            scores_from_cosine_head(&preds.values, &f.label_factors, Exec::default())?.scores
        }
        None => preds.values.clone(),
    };
    if scores.ncols() != labels.len() {
        return Err(PipelineError::Data(format!(
            "predictions have {} columns for {} labels",
            scores.ncols(),
            labels.len()
        )));
    }
    let mut truth = Array2::from_elem(scores.dim(), false);
    for (i, id) in preds.ids.iter().enumerate() {
        let rec = manifest
            .records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| PipelineError::Data(format!("prediction for unknown item {id:?}")))?;
        let set = close_labels(&rec.labels, tax)?;
        for (j, l) in labels.iter().enumerate() {
            truth[[i, j]] = set.contains(l);
        }
    }
    Ok(evaluate(&PredictionMatrix::new(scores, truth)?, Exec::default())?)
}

/// Terms with the highest information gain about one label over the
/// training and validation albums, best first.
pub fn label_infogain(
    ds: &Dataset,
    label_path: &str,
    vocab_size: usize,
    char_limit: usize,
    semantic: bool,
    top: usize,
) -> Result<Vec<(String, f64)>, PipelineError> {
    let label = ds.taxonomy.lookup(label_path)?;
    let col = ds
        .labels
        .iter()
        .position(|&l| l == label)
        .ok_or_else(|| PipelineError::Data(format!("label {label_path:?} has no training support")))?;
    let docs = documents(&ds.manifest, char_limit, semantic);
    let fit: Vec<usize> = (0..docs.len()).filter(|&i| ds.split.tags[i] != Split::Test).collect();
    let fit_docs: Vec<Vec<String>> = fit.iter().map(|&i| docs[i].clone()).collect();
    let vocab = build_vocabulary(&fit_docs, vocab_size)?;
    let presence: Vec<Vec<usize>> = fit_docs.iter().map(|d| vocab.presence(d)).collect();
    let y: Vec<bool> = fit.iter().map(|&i| ds.truth[[i, col]]).collect();
    let ig = term_information_gain(&presence, &y, vocab.len())?;
    let mut ranked: Vec<(String, f64)> = vocab.terms().iter().cloned().zip(ig).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top);
    Ok(ranked)
}
