//! Label-averaged AUC-ROC and catalog coverage at k.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label_space::label_scores_from_factor;
use crate::par::{self, Exec};

pub const REPORT_KS: [usize; 3] = [1, 3, 5];

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no label has both positive and negative test items")]
    AllLabelsSkipped,
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("shape mismatch: scores {scores:?}, truth {truth:?}")]
    ShapeMismatch {
        scores: (usize, usize),
        truth: (usize, usize),
    },
    #[error("non-finite score at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("factor matrix has {got} columns, outputs have {want}")]
    FactorMismatch { got: usize, want: usize },
}

/// Item-by-label scores with aligned ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    scores: Array2<f64>,
    truth: Array2<bool>,
}

impl PredictionMatrix {
    pub fn new(scores: Array2<f64>, truth: Array2<bool>) -> Result<Self, MetricsError> {
        if scores.dim() != truth.dim() {
            return Err(MetricsError::ShapeMismatch {
                scores: scores.dim(),
                truth: truth.dim(),
            });
        }
        if let Some(((i, j), _)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MetricsError::NonFinite(i, j));
        }
        Ok(Self { scores, truth })
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn truth(&self) -> &Array2<bool> {
        &self.truth
    }

    pub fn n_items(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.scores.ncols()
    }
}

/// Mann-Whitney AUC with midranks; `None` without positives or negatives.
pub fn auc_per_label(scores: ArrayView1<f64>, truth: ArrayView1<bool>) -> Option<f64> {
    let p = truth.iter().filter(|&&t| t).count();
    let n = truth.len() - p;
    if p == 0 || n == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos = order[i..j].iter().filter(|&&k| truth[k]).count();
        rank_sum += midrank * pos as f64;
        i = j;
    }
    let (p, n) = (p as f64, n as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn auc_columns(pm: &PredictionMatrix, exec: Exec) -> Vec<Option<f64>> {
    par::map_range(exec, pm.n_labels(), |j| {
        auc_per_label(pm.scores.column(j), pm.truth.column(j))
    })
}

/// Unweighted mean of the defined per-label AUCs and the skipped count.
pub fn auc_macro(pm: &PredictionMatrix, exec: Exec) -> Result<(f64, usize), MetricsError> {
    macro_mean(&auc_columns(pm, exec))
}

fn macro_mean(per_label: &[Option<f64>]) -> Result<(f64, usize), MetricsError> {
    let defined: Vec<f64> = per_label.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(MetricsError::AllLabelsSkipped);
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok((mean, per_label.len() - defined.len()))
}

/// Labels of one row ranked by score, ties by ascending label id.
pub fn top_k(row: ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Fraction of all labels appearing in some item's top-k list.
pub fn coverage_at_k(pm: &PredictionMatrix, k: usize, exec: Exec) -> Result<f64, MetricsError> {
    let n = pm.n_labels();
    if k == 0 || k > n {
        return Err(MetricsError::KOutOfRange { k, n });
    }
    let tops = par::map_range(exec, pm.n_items(), |i| top_k(pm.scores.row(i), k));
    let mut hit = vec![false; n];
    for j in tops.into_iter().flatten() {
        hit[j] = true;
    }
    Ok(hit.iter().filter(|&&h| h).count() as f64 / n as f64)
}

/// Label scores of cosine-head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineScores {
    pub scores: Array2<f64>,
    /// Output rows with zero norm; their scores are all 0.
    pub zero_rows: Vec<usize>,
}

/// Cosine similarity of every output row with every label factor row.
pub fn scores_from_cosine_head(
    outputs: &Array2<f64>,
    label_factors: &Array2<f64>,
    exec: Exec,
) -> Result<CosineScores, MetricsError> {
    if label_factors.ncols() != outputs.ncols() {
        return Err(MetricsError::FactorMismatch {
            got: label_factors.ncols(),
            want: outputs.ncols(),
        });
    }
    let rows = par::map_range(exec, outputs.nrows(), |i| {
        label_scores_from_factor(outputs.row(i), label_factors).ok()
    });
    let n = label_factors.nrows();
    let mut scores = Array2::zeros((outputs.nrows(), n));
    let mut zero_rows = Vec::new();
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Some(v) => scores.row_mut(i).assign(&ArrayView1::from(&v)),
            None => zero_rows.push(i),
        }
    }
    Ok(CosineScores { scores, zero_rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAuc {
    pub label: usize,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    /// Keyed by k as a string; only k not exceeding the label count.
    pub coverage: BTreeMap<String, f64>,
    pub skipped_labels: usize,
    pub per_label: Vec<LabelAuc>,
}

impl EvalReport {
    pub fn coverage_at(&self, k: usize) -> Option<f64> {
        self.coverage.get(&k.to_string()).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_json().as_bytes())?;
        w.write_all(b"\n")
    }
}

pub fn evaluate(pm: &PredictionMatrix, exec: Exec) -> Result<EvalReport, MetricsError> {
    let per_label = auc_columns(pm, exec);
    let (auc, skipped_labels) = macro_mean(&per_label)?;
    let mut coverage = BTreeMap::new();
    for k in REPORT_KS.into_iter().filter(|&k| k <= pm.n_labels()) {
        coverage.insert(k.to_string(), coverage_at_k(pm, k, exec)?);
    }
    Ok(EvalReport {
        auc,
        coverage,
        skipped_labels,
        per_label: per_label
            .into_iter()
            .enumerate()
            .map(|(label, auc)| LabelAuc { label, auc })
            .collect(),
    })
}

/// Boolean ground truth from a dense 0/1 target matrix.
pub fn truth_from_dense(y: &Array2<f64>) -> Array2<bool> {
    y.mapv(|v| v > 0.5)
}
