use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use ndarray::Array2;

use super::TextError;
use crate::codec::{self, CodecError, Reader, Writer};
use crate::par::{self, Exec};

pub const DEFAULT_VOCAB_SIZE: usize = 10_000;

const MAGIC: &[u8; 4] = b"MUSP";

/// Bounded vocabulary ranked by document frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
    /// Number of documents the frequencies were counted over.
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, idx: usize) -> usize {
        self.df[idx]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Smoothed inverse document frequency `ln((1+m)/(1+df)) + 1`.
    pub fn idf(&self, idx: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[idx] as f64)).ln() + 1.0
    }

    /// Sorted, deduplicated vocabulary ids present in `doc`.
    pub fn presence(&self, doc: &[String]) -> Vec<usize> {
        let mut ids: Vec<usize> = doc.iter().filter_map(|t| self.index_of(t)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Keeps the `max_size` terms with the highest document frequency; ties go
/// to the lexicographically smaller term.
pub fn build_vocabulary(corpus: &[Vec<String>], max_size: usize) -> Result<Vocabulary, TextError> {
    if max_size == 0 {
        return Err(TextError::InvalidVocabSize);
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        let seen: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    let terms: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary {
        terms,
        index,
        df: ranked.iter().map(|&(_, d)| d).collect(),
        n_docs: corpus.len(),
    })
}

/// Sparse document x term matrix with l2-normalized rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfMatrix {
    pub n_cols: usize,
    /// Per document `(term index, weight)` sorted by index.
    pub rows: Vec<Vec<(u32, f64)>>,
    /// Documents with no in-vocabulary term; their rows are empty.
    pub empty_rows: Vec<usize>,
}

impl TfIdfMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), self.n_cols));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[[i, j as usize]] = v;
            }
        }
        out
    }
}

pub fn tfidf(corpus: &[Vec<String>], vocab: &Vocabulary) -> TfIdfMatrix {
    tfidf_with(Exec::default(), corpus, vocab)
}

/// `count(t, doc) * idf(t)`, then each row scaled to unit l2 norm.
/// Out-of-vocabulary terms are ignored.
pub fn tfidf_with(exec: Exec, corpus: &[Vec<String>], vocab: &Vocabulary) -> TfIdfMatrix {
    let rows = par::map_slice(exec, corpus, |doc| {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for t in doc {
            if let Some(i) = vocab.index_of(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut row: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i as u32, c as f64 * vocab.idf(i)))
            .collect();
        row.sort_unstable_by_key(|&(i, _)| i);
        let nrm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if nrm > 0.0 {
            row.iter_mut().for_each(|(_, v)| *v /= nrm);
        }
        row
    });
    let empty_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_empty())
        .map(|(i, _)| i)
        .collect();
    TfIdfMatrix {
        n_cols: vocab.len(),
        rows,
        empty_rows,
    }
}

pub fn write_tfidf<W: Write>(w: W, m: &TfIdfMatrix) -> Result<(), TextError> {
    let mut w = Writer::new(w);
    let io = |e: std::io::Error| TextError::Format(CodecError::Io(e));
    w.bytes(MAGIC).map_err(io)?;
    w.u32(codec::dim(m.rows.len())?).map_err(io)?;
    w.u32(codec::dim(m.n_cols)?).map_err(io)?;
    for row in &m.rows {
        w.u32(codec::dim(row.len())?).map_err(io)?;
        for &(i, v) in row {
            w.u32(i).map_err(io)?;
            w.f64(v).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_tfidf<R: Read>(r: R) -> Result<TfIdfMatrix, TextError> {
    let mut r = Reader::new(r);
    r.magic(MAGIC)?;
    let m = r.u32()? as usize;
    let n_cols = r.u32()? as usize;
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let nnz = r.u32()? as usize;
        let mut row = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let i = r.u32()?;
            if i as usize >= n_cols {
                return Err(CodecError::Malformed(format!("column {i} >= {n_cols}")).into());
            }
            row.push((i, r.f64()?));
        }
        rows.push(row);
    }
    r.finish()?;
    let empty_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_empty())
        .map(|(i, _)| i)
        .collect();
    Ok(TfIdfMatrix {
        n_cols,
        rows,
        empty_rows,
    })
}
