use ndarray::Array2;

use super::{ItemLabelMatrix, LabelError};
use crate::par::{self, Exec};

/// Symmetric positive pointwise mutual information between labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PpmiMatrix {
    pub values: Array2<f64>,
    /// `|L_i|`: number of items carrying each label.
    pub supports: Vec<usize>,
}

impl PpmiMatrix {
    pub fn n_labels(&self) -> usize {
        self.supports.len()
    }
}

pub fn compute_ppmi(m: &ItemLabelMatrix) -> Result<PpmiMatrix, LabelError> {
    compute_ppmi_with(Exec::default(), m)
}

/// `X[i][j] = max(0, ln(P(Li,Lj) / (P(Li) P(Lj))))` with probabilities
/// taken over the `m` items. Natural logarithm.
pub fn compute_ppmi_with(exec: Exec, m: &ItemLabelMatrix) -> Result<PpmiMatrix, LabelError> {
    let n_items = m.n_items();
    let n = m.n_labels();
    if n_items == 0 || n == 0 {
        return Err(LabelError::EmptyMatrix);
    }
    let mut postings: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in m.rows().iter().enumerate() {
        for &l in row {
            postings[l].push(i);
        }
    }
    if let Some(l) = postings.iter().position(Vec::is_empty) {
        return Err(LabelError::ZeroSupportLabel(l));
    }
    let supports: Vec<usize> = postings.iter().map(Vec::len).collect();
    let total = n_items as f64;

    // Upper triangle row by row, then mirrored so X is exactly symmetric.
    let rows = par::map_range(exec, n, |i| {
        (i..n)
            .map(|j| {
                let joint = intersection_len(&postings[i], &postings[j]);
                if joint == 0 {
                    return 0.0;
                }
                let ratio = (joint as f64 * total) / (supports[i] as f64 * supports[j] as f64);
                ratio.ln().max(0.0)
            })
            .collect::<Vec<f64>>()
    });
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            values[[i, i + off]] = v;
            values[[i + off, i]] = v;
        }
    }
    Ok(PpmiMatrix { values, supports })
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_gives_zero_and_self_gives_ln2() {
        // m = 4; L0 = {0,1}, L1 = {0,2}, L2 = {3}
        let m = ItemLabelMatrix::new(3, vec![vec![0, 1], vec![0], vec![1], vec![2]]).unwrap();
        let x = compute_ppmi(&m).unwrap();
        assert_eq!(x.values[[0, 1]], 0.0);
        assert!((x.values[[0, 0]] - 2f64.ln()).abs() < 1e-15);
        assert!((x.values[[1, 1]] - 2f64.ln()).abs() < 1e-15);
        // never co-occur
        assert_eq!(x.values[[0, 2]], 0.0);
        assert_eq!(x.supports, vec![2, 2, 1]);
    }

    #[test]
    fn negative_association_clips_to_zero() {
        // L0 = {0,1}, L1 = {0,2,3}: joint 1/4 < (1/2)(3/4)
        let m = ItemLabelMatrix::new(2, vec![vec![0, 1], vec![0], vec![1], vec![1]]).unwrap();
        let x = compute_ppmi(&m).unwrap();
        assert_eq!(x.values[[0, 1]], 0.0);
        assert_eq!(x.values[[1, 0]], 0.0);
    }

    #[test]
    fn zero_support_and_empty() {
        let m = ItemLabelMatrix::new(3, vec![vec![0], vec![1]]).unwrap();
        assert!(matches!(compute_ppmi(&m), Err(LabelError::ZeroSupportLabel(2))));
        let m = ItemLabelMatrix::new(3, vec![]).unwrap();
        assert!(matches!(compute_ppmi(&m), Err(LabelError::EmptyMatrix)));
    }
}
