use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1};

use super::{svd_jacobi, ItemLabelMatrix, LabelError, PpmiMatrix};
use crate::codec::{self, Reader, Writer};

pub const DEFAULT_FACTOR_DIM: usize = 50;

const MAGIC: &[u8; 4] = b"MUF1";

/// Label factors `C_d = U_d sqrt(S_d)` of a PPMI matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    /// `n x d`, one row per label.
    pub label_factors: Array2<f64>,
    /// Top `d` singular values, non-increasing.
    pub singular_values: Vec<f64>,
}

impl FactorModel {
    pub fn dim(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_factors.nrows()
    }
}

/// Truncated SVD of the PPMI matrix. Each left singular vector is signed so
/// that its largest-magnitude entry is positive.
pub fn factorize(x: &PpmiMatrix, d: usize) -> Result<FactorModel, LabelError> {
    let n = x.values.nrows();
    if d == 0 {
        return Err(LabelError::ZeroDimension);
    }
    if d > n {
        return Err(LabelError::DimensionTooLarge { d, n });
    }
    let svd = svd_jacobi(&x.values);
    let mut label_factors = Array2::zeros((n, d));
    let mut singular_values = Vec::with_capacity(d);
    for k in 0..d {
        let col = svd.u.column(k);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &v)| if v.abs() > best.1.abs() { (i, v) } else { best });
        let sign = if pivot.1 < 0.0 { -1.0 } else { 1.0 };
        let sigma = svd.s[k];
        let scale = sign * sigma.sqrt();
        for i in 0..n {
            label_factors[[i, k]] = col[i] * scale;
        }
        singular_values.push(sigma);
    }
    Ok(FactorModel {
        label_factors,
        singular_values,
    })
}

/// `f_i = normalize(sum of C_d rows for the item's labels)`, i.e. `M C_d`
/// with l2-normalized rows.
pub fn item_factors(c: &Array2<f64>, m: &ItemLabelMatrix) -> Result<Array2<f64>, LabelError> {
    if c.nrows() != m.n_labels() {
        return Err(LabelError::FactorRowsMismatch {
            expected: m.n_labels(),
            got: c.nrows(),
        });
    }
    let d = c.ncols();
    let mut out = Array2::zeros((m.n_items(), d));
    for (i, row) in m.rows().iter().enumerate() {
        let mut acc = Array1::<f64>::zeros(d);
        for &l in row {
            acc += &c.row(l);
        }
        let nrm = acc.dot(&acc).sqrt();
        if nrm < 1e-12 {
            return Err(LabelError::ZeroFactorItem(i));
        }
        out.row_mut(i).assign(&(acc / nrm));
    }
    Ok(out)
}

/// Cosine similarity of `f` against every label factor row; zero-norm rows
/// score 0.
pub fn label_scores_from_factor(
    f: ArrayView1<f64>,
    c: &Array2<f64>,
) -> Result<Vec<f64>, LabelError> {
    let fn_ = f.dot(&f).sqrt();
    if fn_.is_nan() || fn_ <= 0.0 {
        return Err(LabelError::ZeroVector);
    }
    Ok(c
        .rows()
        .into_iter()
        .map(|row| {
            let rn = row.dot(&row).sqrt();
            if rn == 0.0 {
                0.0
            } else {
                row.dot(&f) / (rn * fn_)
            }
        })
        .collect())
}

pub fn write_factor_model<W: Write>(w: W, model: &FactorModel) -> Result<(), LabelError> {
    let mut w = Writer::new(w);
    let (n, d) = model.label_factors.dim();
    w.bytes(MAGIC).map_err(codec::CodecError::from)?;
    w.u32(codec::dim(n)?).map_err(codec::CodecError::from)?;
    w.u32(codec::dim(d)?).map_err(codec::CodecError::from)?;
    w.f64s(model.label_factors.iter().copied())
        .map_err(codec::CodecError::from)?;
    w.f64s(model.singular_values.iter().copied())
        .map_err(codec::CodecError::from)?;
    Ok(())
}

pub fn read_factor_model<R: Read>(r: R) -> Result<FactorModel, LabelError> {
    let mut r = Reader::new(r);
    r.magic(MAGIC)?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let data = r.f64_vec(n * d)?;
    let singular_values = r.f64_vec(d)?;
    r.finish()?;
    let label_factors = Array2::from_shape_vec((n, d), data)
        .map_err(|e| codec::CodecError::Malformed(e.to_string()))?;
    Ok(FactorModel {
        label_factors,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ppmi(values: Array2<f64>) -> PpmiMatrix {
        let n = values.nrows();
        PpmiMatrix {
            values,
            supports: vec![1; n],
        }
    }

    #[test]
    fn identity_factors_are_orthonormal() {
        let f = factorize(&ppmi(Array2::eye(2)), 2).unwrap();
        assert_eq!(f.singular_values, vec![1.0, 1.0]);
        let g = f.label_factors.dot(&f.label_factors.t());
        assert!((g - Array2::<f64>::eye(2)).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn diagonal_rank_one() {
        let f = factorize(&ppmi(array![[4.0, 0.0], [0.0, 1.0]]), 1).unwrap();
        assert_eq!(f.singular_values, vec![4.0]);
        assert_eq!(f.label_factors, array![[2.0], [0.0]]);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            factorize(&ppmi(Array2::eye(2)), 3),
            Err(LabelError::DimensionTooLarge { d: 3, n: 2 })
        ));
        assert!(matches!(factorize(&ppmi(Array2::eye(2)), 0), Err(LabelError::ZeroDimension)));
    }

    #[test]
    fn item_factor_examples() {
        let c = array![[1.0, 0.0], [0.0, 1.0], [3.0, 4.0]];
        let m = ItemLabelMatrix::new(3, vec![vec![2], vec![0, 1]]).unwrap();
        let f = item_factors(&c, &m).unwrap();
        assert!((f[[0, 0]] - 0.6).abs() < 1e-15 && (f[[0, 1]] - 0.8).abs() < 1e-15);
        let h = 1.0 / 2f64.sqrt();
        assert!((f[[1, 0]] - h).abs() < 1e-15 && (f[[1, 1]] - h).abs() < 1e-15);

        let c = array![[1.0, 0.0], [-1.0, 0.0]];
        let m = ItemLabelMatrix::new(2, vec![vec![0, 1]]).unwrap();
        assert!(matches!(item_factors(&c, &m), Err(LabelError::ZeroFactorItem(0))));
    }

    #[test]
    fn label_score_examples() {
        let c = array![[1.0, 2.0], [-2.0, 1.0], [0.0, 0.0]];
        let s = label_scores_from_factor(c.row(0), &c).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!(s[1].abs() < 1e-15);
        assert_eq!(s[2], 0.0);
        assert!(matches!(
            label_scores_from_factor(c.row(2), &c),
            Err(LabelError::ZeroVector)
        ));
    }

    #[test]
    fn factor_file_round_trip_and_bad_magic() {
        let model = FactorModel {
            label_factors: array![[1.5, -2.0], [0.25, 3.0], [7.0, 1e-300]],
            singular_values: vec![9.0, 0.5],
        };
        let mut buf = Vec::new();
        write_factor_model(&mut buf, &model).unwrap();
        assert_eq!(&buf[..4], b"MUF1");
        assert_eq!(buf.len(), 4 + 8 + 6 * 8 + 2 * 8);
        assert_eq!(read_factor_model(buf.as_slice()).unwrap(), model);
        buf[0] = b'X';
        assert!(read_factor_model(buf.as_slice()).is_err());
    }
}
