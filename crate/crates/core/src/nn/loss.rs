use ndarray::{Array2, Zip};

use super::NnError;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;
/// Rows with a smaller norm are rejected by the cosine loss.
pub const COSINE_EPS: f64 = 1e-12;

pub fn bce_clamp(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<(), NnError> {
    if a.dim() != b.dim() {
        return Err(NnError::ShapeMismatch(format!(
            "outputs {:?} vs targets {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy over batch and labels, on sigmoid outputs.
pub fn loss_logistic(p: &Array2<f64>, y: &Array2<f64>) -> Result<f64, NnError> {
    same_shape(p, y)?;
    let mut acc = 0.0;
    Zip::from(p).and(y).for_each(|&p, &y| {
        let pc = bce_clamp(p);
        acc -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
    });
    Ok(acc / p.len() as f64)
}

/// Gradient of [`loss_logistic`] with respect to the pre-sigmoid logits.
/// Zero where the clamp is active.
pub(crate) fn logistic_logit_grad(p: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let scale = 1.0 / p.len() as f64;
    let mut g = Array2::zeros(p.dim());
    Zip::from(&mut g).and(p).and(y).for_each(|g, &p, &y| {
        *g = if p > BCE_EPS && p < 1.0 - BCE_EPS {
            (p - y) * scale
        } else {
            0.0
        };
    });
    g
}

fn row_norm(r: ndarray::ArrayView1<f64>) -> f64 {
    r.dot(&r).sqrt()
}

/// Mean over the batch of `-cos(output_i, target_i)`.
pub fn loss_cosine(out: &Array2<f64>, targets: &Array2<f64>) -> Result<f64, NnError> {
    same_shape(out, targets)?;
    let mut acc = 0.0;
    for (i, (o, t)) in out.rows().into_iter().zip(targets.rows()).enumerate() {
        let (no, nt) = (row_norm(o), row_norm(t));
        if no < COSINE_EPS {
            return Err(NnError::ZeroVector(i));
        }
        acc -= o.dot(&t) / (no * nt.max(COSINE_EPS));
    }
    Ok(acc / out.nrows() as f64)
}

pub(crate) fn cosine_grad(out: &Array2<f64>, targets: &Array2<f64>) -> Result<Array2<f64>, NnError> {
    let b = out.nrows() as f64;
    let mut g = Array2::zeros(out.dim());
    for (i, ((o, t), mut gi)) in out
        .rows()
        .into_iter()
        .zip(targets.rows())
        .zip(g.rows_mut())
        .enumerate()
    {
        let (no, nt) = (row_norm(o), row_norm(t).max(COSINE_EPS));
        if no < COSINE_EPS {
            return Err(NnError::ZeroVector(i));
        }
        let cos = o.dot(&t) / (no * nt);
        Zip::from(&mut gi).and(o).and(t).for_each(|g, &o, &t| {
            *g = -(t / (no * nt) - cos * o / (no * no)) / b;
        });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn logistic_examples() {
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let l = loss_logistic(&y, &y).unwrap();
        assert!(l < 1e-6 && l > 0.0);
        let half = Array2::from_elem((2, 2), 0.5);
        assert!((loss_logistic(&half, &y).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(loss_logistic(&half, &Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn cosine_examples() {
        let t = array![[0.6, 0.8], [1.0, 0.0]];
        assert!((loss_cosine(&t, &t).unwrap() + 1.0).abs() < 1e-15);
        assert!((loss_cosine(&(&t * 3.5), &t).unwrap() + 1.0).abs() < 1e-15);
        let perp = array![[-0.8, 0.6], [0.0, 2.0]];
        assert!(loss_cosine(&perp, &t).unwrap().abs() < 1e-15);
        assert!(matches!(
            loss_cosine(&array![[0.0, 0.0], [1.0, 0.0]], &t),
            Err(NnError::ZeroVector(0))
        ));
    }

    #[test]
    fn cosine_gradient_is_orthogonal_to_output() {
        let o = array![[0.3, -1.2, 2.0], [5.0, 0.1, 0.1]];
        let t = array![[0.0, 0.6, 0.8], [1.0, 0.0, 0.0]];
        let g = cosine_grad(&o, &t).unwrap();
        for (gi, oi) in g.rows().into_iter().zip(o.rows()) {
            assert!(gi.dot(&oi).abs() < 1e-14);
        }
    }
}
