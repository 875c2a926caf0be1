//! One-sided (Hestenes) Jacobi SVD for small dense matrices.

use ndarray::{Array1, Array2};

/// `a = u * diag(s) * v^T` with singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.s.view().insert_axis(ndarray::Axis(0));
        us.dot(&self.v.t())
    }
}

const MAX_SWEEPS: usize = 80;

/// Thin SVD of an `m x n` matrix. Left singular vectors whose singular value
/// is numerically zero are completed to an orthonormal set.
pub fn svd_jacobi(a: &Array2<f64>) -> Svd {
    let (m, n) = a.dim();
    if m < n {
        let t = svd_jacobi(&a.t().to_owned());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }

    // Column-major working copies.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * m as f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut a2 = 0.0;
                    let mut b2 = 0.0;
                    let mut g = 0.0;
                    for k in 0..m {
                        a2 += cp[k] * cp[k];
                        b2 += cq[k] * cq[k];
                        g += cp[k] * cq[k];
                    }
                    (a2, b2, g)
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let rank_tol = smax * 1e-12;
    let mut u = Array2::zeros((m, n));
    let mut v = Array2::zeros((n, n));
    let mut s = Array1::zeros(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (out, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        let col = if sigma > rank_tol && sigma > 0.0 {
            s[out] = sigma;
            let mut c: Vec<f64> = cols[j].iter().map(|x| x / sigma).collect();
            orthonormalize_against(&mut c, &basis);
            c
        } else {
            s[out] = 0.0;
            complete_basis(m, &basis)
        };
        for k in 0..m {
            u[[k, out]] = col[k];
        }
        for k in 0..n {
            v[[k, out]] = vcols[j][k];
        }
        basis.push(col);
    }
    Svd { u, s, v }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Modified Gram-Schmidt step; keeps `c` unit length.
fn orthonormalize_against(c: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let d: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in c.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
    let nrm = norm(c);
    if nrm > 0.0 {
        c.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// A unit vector orthogonal to `basis`, built from the standard basis.
fn complete_basis(m: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let d: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in e.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let nrm = norm(&e);
        if nrm > best_norm {
            best_norm = nrm;
            best = Some(e);
        }
        if nrm > 0.5 {
            break;
        }
    }
    let mut e = best.unwrap_or_else(|| vec![0.0; m]);
    if best_norm > 0.0 {
        e.iter_mut().for_each(|x| *x /= best_norm);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn diagonal_and_identity() {
        let svd = svd_jacobi(&array![[1.0, 0.0], [0.0, 4.0]]);
        assert_eq!(svd.s.to_vec(), vec![4.0, 1.0]);
        let svd = svd_jacobi(&Array2::eye(2));
        assert_eq!(svd.s.to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn rank_deficient_completes_basis() {
        let a = array![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        let svd = svd_jacobi(&a);
        assert!((svd.s[0] - 2.0).abs() < 1e-12);
        assert_eq!(svd.s[1], 0.0);
        let gram = svd.u.t().dot(&svd.u) - Array2::<f64>::eye(3);
        assert!(max_abs(&gram) < 1e-12);
        assert!(max_abs(&(svd.reconstruct() - &a)) < 1e-12);
    }

    #[test]
    fn rectangular_both_orientations() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        for m in [a.clone(), a.t().to_owned()] {
            let svd = svd_jacobi(&m);
            assert!(max_abs(&(svd.reconstruct() - &m)) < 1e-12);
            assert!(svd.s[0] >= svd.s[1]);
        }
    }
}
