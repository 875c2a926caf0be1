//! Batched convolution (im2col + GEMM) and max-pool kernels.

use ndarray::{Array1, Array2, Axis};

use super::Shape;
use crate::par::{self, Exec};

pub(crate) struct ConvGeom {
    pub input: Shape,
    pub kh: usize,
    pub kw: usize,
    pub batch: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        self.input.h - self.kh + 1
    }

    pub fn out_w(&self) -> usize {
        self.input.w - self.kw + 1
    }

    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn patch_len(&self) -> usize {
        self.input.c * self.kh * self.kw
    }
}

/// `(c*kh*kw) x (batch*positions)` patch matrix; column `b*P + y*ow + x`
/// holds the receptive field of output pixel `(y, x)` of sample `b`.
pub(crate) fn im2col(exec: Exec, x: &Array2<f64>, g: &ConvGeom) -> Array2<f64> {
    let (oh, ow, p) = (g.out_h(), g.out_w(), g.positions());
    let bp = g.batch * p;
    let Shape { h, w, .. } = g.input;
    let src = x.as_slice().expect("standard layout activations");
    let sample_len = g.input.len();
    let mut cols = vec![0.0; g.patch_len() * bp];
    par::for_each_chunk_mut(exec, &mut cols, bp, |k, row| {
        let c = k / (g.kh * g.kw);
        let i = (k / g.kw) % g.kh;
        let j = k % g.kw;
        for b in 0..g.batch {
            let base = b * sample_len + c * h * w;
            for y in 0..oh {
                let s = base + (y + i) * w + j;
                let d = b * p + y * ow;
                row[d..d + ow].copy_from_slice(&src[s..s + ow]);
            }
        }
    });
    Array2::from_shape_vec((g.patch_len(), bp), cols).expect("im2col shape")
}

/// Returns the conv output as `batch x (filters*positions)` and the patch
/// matrix for reuse in the backward pass.
pub(crate) fn conv_forward(
    exec: Exec,
    x: &Array2<f64>,
    w: &Array2<f64>,
    b: &Array1<f64>,
    g: &ConvGeom,
) -> (Array2<f64>, Array2<f64>) {
    let cols = im2col(exec, x, g);
    let y = w.dot(&cols);
    let filters = w.nrows();
    let p = g.positions();
    let mut out = vec![0.0; g.batch * filters * p];
    let y_s = y.as_slice().expect("gemm output is contiguous");
    let bp = g.batch * p;
    par::for_each_chunk_mut(exec, &mut out, filters * p, |bi, dst| {
        for f in 0..filters {
            let src = &y_s[f * bp + bi * p..f * bp + (bi + 1) * p];
            let bias = b[f];
            for (d, s) in dst[f * p..(f + 1) * p].iter_mut().zip(src) {
                *d = s + bias;
            }
        }
    });
    (
        Array2::from_shape_vec((g.batch, filters * p), out).expect("conv output shape"),
        cols,
    )
}

pub(crate) struct ConvGrads {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
    pub dx: Option<Array2<f64>>,
}

pub(crate) fn conv_backward(
    exec: Exec,
    d_out: &Array2<f64>,
    cols: &Array2<f64>,
    w: &Array2<f64>,
    g: &ConvGeom,
    need_dx: bool,
) -> ConvGrads {
    let filters = w.nrows();
    let p = g.positions();
    let bp = g.batch * p;
    let src = d_out.as_slice().expect("standard layout gradient");
    let mut dy = vec![0.0; filters * bp];
    par::for_each_chunk_mut(exec, &mut dy, bp, |f, row| {
        for bi in 0..g.batch {
            let s = bi * filters * p + f * p;
            row[bi * p..(bi + 1) * p].copy_from_slice(&src[s..s + p]);
        }
    });
    let dy = Array2::from_shape_vec((filters, bp), dy).expect("dy shape");
    let dw = dy.dot(&cols.t());
    let db = dy.sum_axis(Axis(1));
    let dx = need_dx.then(|| {
        let dcols = w.t().dot(&dy);
        col2im(exec, &dcols, g)
    });
    ConvGrads { dw, db, dx }
}

fn col2im(exec: Exec, dcols: &Array2<f64>, g: &ConvGeom) -> Array2<f64> {
    let (oh, ow, p) = (g.out_h(), g.out_w(), g.positions());
    let bp = g.batch * p;
    let Shape { h, w, .. } = g.input;
    let sample_len = g.input.len();
    let dc = dcols.as_slice().expect("gemm output is contiguous");
    let mut dx = vec![0.0; g.batch * sample_len];
    par::for_each_chunk_mut(exec, &mut dx, sample_len, |bi, dst| {
        for k in 0..g.patch_len() {
            let c = k / (g.kh * g.kw);
            let i = (k / g.kw) % g.kh;
            let j = k % g.kw;
            let row = &dc[k * bp + bi * p..k * bp + (bi + 1) * p];
            for y in 0..oh {
                let d = c * h * w + (y + i) * w + j;
                for (t, v) in dst[d..d + ow].iter_mut().zip(&row[y * ow..(y + 1) * ow]) {
                    *t += v;
                }
            }
        }
    });
    Array2::from_shape_vec((g.batch, sample_len), dx).expect("col2im shape")
}

/// Non-overlapping max-pool. Returns the pooled batch and, per output
/// element, the flat in-sample index of the selected input (first maximum).
pub(crate) fn maxpool_forward(
    exec: Exec,
    x: &Array2<f64>,
    input: Shape,
    ph: usize,
    pw: usize,
) -> (Array2<f64>, Vec<u32>) {
    let (oh, ow) = (input.h / ph, input.w / pw);
    let out_len = input.c * oh * ow;
    let batch = x.nrows();
    let per_sample = par::map_range(exec, batch, |bi| {
        let s = x.row(bi);
        let s = s.as_slice().expect("standard layout activations");
        let mut vals = Vec::with_capacity(out_len);
        let mut idx = Vec::with_capacity(out_len);
        for c in 0..input.c {
            let base = c * input.h * input.w;
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0usize;
                    for i in 0..ph {
                        for j in 0..pw {
                            let k = base + (y * ph + i) * input.w + xx * pw + j;
                            if s[k] > best {
                                best = s[k];
                                arg = k;
                            }
                        }
                    }
                    vals.push(best);
                    idx.push(arg as u32);
                }
            }
        }
        (vals, idx)
    });
    let mut out = Vec::with_capacity(batch * out_len);
    let mut arg = Vec::with_capacity(batch * out_len);
    for (v, i) in per_sample {
        out.extend(v);
        arg.extend(i);
    }
    (
        Array2::from_shape_vec((batch, out_len), out).expect("pool shape"),
        arg,
    )
}

pub(crate) fn maxpool_backward(
    exec: Exec,
    d_out: &Array2<f64>,
    argmax: &[u32],
    input: Shape,
) -> Array2<f64> {
    let batch = d_out.nrows();
    let out_len = d_out.ncols();
    let sample_len = input.len();
    let mut dx = vec![0.0; batch * sample_len];
    par::for_each_chunk_mut(exec, &mut dx, sample_len, |bi, dst| {
        let g = d_out.row(bi);
        for (o, &k) in argmax[bi * out_len..(bi + 1) * out_len].iter().enumerate() {
            dst[k as usize] += g[o];
        }
    });
    Array2::from_shape_vec((batch, sample_len), dx).expect("pool grad shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution for one sample.
    fn naive_conv(x: &[f64], s: Shape, w: &Array2<f64>, b: &Array1<f64>, kh: usize, kw: usize) -> Vec<f64> {
        let (oh, ow) = (s.h - kh + 1, s.w - kw + 1);
        let mut out = vec![0.0; w.nrows() * oh * ow];
        for f in 0..w.nrows() {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = b[f];
                    for c in 0..s.c {
                        for i in 0..kh {
                            for j in 0..kw {
                                acc += w[[f, (c * kh + i) * kw + j]] * x[c * s.h * s.w + (y + i) * s.w + xx + j];
                            }
                        }
                    }
                    out[f * oh * ow + y * ow + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_nested_loops() {
        let s = Shape::image(2, 5, 6);
        let g = ConvGeom { input: s, kh: 3, kw: 2, batch: 3 };
        let x = Array2::from_shape_fn((3, s.len()), |(b, i)| ((b * 31 + i * 7) % 11) as f64 - 5.0);
        let w = Array2::from_shape_fn((4, g.patch_len()), |(f, k)| ((f * 5 + k * 3) % 7) as f64 * 0.1);
        let bias = Array1::from(vec![0.5, -1.0, 0.0, 2.0]);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let (y, _) = conv_forward(exec, &x, &w, &bias, &g);
            for b in 0..3 {
                let expect = naive_conv(x.row(b).as_slice().unwrap(), s, &w, &bias, 3, 2);
                for (a, e) in y.row(b).iter().zip(&expect) {
                    assert!((a - e).abs() < 1e-12, "{a} vs {e}");
                }
            }
        }
    }

    #[test]
    fn pool_routes_to_argmax_only() {
        let s = Shape::image(1, 4, 4);
        let x = Array2::from_shape_fn((1, 16), |(_, i)| ((i * 7) % 16) as f64);
        let (y, arg) = maxpool_forward(Exec::Sequential, &x, s, 2, 2);
        assert_eq!(y.ncols(), 4);
        let dx = maxpool_backward(Exec::Sequential, &Array2::ones((1, 4)), &arg, s);
        for (i, &v) in dx.row(0).iter().enumerate() {
            assert_eq!(v, if arg.contains(&(i as u32)) { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn pool_routing_exhaustive_4x4() {
        let s = Shape::image(1, 4, 4);
        for peak in 0..16 {
            let x = Array2::from_shape_fn((1, 16), |(_, i)| if i == peak { 10.0 } else { (i % 5) as f64 });
            let (y, arg) = maxpool_forward(Exec::Sequential, &x, s, 2, 2);
            let window = (peak / 4 / 2) * 2 + (peak % 4) / 2;
            assert_eq!(y[[0, window]], 10.0);
            assert_eq!(arg[window] as usize, peak);
            let mut g = Array2::zeros((1, 4));
            g[[0, window]] = 1.0;
            let dx = maxpool_backward(Exec::Parallel, &g, &arg, s);
            for (i, &v) in dx.row(0).iter().enumerate() {
                assert_eq!(v, if i == peak { 1.0 } else { 0.0 });
            }
        }
    }
}
