use std::hash::{DefaultHasher, Hash, Hasher};

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{self, ConvGeom};
use super::loss::{self, BCE_EPS};
use super::{Head, LayerSpec, Mode, NnError, Shape};
use crate::par::Exec;

/// Weight matrix `out x fan_in` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Affine {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Layered network description together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    input: Shape,
    specs: Vec<LayerSpec>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the
    /// feature shape fed to the head.
    shapes: Vec<Shape>,
    params: Vec<Option<Affine>>,
    head: Head,
    head_params: Affine,
    seed: u64,
    exec: Exec,
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform_init(rng: &mut ChaCha8Rng, out: usize, fan_in: usize, bound: f64) -> Affine {
    Affine {
        w: Array2::from_shape_simple_fn((out, fan_in), || rng.random_range(-bound..bound)),
        b: Array1::zeros(out),
    }
}

fn infer_shapes(input: Shape, specs: &[LayerSpec], head: Head) -> Result<Vec<Shape>, NnError> {
    if input.is_empty() {
        return Err(NnError::InvalidLayer("empty input shape".into()));
    }
    if head.dim() == 0 {
        return Err(NnError::InvalidLayer("head dimension must be >= 1".into()));
    }
    let mut shapes = vec![input];
    for s in specs {
        let next = s.output_shape(*shapes.last().unwrap())?;
        shapes.push(next);
    }
    if !shapes.last().unwrap().is_flat() {
        return Err(NnError::ShapeMismatch(
            "head expects a flat feature vector; insert flatten".into(),
        ));
    }
    Ok(shapes)
}

impl ModelGraph {
    /// Builds and initializes a model: He-uniform for layers feeding a ReLU,
    /// Xavier-uniform elsewhere and for the head; zero biases.
    pub fn new(input: Shape, specs: Vec<LayerSpec>, head: Head, seed: u64) -> Result<Self, NnError> {
        let shapes = infer_shapes(input, &specs, head)?;
        let mut params = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64 + 1));
            let feeds_relu = matches!(specs.get(i + 1), Some(LayerSpec::Relu));
            let p = match *spec {
                LayerSpec::Dense { out } => {
                    let fan_in = shapes[i].len();
                    let bound = if feeds_relu {
                        (6.0 / fan_in as f64).sqrt()
                    } else {
                        (6.0 / (fan_in + out) as f64).sqrt()
                    };
                    Some(uniform_init(&mut rng, out, fan_in, bound))
                }
                LayerSpec::Conv2d { filters, kh, kw } => {
                    let fan_in = shapes[i].c * kh * kw;
                    let bound = if feeds_relu {
                        (6.0 / fan_in as f64).sqrt()
                    } else {
                        (6.0 / (fan_in + filters * kh * kw) as f64).sqrt()
                    };
                    Some(uniform_init(&mut rng, filters, fan_in, bound))
                }
                _ => None,
            };
            params.push(p);
        }
        let fan_in = shapes.last().unwrap().len();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
        let bound = (6.0 / (fan_in + head.dim()) as f64).sqrt();
        let head_params = uniform_init(&mut rng, head.dim(), fan_in, bound);
        Ok(Self {
            input,
            specs,
            shapes,
            params,
            head,
            head_params,
            seed,
            exec: Exec::default(),
        })
    }

    /// Parameter count without allocating the model.
    pub fn count_params(input: Shape, specs: &[LayerSpec], head: Head) -> Result<usize, NnError> {
        let shapes = infer_shapes(input, specs, head)?;
        let layers: usize = specs
            .iter()
            .zip(&shapes)
            .map(|(s, &shape)| s.param_count(shape))
            .sum();
        Ok(layers + head.dim() * shapes.last().unwrap().len() + head.dim())
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Input shape of every layer followed by the feature shape.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Dimension of the penultimate activation (the head's input).
    pub fn feature_dim(&self) -> usize {
        self.shapes.last().unwrap().len()
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Named parameter blocks in a fixed order: each trainable layer's
    /// weight then bias, then the head's.
    pub fn param_blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            if let Some(a) = p {
                let name = self.specs[i].name();
                out.push((format!("{i}:{name}.weight"), a.w.as_slice().unwrap()));
                out.push((format!("{i}:{name}.bias"), a.b.as_slice().unwrap()));
            }
        }
        out.push(("head.weight".into(), self.head_params.w.as_slice().unwrap()));
        out.push(("head.bias".into(), self.head_params.b.as_slice().unwrap()));
        out
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for a in self.params.iter_mut().flatten() {
            out.push(a.w.as_slice_mut().unwrap());
            out.push(a.b.as_slice_mut().unwrap());
        }
        out.push(self.head_params.w.as_slice_mut().unwrap());
        out.push(self.head_params.b.as_slice_mut().unwrap());
        out
    }

    /// Replaces all parameters with `blocks` (same order and lengths as
    /// [`param_blocks`](Self::param_blocks)).
    pub fn set_params(&mut self, blocks: &[Vec<f64>]) -> Result<(), NnError> {
        let mut dst = self.param_blocks_mut();
        if dst.len() != blocks.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} parameter blocks, got {}",
                dst.len(),
                blocks.len()
            )));
        }
        for (d, s) in dst.iter_mut().zip(blocks) {
            if d.len() != s.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "parameter block of length {}, got {}",
                    d.len(),
                    s.len()
                )));
            }
            d.copy_from_slice(s);
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.param_blocks().into_iter().map(|(_, b)| b.to_vec()).collect()
    }

    pub fn forward(&self, x: &Array2<f64>, mode: Mode) -> Result<Forward, NnError> {
        if x.ncols() != self.input.len() {
            return Err(NnError::ShapeMismatch(format!(
                "batch rows have {} values, model input {} needs {}",
                x.ncols(),
                self.input,
                self.input.len()
            )));
        }
        let exec = self.exec;
        let batch = x.nrows();
        let mut acts = Vec::with_capacity(self.specs.len() + 1);
        let mut caches = Vec::with_capacity(self.specs.len());
        acts.push(x.as_standard_layout().into_owned());
        for (i, spec) in self.specs.iter().enumerate() {
            let cur = acts.last().unwrap();
            let in_shape = self.shapes[i];
            let (next, cache) = match *spec {
                LayerSpec::Dense { .. } => {
                    let a = self.params[i].as_ref().unwrap();
                    (cur.dot(&a.w.t()) + &a.b, Cache::None)
                }
                LayerSpec::Conv2d { kh, kw, .. } => {
                    let a = self.params[i].as_ref().unwrap();
                    let g = ConvGeom { input: in_shape, kh, kw, batch };
                    let (y, cols) = kernels::conv_forward(exec, cur, &a.w, &a.b, &g);
                    (y, Cache::Cols(cols))
                }
                LayerSpec::MaxPool { ph, pw } => {
                    let (y, arg) = kernels::maxpool_forward(exec, cur, in_shape, ph, pw);
                    (y, Cache::Argmax(arg))
                }
                LayerSpec::Relu => (cur.mapv(|v| v.max(0.0)), Cache::None),
                LayerSpec::Sigmoid => (cur.mapv(sigmoid), Cache::None),
                LayerSpec::Dropout { rate } => match mode {
                    Mode::Train { seed } if rate > 0.0 => {
                        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64 + 1));
                        let keep = 1.0 / (1.0 - rate);
                        let mask = Array2::from_shape_simple_fn(cur.dim(), || {
                            if rng.random::<f64>() < rate {
                                0.0
                            } else {
                                keep
                            }
                        });
                        (cur * &mask, Cache::Mask(mask))
                    }
                    _ => (cur.clone(), Cache::None),
                },
                LayerSpec::Flatten => (cur.clone(), Cache::None),
            };
            if !next.iter().all(|v| v.is_finite()) {
                return Err(NnError::NonFinite {
                    layer: format!("{i}:{}", spec.name()),
                });
            }
            acts.push(next);
            caches.push(cache);
        }
        let feats = acts.last().unwrap();
        let z = feats.dot(&self.head_params.w.t()) + &self.head_params.b;
        let output = match self.head {
            Head::Logistic(_) => z.mapv(sigmoid),
            Head::Cosine(_) => z,
        };
        if !output.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite { layer: "head".into() });
        }
        Ok(Forward {
            acts,
            caches,
            output,
        })
    }

    /// Eval-mode head outputs.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        Ok(self.forward(x, Mode::Eval)?.output)
    }

    /// Eval-mode penultimate activations.
    pub fn features(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let mut f = self.forward(x, Mode::Eval)?;
        Ok(f.acts.pop().unwrap())
    }

    /// Loss of the model's head on a completed forward pass.
    pub fn loss(&self, fwd: &Forward, targets: &Array2<f64>) -> Result<f64, NnError> {
        match self.head {
            Head::Logistic(_) => loss::loss_logistic(&fwd.output, targets),
            Head::Cosine(_) => loss::loss_cosine(&fwd.output, targets),
        }
    }

    /// Analytic gradients of the head loss for every parameter block.
    pub fn backward(&self, fwd: &Forward, targets: &Array2<f64>) -> Result<Grads, NnError> {
        if fwd.output.dim() != targets.dim() {
            return Err(NnError::ShapeMismatch(format!(
                "outputs {:?} vs targets {:?}",
                fwd.output.dim(),
                targets.dim()
            )));
        }
        let exec = self.exec;
        let batch = fwd.output.nrows();
        let dz = match self.head {
            Head::Logistic(_) => loss::logistic_logit_grad(&fwd.output, targets),
            Head::Cosine(_) => loss::cosine_grad(&fwd.output, targets)?,
        };
        let feats = fwd.acts.last().unwrap();
        let head_dw = dz.t().dot(feats);
        let head_db = dz.sum_axis(Axis(0));
        let mut d = dz.dot(&self.head_params.w);

        let mut layer_grads: Vec<Option<(Array2<f64>, Array1<f64>)>> = vec![None; self.specs.len()];
        for i in (0..self.specs.len()).rev() {
            let need_dx = i > 0;
            match (&self.specs[i], &fwd.caches[i]) {
                (LayerSpec::Dense { .. }, _) => {
                    let a = self.params[i].as_ref().unwrap();
                    let dw = d.t().dot(&fwd.acts[i]);
                    let db = d.sum_axis(Axis(0));
                    if need_dx {
                        d = d.dot(&a.w);
                    }
                    layer_grads[i] = Some((dw, db));
                }
                (LayerSpec::Conv2d { kh, kw, .. }, Cache::Cols(cols)) => {
                    let a = self.params[i].as_ref().unwrap();
                    let g = ConvGeom {
                        input: self.shapes[i],
                        kh: *kh,
                        kw: *kw,
                        batch,
                    };
                    let cg = kernels::conv_backward(exec, &d, cols, &a.w, &g, need_dx);
                    if let Some(dx) = cg.dx {
                        d = dx;
                    }
                    layer_grads[i] = Some((cg.dw, cg.db));
                }
                (LayerSpec::MaxPool { .. }, Cache::Argmax(arg)) => {
                    if need_dx {
                        d = kernels::maxpool_backward(exec, &d, arg, self.shapes[i]);
                    }
                }
                (LayerSpec::Relu, _) => {
                    Zip::from(&mut d).and(&fwd.acts[i + 1]).for_each(|g, &y| {
                        if y <= 0.0 {
                            *g = 0.0;
                        }
                    });
                }
                (LayerSpec::Sigmoid, _) => {
                    Zip::from(&mut d)
                        .and(&fwd.acts[i + 1])
                        .for_each(|g, &s| *g *= s * (1.0 - s));
                }
                (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => d *= mask,
                (LayerSpec::Dropout { .. }, _) | (LayerSpec::Flatten, _) => {}
                (spec, _) => {
                    return Err(NnError::InvalidLayer(format!(
                        "missing forward cache for {}",
                        spec.name()
                    )))
                }
            }
        }
        let mut blocks = Vec::new();
        for (dw, db) in layer_grads.into_iter().flatten() {
            blocks.push(dw.iter().copied().collect());
            blocks.push(db.to_vec());
        }
        blocks.push(head_dw.iter().copied().collect());
        blocks.push(head_db.to_vec());
        Ok(Grads { blocks })
    }

    /// Forward in `mode`, then loss and gradients.
    pub fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        targets: &Array2<f64>,
        mode: Mode,
    ) -> Result<(f64, Grads), NnError> {
        let fwd = self.forward(x, mode)?;
        let loss = self.loss(&fwd, targets)?;
        let grads = self.backward(&fwd, targets)?;
        Ok((loss, grads))
    }

    pub(crate) fn from_parts(
        input: Shape,
        specs: Vec<LayerSpec>,
        head: Head,
        seed: u64,
        blocks: &[Vec<f64>],
    ) -> Result<Self, NnError> {
        let mut m = Self::new(input, specs, head, seed)?;
        m.set_params(blocks)?;
        Ok(m)
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Cache {
    None,
    Cols(Array2<f64>),
    Argmax(Vec<u32>),
    Mask(Array2<f64>),
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Array2<f64>>,
    caches: Vec<Cache>,
    pub output: Array2<f64>,
}

impl Forward {
    /// Penultimate activations (input to the head).
    pub fn features(&self) -> &Array2<f64> {
        self.acts.last().unwrap()
    }

    pub fn activation(&self, i: usize) -> &Array2<f64> {
        &self.acts[i]
    }

    /// Hash of every piecewise-linear branch taken: ReLU on/off, pooling
    /// argmax and BCE clamp activity. Two passes with equal signatures lie
    /// on the same smooth piece of the loss.
    pub(crate) fn branch_signature(&self, specs: &[LayerSpec], logistic: bool) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, spec) in specs.iter().enumerate() {
            match (spec, &self.caches[i]) {
                (LayerSpec::Relu, _) => {
                    for &v in self.acts[i + 1].iter() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                (_, Cache::Argmax(a)) => a.hash(&mut h),
                _ => {}
            }
        }
        if logistic {
            for &p in self.output.iter() {
                (p > BCE_EPS && p < 1.0 - BCE_EPS).hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Gradient blocks, aligned with [`ModelGraph::param_blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub blocks: Vec<Vec<f64>>,
}
