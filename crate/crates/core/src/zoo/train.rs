use std::io::Write;
use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ZooError;
use crate::nn::{mix_seed, Mode, ModelGraph, NnError, Optimizer, OptimizerConfig};
use crate::par::{self, Exec};

/// A source of training rows. `epoch` lets stochastic sources such as
/// patch sampling vary between epochs.
pub trait Examples: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn batch(&self, idx: &[usize], epoch: usize) -> (Array2<f64>, Array2<f64>);
}

/// Fixed input and target matrices.
#[derive(Debug, Clone)]
pub struct InMemory {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl InMemory {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self, ZooError> {
        if x.nrows() != y.nrows() {
            return Err(ZooError::DimensionMismatch(format!(
                "{} inputs vs {} targets",
                x.nrows(),
                y.nrows()
            )));
        }
        Ok(Self { x, y })
    }
}

impl Examples for InMemory {
    fn len(&self) -> usize {
        self.x.nrows()
    }

    fn batch(&self, idx: &[usize], _epoch: usize) -> (Array2<f64>, Array2<f64>) {
        (self.x.select(Axis(0), idx), self.y.select(Axis(0), idx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 30,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when there is no validation split.
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ModelGraph,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, `None` if no epoch ran.
    pub best_epoch: Option<usize>,
}

impl Trained {
    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.history.is_empty() {
            return 0.0;
        }
        self.history.iter().map(|r| r.seconds).sum::<f64>() / self.history.len() as f64
    }

    pub fn write_history<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.history {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn non_finite(e: NnError, epoch: usize, step: usize) -> ZooError {
    match e {
        NnError::NonFinite { .. } => ZooError::NonFiniteLoss { epoch, step },
        other => ZooError::Nn(other),
    }
}

fn batches(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(size)).map(|b| b * size..((b + 1) * size).min(n)).collect()
}

/// Mean eval-mode loss over all rows of `data`.
fn eval_loss(model: &ModelGraph, data: &dyn Examples, batch: usize) -> Result<f64, NnError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for r in batches(idx.len(), batch) {
        let (x, y) = data.batch(&idx[r.clone()], 0);
        let fwd = model.forward(&x, Mode::Eval)?;
        total += model.loss(&fwd, &y)? * r.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Minibatch training with early stopping on validation loss.
///
/// Rows are reshuffled every epoch. The parameters of the epoch with the
/// lowest validation loss are returned; without a validation split the
/// training loss is used instead.
pub fn train(
    mut model: ModelGraph,
    train_set: &dyn Examples,
    val_set: &dyn Examples,
    cfg: &TrainConfig,
) -> Result<Trained, ZooError> {
    if cfg.batch_size == 0 {
        return Err(ZooError::ConfigInvalid("batch size must be >= 1".into()));
    }
    if train_set.is_empty() && cfg.epochs > 0 {
        return Err(ZooError::ConfigInvalid("empty training split".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64)));
        let mut total = 0.0;
        for r in batches(order.len(), cfg.batch_size) {
            let (x, y) = train_set.batch(&order[r.clone()], epoch);
            let mode = Mode::Train {
                seed: mix_seed(cfg.seed ^ 0x5eed, step as u64),
            };
            let (loss, grads) = model
                .loss_and_grads(&x, &y, mode)
                .map_err(|e| non_finite(e, epoch, step))?;
            if !loss.is_finite() {
                return Err(ZooError::NonFiniteLoss { epoch, step });
            }
            opt.step(&mut model, &grads).map_err(|e| non_finite(e, epoch, step))?;
            total += loss * r.len() as f64;
            step += 1;
        }
        let train_loss = total / order.len() as f64;
        let val_loss = if val_set.is_empty() {
            None
        } else {
            let v = eval_loss(&model, val_set, cfg.batch_size).map_err(|e| non_finite(e, epoch, step))?;
            if !v.is_finite() {
                return Err(ZooError::NonFiniteLoss { epoch, step });
            }
            Some(v)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
        let score = val_loss.unwrap_or(train_loss);
        match &best {
            Some((b, _, _)) if score >= *b => {}
            _ => best = Some((score, epoch, model.snapshot())),
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let best_epoch = match best {
        Some((_, e, params)) => {
            model.set_params(&params)?;
            Some(e)
        }
        None => None,
    };
    Ok(Trained {
        model,
        history,
        best_epoch,
    })
}

#[derive(Debug, Clone)]
pub struct OverfitOutcome {
    pub model: ModelGraph,
    /// Training loss of every full-batch step.
    pub losses: Vec<f64>,
    /// Number of steps taken until the loss fell below the target, if it did.
    pub reached_at: Option<usize>,
}

/// Full-batch training on `(x, y)` until the training loss falls below
/// `target` or `max_steps` steps have run.
pub fn overfit(
    mut model: ModelGraph,
    x: &Array2<f64>,
    y: &Array2<f64>,
    optimizer: OptimizerConfig,
    max_steps: usize,
    target: f64,
    seed: u64,
) -> Result<OverfitOutcome, ZooError> {
    let mut opt = Optimizer::new(optimizer);
    let mut losses = Vec::new();
    let mut reached_at = None;
    for step in 0..max_steps {
        let mode = Mode::Train {
            seed: mix_seed(seed, step as u64),
        };
        let (loss, grads) = model
            .loss_and_grads(x, y, mode)
            .map_err(|e| non_finite(e, 0, step))?;
        if !loss.is_finite() {
            return Err(ZooError::NonFiniteLoss { epoch: 0, step });
        }
        losses.push(loss);
        if loss < target {
            reached_at = Some(step);
            break;
        }
        opt.step(&mut model, &grads).map_err(|e| non_finite(e, 0, step))?;
    }
    Ok(OverfitOutcome {
        model,
        losses,
        reached_at,
    })
}

/// Eval-mode penultimate activations, one row per input row.
pub fn extract_features(
    model: &ModelGraph,
    x: &Array2<f64>,
    batch: usize,
    exec: Exec,
) -> Result<Array2<f64>, ZooError> {
    if x.ncols() != model.input_shape().len() {
        return Err(NnError::ShapeMismatch(format!(
            "input has {} columns, model expects {}",
            x.ncols(),
            model.input_shape().len()
        ))
        .into());
    }
    if x.nrows() == 0 {
        return Ok(Array2::zeros((0, model.feature_dim())));
    }
    let ranges = batches(x.nrows(), batch.max(1));
    let parts = par::map_slice(exec, &ranges, |r| {
        model.features(&x.slice(ndarray::s![r.clone(), ..]).to_owned())
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>, _>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("feature blocks share width"))
}
