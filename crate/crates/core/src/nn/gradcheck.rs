//! Central finite-difference verification of the analytic gradients.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Head, Mode, ModelGraph, NnError};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates sampled per parameter block; smaller blocks are checked
    /// exhaustively.
    pub coords_per_block: usize,
    pub seed: u64,
    /// Train mode freezes the dropout masks through the seed.
    pub mode: Mode,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            tolerance: 1e-4,
            coords_per_block: 12,
            seed: 0,
            mode: Mode::Eval,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    /// Coordinates whose perturbation switched a ReLU, pooling argmax or
    /// clamp branch; finite differences are meaningless there.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&BlockReport> {
        self.blocks.iter().filter(|b| !b.pass).collect()
    }
}

pub fn grad_check(
    model: &ModelGraph,
    x: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let logistic = matches!(model.head(), Head::Logistic(_));
    let base = model.forward(x, cfg.mode)?;
    let base_sig = base.branch_signature(model.specs(), logistic);
    let analytic = model.backward(&base, targets)?;

    let names: Vec<String> = model.param_blocks().into_iter().map(|(n, _)| n).collect();
    let mut probe = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut blocks = Vec::with_capacity(names.len());

    let eval = |probe: &ModelGraph| -> Result<(f64, u64), NnError> {
        let f = probe.forward(x, cfg.mode)?;
        Ok((probe.loss(&f, targets)?, f.branch_signature(probe.specs(), logistic)))
    };

    for (bi, name) in names.into_iter().enumerate() {
        let len = analytic.blocks[bi].len();
        let coords: Vec<usize> = if len <= cfg.coords_per_block {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, cfg.coords_per_block).into_vec()
        };
        let mut report = BlockReport {
            name,
            checked: 0,
            skipped_kinks: 0,
            max_rel_error: 0.0,
            pass: false,
        };
        for k in coords {
            let orig = probe.param_blocks_mut()[bi][k];
            probe.param_blocks_mut()[bi][k] = orig + cfg.step;
            let (lp, sp) = eval(&probe)?;
            probe.param_blocks_mut()[bi][k] = orig - cfg.step;
            let (lm, sm) = eval(&probe)?;
            probe.param_blocks_mut()[bi][k] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * cfg.step);
            let a = analytic.blocks[bi][k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
        report.pass = report.checked > 0 && report.max_rel_error < cfg.tolerance;
        blocks.push(report);
    }
    let pass = blocks.iter().all(|b| b.pass);
    Ok(GradCheckReport { blocks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Shape};

    #[test]
    fn linear_logistic_model_is_exact() {
        let m = ModelGraph::new(Shape::flat(5), vec![], Head::Logistic(3), 2).unwrap();
        let x = Array2::from_shape_fn((4, 5), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin());
        let y = Array2::from_shape_fn((4, 3), |(i, j)| ((i + 2 * j) % 2) as f64);
        // no hidden nonlinearity: only the central-difference truncation
        // error of the sigmoid/BCE head remains, which vanishes as step^2
        let cfg = GradCheckConfig { step: 1e-5, tolerance: 1e-8, ..Default::default() };
        let r = grad_check(&m, &x, &y, &cfg).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn dropout_checked_with_frozen_mask() {
        let m = ModelGraph::new(
            Shape::flat(6),
            vec![LayerSpec::Dense { out: 5 }, LayerSpec::Dropout { rate: 0.5 }],
            Head::Cosine(3),
            3,
        )
        .unwrap();
        let x = Array2::from_shape_fn((3, 6), |(i, j)| ((i * 6 + j) as f64 * 0.91).cos());
        let y = Array2::from_shape_fn((3, 3), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let cfg = GradCheckConfig { mode: Mode::Train { seed: 11 }, ..Default::default() };
        let r = grad_check(&m, &x, &y, &cfg).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
