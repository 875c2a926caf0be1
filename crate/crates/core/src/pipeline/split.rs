use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;

pub const MIN_SPLIT_ITEMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub tags: Vec<Split>,
}

impl SplitAssignment {
    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i] == which).collect()
    }

    /// Training and validation items, the rows used to fit anything that
    /// must not see the test set.
    pub fn fit_indices(&self) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i] != Split::Test).collect()
    }
}

/// Seeded shuffle, then a contiguous 80/10/10 cut with the validation and
/// test sizes rounded from a tenth of the item count.
pub fn split(n_items: usize, seed: u64) -> Result<SplitAssignment, PipelineError> {
    if n_items < MIN_SPLIT_ITEMS {
        return Err(PipelineError::TooFewItems {
            min: MIN_SPLIT_ITEMS,
            got: n_items,
        });
    }
    let tenth = (n_items as f64 / 10.0).round() as usize;
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tags = vec![Split::Train; n_items];
    for &i in &order[n_items - 2 * tenth..n_items - tenth] {
        tags[i] = Split::Val;
    }
    for &i in &order[n_items - tenth..] {
        tags[i] = Split::Test;
    }
    Ok(SplitAssignment { seed, tags })
}
