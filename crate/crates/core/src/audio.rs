//! Precomputed log-CQT spectrograms, fixed-width patch sampling, per-bin
//! standardization and the timbre summary-statistics baseline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{self, CodecError, Reader, Writer};

pub const DEFAULT_BINS: usize = 96;
/// 15 s at 22050 Hz with a 1024-sample hop.
pub const DEFAULT_PATCH_WIDTH: usize = 323;
pub const TIMBRE_COEFFS: usize = 12;
pub const TIMBRE_STATS_DIM: usize = TIMBRE_COEFFS * 4;
const STD_FLOOR: f64 = 1e-6;

const SPEC_MAGIC: &[u8; 4] = b"MUCQ";
const TIMBRE_MAGIC: &[u8; 4] = b"MUTB";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error(transparent)]
    Format(#[from] CodecError),
    #[error("spectrogram must have at least one bin and one frame")]
    EmptySpectrogram,
    #[error("timbre matrix must have {TIMBRE_COEFFS} rows, found {0}")]
    TimbreRows(usize),
    #[error("patch width must be at least 1")]
    ZeroWidth,
    #[error("standardization stats have {stats} bins, patch has {patch}")]
    StatsDimensionMismatch { stats: usize, patch: usize },
    #[error("cannot fit standardization on zero patches")]
    NoPatches,
}

/// Frequency-major log-magnitude matrix, `n_bins x n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f32>,
}

impl Spectrogram {
    pub fn new(values: Array2<f32>) -> Result<Self, AudioError> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(AudioError::EmptySpectrogram);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CodecError::NonFiniteValue(i).into());
        }
        Ok(Self { values })
    }

    pub fn n_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// 12 timbre coefficients over `N` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TimbreMatrix {
    pub values: Array2<f32>,
}

impl TimbreMatrix {
    pub fn new(values: Array2<f32>) -> Result<Self, AudioError> {
        if values.nrows() != TIMBRE_COEFFS {
            return Err(AudioError::TimbreRows(values.nrows()));
        }
        if values.ncols() == 0 {
            return Err(AudioError::EmptySpectrogram);
        }
        Ok(Self { values })
    }
}

fn write_matrix<W: Write>(w: W, magic: &[u8; 4], values: &Array2<f32>) -> Result<(), CodecError> {
    let mut w = Writer::new(w);
    w.bytes(magic)?;
    w.u32(VERSION)?;
    w.u32(codec::dim(values.nrows())?)?;
    w.u32(codec::dim(values.ncols())?)?;
    w.f32s(values.iter().copied())?;
    Ok(())
}

fn read_matrix<R: Read>(r: R, magic: &[u8; 4]) -> Result<Array2<f32>, CodecError> {
    let mut r = Reader::new(r);
    r.magic(magic)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let data = r.f32_vec(rows * cols)?;
    r.finish()?;
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(CodecError::NonFiniteValue(i));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| CodecError::Malformed(e.to_string()))
}

pub fn read_spectrogram<R: Read>(r: R) -> Result<Spectrogram, AudioError> {
    Spectrogram::new(read_matrix(r, SPEC_MAGIC)?)
}

pub fn write_spectrogram<W: Write>(w: W, s: &Spectrogram) -> Result<(), AudioError> {
    Ok(write_matrix(w, SPEC_MAGIC, &s.values)?)
}

pub fn load_spectrogram(path: &Path) -> Result<Spectrogram, AudioError> {
    let f = File::open(path).map_err(CodecError::from)?;
    read_spectrogram(BufReader::new(f))
}

pub fn save_spectrogram(path: &Path, s: &Spectrogram) -> Result<(), AudioError> {
    let f = File::create(path).map_err(CodecError::from)?;
    let mut w = BufWriter::new(f);
    write_spectrogram(&mut w, s)?;
    w.flush().map_err(CodecError::from)?;
    Ok(())
}

pub fn read_timbre<R: Read>(r: R) -> Result<TimbreMatrix, AudioError> {
    TimbreMatrix::new(read_matrix(r, TIMBRE_MAGIC)?)
}

pub fn write_timbre<W: Write>(w: W, t: &TimbreMatrix) -> Result<(), AudioError> {
    Ok(write_matrix(w, TIMBRE_MAGIC, &t.values)?)
}

pub fn load_timbre(path: &Path) -> Result<TimbreMatrix, AudioError> {
    let f = File::open(path).map_err(CodecError::from)?;
    read_timbre(BufReader::new(f))
}

pub fn save_timbre(path: &Path, t: &TimbreMatrix) -> Result<(), AudioError> {
    let f = File::create(path).map_err(CodecError::from)?;
    let mut w = BufWriter::new(f);
    write_timbre(&mut w, t)?;
    w.flush().map_err(CodecError::from)?;
    Ok(())
}

/// Fixed-width window of a spectrogram, `n_bins x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub values: Array2<f64>,
    /// First frame taken from the source spectrogram.
    pub offset: usize,
}

/// Uniform random window of `width` frames. Tracks shorter than `width`
/// are right-padded by repeating their final frame.
pub fn sample_patch(s: &Spectrogram, width: usize, seed: u64) -> Result<Patch, AudioError> {
    if width == 0 {
        return Err(AudioError::ZeroWidth);
    }
    let frames = s.n_frames();
    let offset = if frames > width {
        ChaCha8Rng::seed_from_u64(seed).random_range(0..=frames - width)
    } else {
        0
    };
    let values = Array2::from_shape_fn((s.n_bins(), width), |(b, t)| {
        let src = (offset + t).min(frames - 1);
        s.values[[b, src]] as f64
    });
    Ok(Patch { values, offset })
}

/// Seed for the patch drawn from `track_seed` at `epoch`; epoch 0 keeps the
/// base seed so the fixed-patch mode and the first resampled epoch agree.
pub fn epoch_seed(track_seed: u64, epoch: usize) -> u64 {
    if epoch == 0 {
        return track_seed;
    }
    let mut z = track_seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-frequency-bin mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BinStats {
    /// Welford accumulation over every frame of every patch.
    pub fn fit<'a, I>(patches: I) -> Result<Self, AudioError>
    where
        I: IntoIterator<Item = &'a Array2<f64>>,
    {
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for p in patches {
            if mean.is_empty() {
                mean = vec![0.0; p.nrows()];
                m2 = vec![0.0; p.nrows()];
            } else if p.nrows() != mean.len() {
                return Err(AudioError::StatsDimensionMismatch {
                    stats: mean.len(),
                    patch: p.nrows(),
                });
            }
            for t in 0..p.ncols() {
                count += 1;
                let n = count as f64;
                for b in 0..p.nrows() {
                    let x = p[[b, t]];
                    let delta = x - mean[b];
                    mean[b] += delta / n;
                    m2[b] += delta * (x - mean[b]);
                }
            }
        }
        if count == 0 {
            return Err(AudioError::NoPatches);
        }
        let std = m2.iter().map(|v| (v / count as f64).sqrt()).collect();
        Ok(Self { mean, std })
    }

    fn check(&self, p: &Array2<f64>) -> Result<(), AudioError> {
        if p.nrows() != self.mean.len() {
            return Err(AudioError::StatsDimensionMismatch {
                stats: self.mean.len(),
                patch: p.nrows(),
            });
        }
        Ok(())
    }

    /// `(v - mean) / max(std, 1e-6)` per bin.
    pub fn standardize(&self, p: &Array2<f64>) -> Result<Array2<f64>, AudioError> {
        self.check(p)?;
        let mut out = p.clone();
        for (b, mut row) in out.rows_mut().into_iter().enumerate() {
            let s = self.std[b].max(STD_FLOOR);
            row.mapv_inplace(|v| (v - self.mean[b]) / s);
        }
        Ok(out)
    }

    pub fn inverse(&self, p: &Array2<f64>) -> Result<Array2<f64>, AudioError> {
        self.check(p)?;
        let mut out = p.clone();
        for (b, mut row) in out.rows_mut().into_iter().enumerate() {
            let s = self.std[b].max(STD_FLOOR);
            row.mapv_inplace(|v| v * s + self.mean[b]);
        }
        Ok(out)
    }
}

pub fn standardize(patches: &[Array2<f64>], stats: &BinStats) -> Result<Vec<Array2<f64>>, AudioError> {
    patches.iter().map(|p| stats.standardize(p)).collect()
}

/// Mean, max, population variance and l2-norm of each timbre coefficient,
/// grouped per coefficient: `[mean0, max0, var0, l2_0, mean1, ...]`.
pub fn timbre_stats(t: &TimbreMatrix) -> Array1<f64> {
    let mut out = Array1::zeros(TIMBRE_STATS_DIM);
    let n = t.values.ncols() as f64;
    for (c, row) in t.values.rows().into_iter().enumerate() {
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / n;
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let l2 = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        out[4 * c] = mean;
        out[4 * c + 1] = max;
        out[4 * c + 2] = var;
        out[4 * c + 3] = l2;
    }
    out
}
