use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{write_manifest, Manifest, PipelineError, Record};
use crate::audio::{save_spectrogram, save_timbre, Spectrogram, TimbreMatrix, DEFAULT_BINS, TIMBRE_COEFFS};
use crate::label_space::{parse_taxonomy, LabelTaxonomy};
use crate::nn::mix_seed;
use crate::zoo::{save_feature_vectors, FeatureVectors, Modality};

const TOP_NAMES: [&str; 8] = ["Rock", "Jazz", "Electronic", "Folk", "Blues", "Classical", "Reggae", "Soul"];
const STYLE_NAMES: [&str; 8] = ["Vocal", "Modern", "Acoustic", "Progressive", "Dark", "Latin", "Experimental", "Classic"];

/// Sizes and signal strengths of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_top_genres: usize,
    pub subs_per_genre: usize,
    pub albums: usize,
    pub tracks_per_album: usize,
    pub seed: u64,
    /// Frames per spectrogram.
    pub frames: usize,
    pub timbre_frames: usize,
    pub image_dim: usize,
    pub keywords_per_label: usize,
    pub noise_words: usize,
    /// Probability that a review word is a genre keyword.
    pub text_signal: f64,
    /// Genre template amplitude relative to unit spectrogram noise.
    pub audio_signal: f64,
    /// Genre bias of the timbre random walk relative to unit step noise.
    pub timbre_signal: f64,
    /// Genre centroid scale relative to unit image noise.
    pub image_signal: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_top_genres: 3,
            subs_per_genre: 4,
            albums: 300,
            tracks_per_album: 3,
            seed: 42,
            frames: 64,
            timbre_frames: 64,
            image_dim: 64,
            keywords_per_label: 6,
            noise_words: 400,
            text_signal: 0.07,
            audio_signal: 0.3,
            timbre_signal: 0.05,
            image_signal: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn new(n_top_genres: usize, subs_per_genre: usize, albums: usize, tracks_per_album: usize, seed: u64) -> Self {
        Self {
            n_top_genres,
            subs_per_genre,
            albums,
            tracks_per_album,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let counts = [
            ("n_top_genres", self.n_top_genres),
            ("subs_per_genre", self.subs_per_genre),
            ("albums", self.albums),
            ("tracks_per_album", self.tracks_per_album),
            ("frames", self.frames),
            ("timbre_frames", self.timbre_frames),
            ("image_dim", self.image_dim),
            ("keywords_per_label", self.keywords_per_label),
            ("noise_words", self.noise_words),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(PipelineError::Config(format!("synth {name} must be >= 1")));
        }
        let probs = [self.text_signal, self.audio_signal, self.timbre_signal, self.image_signal];
        if probs.iter().any(|v| !v.is_finite() || *v < 0.0) || self.text_signal > 1.0 {
            return Err(PipelineError::Config("synth signal strengths out of range".into()));
        }
        Ok(())
    }
}

fn top_name(i: usize) -> String {
    TOP_NAMES.get(i).map_or_else(|| format!("Genre {i}"), |s| s.to_string())
}

fn taxonomy(spec: &SynthSpec) -> Result<LabelTaxonomy, PipelineError> {
    let mut paths = Vec::new();
    for g in 0..spec.n_top_genres {
        let top = top_name(g);
        paths.push(top.clone());
        for s in 0..spec.subs_per_genre {
            let style = STYLE_NAMES.get(s).map_or_else(|| format!("Style {s}"), |n| n.to_string());
            paths.push(format!("{top}/{style} {top}"));
        }
    }
    Ok(parse_taxonomy(paths)?)
}

/// Distinct pronounceable pseudo-words.
fn pseudo_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=4);
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct Genres {
    keywords: Vec<Vec<String>>,
    noise: Vec<String>,
    entities: Vec<Vec<String>>,
    /// `n_labels x bins`.
    templates: Array2<f64>,
    periods: Vec<f64>,
    timbre_bias: Array2<f64>,
    centroids: Array2<f64>,
}

fn genres(spec: &SynthSpec, tax: &LabelTaxonomy) -> Genres {
    let n = tax.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0));
    let mut words = pseudo_words(&mut rng, n * spec.keywords_per_label + spec.noise_words);
    let noise = words.split_off(n * spec.keywords_per_label);
    let keywords = words.chunks(spec.keywords_per_label).map(<[String]>::to_vec).collect();
    let entities = tax
        .nodes()
        .iter()
        .map(|node| (1..=3).map(|k| format!("{} artist {k}", node.name)).collect())
        .collect();
    let mut templates = Array2::zeros((n, DEFAULT_BINS));
    for mut row in templates.rows_mut() {
        for _ in 0..2 {
            let centre = rng.random_range(0.0..DEFAULT_BINS as f64);
            let width: f64 = rng.random_range(2.0..6.0);
            for (b, v) in row.iter_mut().enumerate() {
                *v += (-((b as f64 - centre) / width).powi(2) / 2.0).exp();
            }
        }
    }
    let periods = (0..n).map(|_| rng.random_range(4.0..16.0)).collect();
    let timbre_bias = Array2::from_shape_simple_fn((n, TIMBRE_COEFFS), || normal(&mut rng));
    let centroids = Array2::from_shape_simple_fn((n, spec.image_dim), || normal(&mut rng));
    Genres {
        keywords,
        noise,
        entities,
        templates,
        periods,
        timbre_bias,
        centroids,
    }
}

fn review(rng: &mut ChaCha8Rng, spec: &SynthSpec, g: &Genres, labels: &[usize]) -> String {
    let len = rng.random_range(25..=45);
    let mut out = String::new();
    for i in 0..len {
        let word = if rng.random_bool(spec.text_signal) {
            let l = *labels.choose(rng).unwrap();
            g.keywords[l].choose(rng).unwrap()
        } else {
            g.noise.choose(rng).unwrap()
        };
        if i > 0 {
            out.push_str(if i % 9 == 0 { ". " } else { " " });
        }
        out.push_str(word);
    }
    out.push('.');
    out
}

fn spectrogram(rng: &mut ChaCha8Rng, spec: &SynthSpec, g: &Genres, labels: &[usize]) -> Array2<f32> {
    let bins = DEFAULT_BINS;
    let mut v = Array2::from_shape_fn((bins, spec.frames), |(b, _)| -(b as f64) / bins as f64);
    for &l in labels {
        let amp = spec.audio_signal * rng.random_range(0.7..1.3);
        let phase = rng.random_range(0.0..TAU);
        for t in 0..spec.frames {
            let m = amp * (1.0 + 0.5 * (TAU * t as f64 / g.periods[l] + phase).sin());
            for b in 0..bins {
                v[[b, t]] += m * g.templates[[l, b]];
            }
        }
    }
    v.mapv_inplace(|x| x + normal(rng));
    v.mapv(|x| x as f32)
}

fn timbre(rng: &mut ChaCha8Rng, spec: &SynthSpec, g: &Genres, labels: &[usize]) -> Array2<f32> {
    let mut bias = [0.0; TIMBRE_COEFFS];
    for &l in labels {
        for (c, b) in bias.iter_mut().enumerate() {
            *b += spec.timbre_signal * g.timbre_bias[[l, c]];
        }
    }
    let mut out = Array2::zeros((TIMBRE_COEFFS, spec.timbre_frames));
    let mut x = [0.0; TIMBRE_COEFFS];
    for t in 0..spec.timbre_frames {
        for c in 0..TIMBRE_COEFFS {
            x[c] = 0.8 * x[c] + bias[c] + normal(rng);
            out[[c, t]] = x[c] as f32;
        }
    }
    out
}

fn mkdir(p: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(p).map_err(PipelineError::io(p))
}

/// Writes a synthetic multimodal dataset under `out_dir`: `taxonomy.txt`,
/// `manifest.jsonl` and per-album audio, timbre and image files. Output is
/// byte-identical for a fixed spec.
pub fn synth_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest, PipelineError> {
    spec.validate()?;
    let tax = taxonomy(spec)?;
    let g = genres(spec, &tax);
    for sub in ["audio", "timbre", "image"] {
        mkdir(&out_dir.join(sub))?;
    }
    let tax_path = out_dir.join("taxonomy.txt");
    fs::write(&tax_path, tax.to_text()).map_err(PipelineError::io(&tax_path))?;
    let width = spec.albums.to_string().len().max(4);
    let mut records = Vec::with_capacity(spec.albums);
    for a in 0..spec.albums {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 1 + a as u64));
        let id = format!("album{a:0width$}");
        // 3 labels: one genre with two styles; 4: one genre with three;
        // 5: two styles of one genre plus one style of a second genre.
        let closed = rng.random_range(3..=5);
        let mut tops: Vec<usize> = (0..spec.n_top_genres).collect();
        tops.shuffle(&mut rng);
        let plan: Vec<(usize, usize)> = match closed {
            3 => vec![(tops[0], 2)],
            4 => vec![(tops[0], 3)],
            _ if tops.len() > 1 => vec![(tops[0], 2), (tops[1], 1)],
            _ => vec![(tops[0], 4)],
        };
        let mut labels = Vec::new();
        let mut subs = Vec::new();
        for (top, n_subs) in plan {
            let top_id = tax.lookup(&top_name(top))?;
            let mut children: Vec<usize> = tax.children(top_id).map(|n| n.id).collect();
            children.shuffle(&mut rng);
            children.truncate(n_subs);
            labels.push(top_id);
            labels.extend(&children);
            subs.extend(children);
        }
        labels.sort_unstable();
        subs.sort_unstable();

        let n_reviews = rng.random_range(1..=3);
        let reviews = (0..n_reviews).map(|_| review(&mut rng, spec, &g, &labels)).collect();
        let mut enrichment: Vec<String> = Vec::new();
        for &l in &labels {
            enrichment.extend(g.entities[l].iter().filter(|_| rng.random_bool(0.5)).cloned());
        }
        if rng.random_bool(0.3) {
            let l = rng.random_range(0..tax.len());
            enrichment.push(g.entities[l].choose(&mut rng).unwrap().clone());
        }

        let mut tracks = Vec::new();
        let mut timbres = Vec::new();
        for t in 0..spec.tracks_per_album {
            let rel = format!("audio/{id}_{t}.mucq");
            let s = Spectrogram::new(spectrogram(&mut rng, spec, &g, &labels))?;
            save_spectrogram(&out_dir.join(&rel), &s)?;
            tracks.push(rel);
            let rel = format!("timbre/{id}_{t}.mutb");
            save_timbre(&out_dir.join(&rel), &TimbreMatrix::new(timbre(&mut rng, spec, &g, &labels))?)?;
            timbres.push(rel);
        }

        let mut img = Array2::from_shape_simple_fn((1, spec.image_dim), || normal(&mut rng));
        for &l in &labels {
            img.row_mut(0).scaled_add(spec.image_signal, &g.centroids.row(l));
        }
        let rel = format!("image/{id}.fv");
        save_feature_vectors(&out_dir.join(&rel), &FeatureVectors::new(Modality::Image, vec![id.clone()], img)?)?;

        records.push(Record {
            id,
            labels: subs.iter().map(|&s| tax.node(s).path.clone()).collect(),
            tracks,
            reviews,
            enrichment,
            image_vec: Some(rel),
            timbre: timbres,
        });
    }
    let manifest = Manifest {
        base: out_dir.to_path_buf(),
        records,
    };
    write_manifest(&out_dir.join("manifest.jsonl"), &manifest)?;
    Ok(manifest)
}
