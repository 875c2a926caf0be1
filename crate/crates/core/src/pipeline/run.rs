use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::config::Plan;
use super::{
    load_manifest, report_table, split, ExperimentConfig, InStage, Manifest, PipelineError, ReportRow, RowSpec,
    Split, SplitAssignment,
};
use crate::audio::{load_spectrogram, load_timbre, sample_patch, epoch_seed, timbre_stats, BinStats, Spectrogram, TIMBRE_STATS_DIM};
use crate::label_space::{
    compute_ppmi, factorize, item_factors, write_factor_model, FactorModel, ItemLabelMatrix, LabelError,
    LabelTaxonomy,
};
use crate::metrics::{evaluate, scores_from_cosine_head, EvalReport, PredictionMatrix};
use crate::nn::{mix_seed, save_checkpoint, ModelGraph};
use crate::par::Exec;
use super::tools::documents;
use crate::text::{build_vocabulary, tfidf};
use crate::zoo::{
    average_tracks, build_audio_cnn, build_shallow, build_text_mlp, extract_features, fuse, load_feature_vectors,
    save_feature_vectors, train, AudioCnnConfig, Examples, FeatureVectors, HeadKind, InMemory, Modality, TrainConfig,
    Trained, CNN_FEATURE_UNITS, FUSION_COSINE_DROPOUT,
};

const EXTRACT_BATCH: usize = 64;

/// Something fitted from data, with the number of items it saw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRecord {
    pub stage: String,
    pub n_items: usize,
    pub test_items: usize,
}

/// Manifest, labels, split and label factors shared by all rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub taxonomy: LabelTaxonomy,
    pub split: SplitAssignment,
    /// Taxonomy ids of the label columns.
    pub labels: Vec<usize>,
    /// Albums by label columns.
    pub truth: Array2<bool>,
    /// Fitted on training and validation albums only.
    pub factors: Option<FactorModel>,
    /// Cosine targets; zero for test albums and albums without labels.
    pub item_factors: Option<Array2<f64>>,
    pub fit_log: Vec<FitRecord>,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Dataset {
    pub fn load(cfg: &ExperimentConfig, with_factors: bool) -> Result<Self, PipelineError> {
        let manifest = load_manifest(&cfg.manifest).stage("manifest")?;
        let tax_path = cfg.taxonomy_path();
        let tax_text = fs::read_to_string(&tax_path).map_err(PipelineError::io(&tax_path)).stage("taxonomy")?;
        let taxonomy = LabelTaxonomy::from_text(&tax_text).stage("taxonomy")?;
        let sets = manifest.label_sets(&taxonomy).stage("labels")?;
        let split = split(manifest.len(), cfg.seed).stage("split")?;
        Self::assemble(manifest, taxonomy, &sets, split, cfg, with_factors)
    }

    fn assemble(
        manifest: Manifest,
        taxonomy: LabelTaxonomy,
        sets: &[BTreeSet<usize>],
        split: SplitAssignment,
        cfg: &ExperimentConfig,
        with_factors: bool,
    ) -> Result<Self, PipelineError> {
        let fit = split.fit_indices();
        let mut support = vec![0usize; taxonomy.len()];
        for &i in &fit {
            for &l in &sets[i] {
                support[l] += 1;
            }
        }
        let labels: Vec<usize> = (0..taxonomy.len()).filter(|&l| support[l] >= cfg.min_support).collect();
        if labels.is_empty() {
            return Err(LabelError::AllLabelsPruned).stage("labels");
        }
        let truth = Array2::from_shape_fn((manifest.len(), labels.len()), |(i, j)| sets[i].contains(&labels[j]));
        let mut ds = Self {
            manifest,
            taxonomy,
            split,
            labels,
            truth,
            factors: None,
            item_factors: None,
            fit_log: vec![FitRecord {
                stage: "label vocabulary".into(),
                n_items: fit.len(),
                test_items: 0,
            }],
        };
        if with_factors {
            ds.fit_factors(cfg.factor_dim).stage("factorize")?;
        }
        Ok(ds)
    }

    fn label_rows(&self, items: &[usize]) -> Vec<Vec<usize>> {
        items
            .iter()
            .map(|&i| (0..self.labels.len()).filter(|&j| self.truth[[i, j]]).collect())
            .collect()
    }

    fn fit_factors(&mut self, dim: usize) -> Result<(), PipelineError> {
        let items = self.trainable(&self.split.fit_indices());
        let m = ItemLabelMatrix::new(self.labels.len(), self.label_rows(&items))?;
        let ppmi = compute_ppmi(&m)?;
        let model = factorize(&ppmi, dim.min(self.labels.len()))?;
        let targets = item_factors(&model.label_factors, &m)?;
        let mut all = Array2::zeros((self.manifest.len(), model.dim()));
        for (row, &i) in items.iter().enumerate() {
            all.row_mut(i).assign(&targets.row(row));
        }
        self.fit_log.push(FitRecord {
            stage: "label factorization".into(),
            n_items: items.len(),
            test_items: self.count_test(&items),
        });
        self.factors = Some(model);
        self.item_factors = Some(all);
        Ok(())
    }

    fn count_test(&self, items: &[usize]) -> usize {
        items.iter().filter(|&&i| self.split.tags[i] == Split::Test).count()
    }

    /// Albums that carry at least one label column.
    fn trainable(&self, items: &[usize]) -> Vec<usize> {
        items.iter().copied().filter(|&i| self.truth.row(i).iter().any(|&t| t)).collect()
    }

    fn train_items(&self) -> Vec<usize> {
        self.trainable(&self.split.indices(Split::Train))
    }

    fn val_items(&self) -> Vec<usize> {
        self.trainable(&self.split.indices(Split::Val))
    }

    fn targets(&self, head: HeadKind) -> Result<Array2<f64>, PipelineError> {
        match head {
            HeadKind::Logistic => Ok(self.truth.mapv(|t| if t { 1.0 } else { 0.0 })),
            HeadKind::Cosine => self
                .item_factors
                .clone()
                .ok_or_else(|| PipelineError::Config("cosine target needs label factors".into())),
        }
    }

    fn out_dim(&self, head: HeadKind) -> usize {
        match head {
            HeadKind::Logistic => self.labels.len(),
            HeadKind::Cosine => self.factors.as_ref().map_or(0, FactorModel::dim),
        }
    }

    pub fn label_paths(&self) -> Vec<String> {
        self.labels.iter().map(|&l| self.taxonomy.node(l).path.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RowOutcome {
    pub spec: RowSpec,
    pub row: ReportRow,
    pub report: EvalReport,
    /// Macro AUC on the validation albums, used to pick fusion sources.
    pub val_auc: Option<f64>,
    /// Album feature vectors; `None` for fusion rows.
    pub features: Option<FeatureVectors>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<RowOutcome>,
    pub table: String,
    pub fit_log: Vec<FitRecord>,
}

/// Output of a modality pipeline before evaluation.
struct Fitted {
    /// Album-level model producing the row's predictions.
    model: ModelGraph,
    /// Inputs of `model`, one row per album.
    inputs: Array2<f64>,
    params: usize,
    epoch_seconds: f64,
    histories: Vec<(&'static str, Trained)>,
    extra_checkpoints: Vec<(&'static str, ModelGraph)>,
    modality: Option<Modality>,
}

fn json_file<T: Serialize>(path: &Path, v: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    fs::write(path, text + "\n").map_err(PipelineError::io(path))
}

fn write_history(path: &Path, t: &Trained) -> Result<(), PipelineError> {
    let f = File::create(path).map_err(PipelineError::io(path))?;
    let mut w = BufWriter::new(f);
    t.write_history(&mut w).and_then(|_| w.flush()).map_err(PipelineError::io(path))
}

fn in_memory(inputs: &Array2<f64>, targets: &Array2<f64>, idx: &[usize]) -> InMemory {
    InMemory {
        x: inputs.select(Axis(0), idx),
        y: targets.select(Axis(0), idx),
    }
}

fn train_album_model(
    ds: &Dataset,
    model: ModelGraph,
    inputs: &Array2<f64>,
    head: HeadKind,
    cfg: &TrainConfig,
) -> Result<Trained, PipelineError> {
    let targets = ds.targets(head)?;
    let tr = in_memory(inputs, &targets, &ds.train_items());
    let va = in_memory(inputs, &targets, &ds.val_items());
    Ok(train(model, &tr, &va, cfg)?)
}

/// Column-wise z-scores using statistics of the `fit` rows.
fn zscore(x: &Array2<f64>, fit: &[usize]) -> Array2<f64> {
    let sub = x.select(Axis(0), fit);
    let mean = sub.mean_axis(Axis(0)).expect("non-empty fit rows");
    let std = sub.std_axis(Axis(0), 0.0).mapv(|s| s.max(1e-6));
    (x - &mean) / &std
}

fn run_timbre(ds: &mut Dataset, cfg: &ExperimentConfig, head: HeadKind, seed: u64) -> Result<Fitted, PipelineError> {
    let mut raw = Array2::zeros((ds.manifest.len(), TIMBRE_STATS_DIM));
    for (a, rec) in ds.manifest.records.iter().enumerate() {
        if rec.timbre.is_empty() {
            return Err(PipelineError::Data(format!("album {:?} has no timbre files", rec.id)));
        }
        let mut acc = Array1::zeros(TIMBRE_STATS_DIM);
        for p in &rec.timbre {
            acc += &timbre_stats(&load_timbre(&ds.manifest.resolve(p))?);
        }
        raw.row_mut(a).assign(&(acc / rec.timbre.len() as f64));
    }
    let fit = ds.split.fit_indices();
    let inputs = zscore(&raw, &fit);
    ds.fit_log.push(FitRecord {
        stage: "timbre standardization".into(),
        n_items: fit.len(),
        test_items: ds.count_test(&fit),
    });
    let model = build_shallow(TIMBRE_STATS_DIM, ds.out_dim(head), head, 0.0, seed)?;
    let params = model.param_count();
    let t = train_album_model(ds, model, &inputs, head, &cfg.shallow_train)?;
    Ok(Fitted {
        model: t.model.clone(),
        inputs,
        params,
        epoch_seconds: t.mean_epoch_seconds(),
        histories: vec![("history.jsonl", t)],
        extra_checkpoints: Vec::new(),
        modality: Some(Modality::Audio),
    })
}

fn run_image(ds: &Dataset, cfg: &ExperimentConfig, head: HeadKind, seed: u64) -> Result<Fitted, PipelineError> {
    let mut rows: Vec<Array1<f64>> = Vec::with_capacity(ds.manifest.len());
    for rec in &ds.manifest.records {
        let rel = rec
            .image_vec
            .as_ref()
            .ok_or_else(|| PipelineError::Data(format!("album {:?} has no image vector", rec.id)))?;
        let fv = load_feature_vectors(&ds.manifest.resolve(rel), Modality::Image)?;
        let row = fv.ids.iter().position(|id| *id == rec.id).or((fv.ids.len() == 1).then_some(0));
        let row = row.ok_or_else(|| PipelineError::Data(format!("{rel}: no vector for album {:?}", rec.id)))?;
        if let Some(first) = rows.first() {
            if first.len() != fv.dim() {
                return Err(PipelineError::Data(format!("{rel}: image dimension {} differs from {}", fv.dim(), first.len())));
            }
        }
        rows.push(fv.values.row(row).to_owned());
    }
    let dim = rows[0].len();
    let inputs = Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i][j]);
    let model = build_shallow(dim, ds.out_dim(head), head, 0.0, seed)?;
    let params = model.param_count();
    let t = train_album_model(ds, model, &inputs, head, &cfg.shallow_train)?;
    Ok(Fitted {
        model: t.model.clone(),
        inputs,
        params,
        epoch_seconds: t.mean_epoch_seconds(),
        histories: vec![("history.jsonl", t)],
        extra_checkpoints: Vec::new(),
        modality: Some(Modality::Image),
    })
}

fn run_text(
    ds: &mut Dataset,
    cfg: &ExperimentConfig,
    head: HeadKind,
    semantic: bool,
    seed: u64,
) -> Result<Fitted, PipelineError> {
    let docs = documents(&ds.manifest, cfg.text.char_limit, semantic);
    let fit = ds.split.fit_indices();
    let fit_docs: Vec<Vec<String>> = fit.iter().map(|&i| docs[i].clone()).collect();
    let vocab = build_vocabulary(&fit_docs, cfg.text.vocab_size)?;
    ds.fit_log.push(FitRecord {
        stage: format!("text vocabulary ({})", if semantic { "VSM+Sem" } else { "VSM" }),
        n_items: fit.len(),
        test_items: ds.count_test(&fit),
    });
    let inputs = tfidf(&docs, &vocab).to_dense();
    let model = build_text_mlp(vocab.len(), ds.out_dim(head), head, seed)?;
    let params = model.param_count();
    let t = train_album_model(ds, model, &inputs, head, &cfg.train)?;
    Ok(Fitted {
        model: t.model.clone(),
        inputs,
        params,
        epoch_seconds: t.mean_epoch_seconds(),
        histories: vec![("history.jsonl", t)],
        extra_checkpoints: Vec::new(),
        modality: Some(Modality::Text),
    })
}

/// Track-level patches with album targets.
struct TrackSet<'a> {
    spectra: &'a [Spectrogram],
    seeds: &'a [u64],
    tracks: Vec<usize>,
    targets: Array2<f64>,
    stats: &'a BinStats,
    width: usize,
    resample: bool,
}

impl TrackSet<'_> {
    fn patch_row(&self, track: usize, epoch: usize) -> Array1<f64> {
        let e = if self.resample { epoch } else { 0 };
        let p = sample_patch(&self.spectra[track], self.width, epoch_seed(self.seeds[track], e))
            .expect("width checked before training");
        let z = self.stats.standardize(&p.values).expect("bins checked before training");
        Array1::from_iter(z)
    }
}

impl Examples for TrackSet<'_> {
    fn len(&self) -> usize {
        self.tracks.len()
    }

    fn batch(&self, idx: &[usize], epoch: usize) -> (Array2<f64>, Array2<f64>) {
        let cols = self.spectra[0].n_bins() * self.width;
        let mut x = Array2::zeros((idx.len(), cols));
        for (r, &i) in idx.iter().enumerate() {
            x.row_mut(r).assign(&self.patch_row(self.tracks[i], epoch));
        }
        (x, self.targets.select(Axis(0), idx))
    }
}

fn run_audio(
    ds: &mut Dataset,
    cfg: &ExperimentConfig,
    cnn: &AudioCnnConfig,
    seed: u64,
) -> Result<Fitted, PipelineError> {
    let head = cnn.head;
    let mut spectra = Vec::new();
    let mut seeds = Vec::new();
    let mut groups = Vec::with_capacity(ds.manifest.len());
    for rec in &ds.manifest.records {
        if rec.tracks.is_empty() {
            return Err(PipelineError::Data(format!("album {:?} has no tracks", rec.id)));
        }
        let mut g = Vec::new();
        for p in &rec.tracks {
            let s = load_spectrogram(&ds.manifest.resolve(p))?;
            if let Some(first) = spectra.first().map(Spectrogram::n_bins) {
                if s.n_bins() != first {
                    return Err(PipelineError::Data(format!("{p}: {} bins, expected {first}", s.n_bins())));
                }
            }
            g.push(spectra.len());
            seeds.push(mix_seed(cfg.seed, fnv1a(p)));
            spectra.push(s);
        }
        groups.push(g);
    }
    let n_bins = spectra[0].n_bins();
    let width = cfg.audio.patch_width;
    let album_targets = ds.targets(head)?;
    let tracks_of = |albums: &[usize]| -> Vec<usize> { albums.iter().flat_map(|&a| groups[a].iter().copied()).collect() };
    let track_album: Vec<usize> = groups.iter().enumerate().flat_map(|(a, g)| g.iter().map(move |_| a)).collect();
    let train_albums = ds.train_items();
    let train_tracks = tracks_of(&train_albums);
    let first: Vec<Array2<f64>> = train_tracks
        .iter()
        .map(|&t| sample_patch(&spectra[t], width, epoch_seed(seeds[t], 0)).map(|p| p.values))
        .collect::<Result<_, _>>()?;
    let stats = BinStats::fit(&first)?;
    drop(first);
    ds.fit_log.push(FitRecord {
        stage: "audio standardization".into(),
        n_items: train_albums.len(),
        test_items: ds.count_test(&train_albums),
    });
    let set = |tracks: Vec<usize>| {
        let targets = album_targets.select(Axis(0), &tracks.iter().map(|&t| track_album[t]).collect::<Vec<_>>());
        TrackSet {
            spectra: &spectra,
            seeds: &seeds,
            tracks,
            targets,
            stats: &stats,
            width,
            resample: cfg.audio.resample_patches,
        }
    };
    let train_set = set(train_tracks);
    let val_set = set(tracks_of(&ds.val_items()));
    let model = build_audio_cnn(cnn, n_bins, width, ds.out_dim(head), seed)?;
    let params = model.param_count();
    let cnn_trained = train(model, &train_set, &val_set, &cfg.train).stage("train audio network")?;

    let all = set((0..spectra.len()).collect());
    let mut track_features = Array2::zeros((spectra.len(), CNN_FEATURE_UNITS));
    let idx: Vec<usize> = (0..spectra.len()).collect();
    for chunk in idx.chunks(EXTRACT_BATCH) {
        let (x, _) = all.batch(chunk, 0);
        let f = extract_features(&cnn_trained.model, &x, EXTRACT_BATCH, Exec::default())?;
        for (r, &t) in chunk.iter().enumerate() {
            track_features.row_mut(t).assign(&f.row(r));
        }
    }
    let inputs = average_tracks(&track_features, &groups)?;
    let album_model = build_shallow(CNN_FEATURE_UNITS, ds.out_dim(head), head, 0.0, mix_seed(seed, 1))?;
    let album = train_album_model(ds, album_model, &inputs, head, &cfg.shallow_train).stage("train album model")?;
    Ok(Fitted {
        model: album.model.clone(),
        inputs,
        params,
        epoch_seconds: cnn_trained.mean_epoch_seconds(),
        extra_checkpoints: vec![("cnn.munn", cnn_trained.model.clone())],
        histories: vec![("history.jsonl", cnn_trained), ("album_history.jsonl", album)],
        modality: Some(Modality::Audio),
    })
}

fn run_fusion(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    head: HeadKind,
    mods: &[Modality],
    prior: &[RowOutcome],
    seed: u64,
) -> Result<Fitted, PipelineError> {
    let mut sources = Vec::new();
    for &m in mods {
        let best = prior
            .iter()
            .filter_map(|r| r.features.as_ref().filter(|f| f.modality == m).map(|f| (r.val_auc.unwrap_or(f64::NEG_INFINITY), f)))
            .fold(None::<(f64, &FeatureVectors)>, |acc, (v, f)| match acc {
                Some((b, _)) if b >= v => acc,
                _ => Some((v, f)),
            });
        let (_, f) = best.ok_or_else(|| PipelineError::Config(format!("fusion needs an earlier {m} row")))?;
        sources.push(f);
    }
    let fused = fuse(&ds.manifest.ids(), &sources, mods, cfg.missing_modality)?;
    let dropout = if head == HeadKind::Cosine { FUSION_COSINE_DROPOUT } else { 0.0 };
    let model = build_shallow(fused.values.ncols(), ds.out_dim(head), head, dropout, seed)?;
    let params = model.param_count();
    let t = train_album_model(ds, model, &fused.values, head, &cfg.shallow_train)?;
    Ok(Fitted {
        model: t.model.clone(),
        inputs: fused.values,
        params,
        epoch_seconds: t.mean_epoch_seconds(),
        histories: vec![("history.jsonl", t)],
        extra_checkpoints: Vec::new(),
        modality: None,
    })
}

fn label_scores(ds: &Dataset, head: HeadKind, outputs: &Array2<f64>) -> Result<Array2<f64>, PipelineError> {
    match head {
        HeadKind::Logistic => Ok(outputs.clone()),
        HeadKind::Cosine => {
            let c = &ds.factors.as_ref().expect("factors loaded for cosine rows").label_factors;
            Ok(scores_from_cosine_head(outputs, c, Exec::default())?.scores)
        }
    }
}

fn evaluate_on(ds: &Dataset, scores: &Array2<f64>, items: &[usize]) -> Result<EvalReport, PipelineError> {
    let pm = PredictionMatrix::new(scores.select(Axis(0), items), ds.truth.select(Axis(0), items))?;
    Ok(evaluate(&pm, Exec::default())?)
}

fn display_modality(plan: &Plan) -> String {
    match plan {
        Plan::Timbre | Plan::Audio(_) => "Audio".into(),
        Plan::Text { .. } => "Text".into(),
        Plan::Image => "Image".into(),
        Plan::Fusion(mods) => mods.iter().map(|m| m.letter().to_string()).collect::<Vec<_>>().join(" + "),
    }
}

fn run_row(
    ds: &mut Dataset,
    cfg: &ExperimentConfig,
    spec: &RowSpec,
    prior: &[RowOutcome],
) -> Result<RowOutcome, PipelineError> {
    let plan = spec.plan()?;
    let head = spec.target;
    let seed = mix_seed(cfg.seed, fnv1a(&spec.slug()));
    let fitted = match &plan {
        Plan::Timbre => run_timbre(ds, cfg, head, seed)?,
        Plan::Image => run_image(ds, cfg, head, seed)?,
        Plan::Text { semantic } => run_text(ds, cfg, head, *semantic, seed)?,
        Plan::Audio(cnn) => run_audio(ds, cfg, cnn, seed)?,
        Plan::Fusion(mods) => run_fusion(ds, cfg, head, mods, prior, seed)?,
    };
    let outputs = fitted.model.predict(&fitted.inputs)?;
    let scores = label_scores(ds, head, &outputs)?;
    let test = ds.split.indices(Split::Test);
    let report = evaluate_on(ds, &scores, &test).stage("evaluate")?;
    let val_auc = evaluate_on(ds, &scores, &ds.split.indices(Split::Val)).ok().map(|r| r.auc);
    let features = match fitted.modality {
        Some(m) => Some(FeatureVectors::new(m, ds.manifest.ids(), fitted.model.features(&fitted.inputs)?)?),
        None => None,
    };
    let row = ReportRow {
        modality: display_modality(&plan),
        target: head.as_str().to_string(),
        settings: if matches!(plan, Plan::Fusion(_)) { "mlp".into() } else { spec.settings.clone() },
        params: fitted.params,
        epoch_seconds: fitted.epoch_seconds,
        auc: report.auc,
        c1: report.coverage_at(1),
        c3: report.coverage_at(3),
        c5: report.coverage_at(5),
    };

    let dir = cfg.out_dir.join("rows").join(spec.slug());
    fs::create_dir_all(&dir).map_err(PipelineError::io(&dir))?;
    save_checkpoint(&dir.join("model.munn"), &fitted.model)?;
    for (name, m) in &fitted.extra_checkpoints {
        save_checkpoint(&dir.join(name), m)?;
    }
    for (name, t) in &fitted.histories {
        write_history(&dir.join(name), t)?;
    }
    if let Some(f) = &features {
        save_feature_vectors(&dir.join("features.fv"), f)?;
    }
    let test_ids = test.iter().map(|&i| ds.manifest.records[i].id.clone()).collect();
    let preds = FeatureVectors::new(Modality::Audio, test_ids, scores.select(Axis(0), &test))?;
    save_feature_vectors(&dir.join("predictions.fv"), &preds)?;
    let report_path = dir.join("report.json");
    let mut f = File::create(&report_path).map_err(PipelineError::io(&report_path))?;
    report.write_json(&mut f).map_err(PipelineError::io(&report_path))?;
    json_file(&dir.join("row.json"), &row)?;
    Ok(RowOutcome {
        spec: spec.clone(),
        row,
        report,
        val_auc,
        features,
        dir,
    })
}

/// Runs every configured row in order and writes the results table.
///
/// Layout under `out_dir`: `split.json`, `labels.txt`, `factors.muf1` when a
/// cosine row is present, `fit_log.jsonl`, `rows.jsonl`, `table.txt`, and
/// per row `rows/<slug>/` with checkpoints, training histories, feature
/// vectors, test predictions, `report.json` and `row.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, PipelineError> {
    cfg.validate()?;
    let with_factors = cfg.rows.iter().any(|r| r.target == HeadKind::Cosine);
    let mut ds = Dataset::load(cfg, with_factors)?;
    fs::create_dir_all(&cfg.out_dir).map_err(PipelineError::io(&cfg.out_dir))?;
    json_file(&cfg.out_dir.join("split.json"), &ds.split)?;
    let labels_path = cfg.out_dir.join("labels.txt");
    fs::write(&labels_path, ds.label_paths().join("\n") + "\n").map_err(PipelineError::io(&labels_path))?;
    if let Some(f) = &ds.factors {
        let p = cfg.out_dir.join("factors.muf1");
        let file = File::create(&p).map_err(PipelineError::io(&p))?;
        write_factor_model(BufWriter::new(file), f)?;
    }
    let mut rows: Vec<RowOutcome> = Vec::new();
    for spec in &cfg.rows {
        let out = run_row(&mut ds, cfg, spec, &rows).stage(&spec.slug())?;
        rows.push(out);
    }
    let report_rows: Vec<ReportRow> = rows.iter().map(|r| r.row.clone()).collect();
    let table = report_table(&report_rows);
    let write_lines = |name: &str, lines: Vec<String>| -> Result<(), PipelineError> {
        let p = cfg.out_dir.join(name);
        fs::write(&p, lines.join("\n") + "\n").map_err(PipelineError::io(&p))
    };
    write_lines("rows.jsonl", report_rows.iter().map(|r| serde_json::to_string(r).expect("row")).collect())?;
    write_lines("fit_log.jsonl", ds.fit_log.iter().map(|r| serde_json::to_string(r).expect("record")).collect())?;
    let table_path = cfg.out_dir.join("table.txt");
    fs::write(&table_path, &table).map_err(PipelineError::io(&table_path))?;
    Ok(ExperimentOutcome {
        rows,
        table,
        fit_log: ds.fit_log,
    })
}
