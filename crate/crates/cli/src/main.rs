use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use genrefuse::label_space::{read_factor_model, write_factor_model, DEFAULT_FACTOR_DIM};
use genrefuse::nn::load_checkpoint;
use genrefuse::par::Exec;
use genrefuse::pipeline::{
    evaluate_predictions, full_grid, label_infogain, load_manifest, report_table, run_experiment, synth_dataset,
    Dataset, ExperimentConfig, PipelineError, ReportRow, RowModality, RowSpec, SynthSpec,
};
use genrefuse::text::DEFAULT_TOP_TERMS;
use genrefuse::zoo::{
    extract_features, fuse, load_feature_vectors, save_feature_vectors, FeatureVectors, HeadKind, MissingPolicy,
    Modality,
};

#[derive(Parser)]
#[command(name = "genrefuse", version, about = "Multimodal multi-label music genre classification")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Dataset manifest (JSON lines).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Taxonomy file, one branch path per line.
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multimodal dataset.
    Synth {
        #[arg(long)]
        top_genres: Option<usize>,
        #[arg(long)]
        subs_per_genre: Option<usize>,
        #[arg(long)]
        albums: Option<usize>,
        #[arg(long)]
        tracks_per_album: Option<usize>,
    },
    /// Fit label factors on the training and validation albums.
    Factorize {
        #[arg(long, default_value_t = DEFAULT_FACTOR_DIM)]
        dim: usize,
    },
    /// Run a single experiment row.
    Train {
        #[arg(long, value_enum)]
        modality: CliRowModality,
        #[arg(long, value_enum)]
        target: CliHead,
        /// e.g. `low-4x70`, `timbre-mlp`, `VSM+Sem`, `shallow`.
        #[arg(long)]
        settings: String,
    },
    /// Penultimate-layer features of a checkpoint for stored input vectors.
    Extract {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        modality: CliModality,
    },
    /// Concatenate l2-normalized modality vectors.
    Fuse {
        /// `modality=path`, repeatable.
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        /// Zero-fill items missing from a modality instead of failing.
        #[arg(long)]
        zero_missing: bool,
    },
    /// Score stored predictions against manifest labels.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Label column order, one path per line (as written by `experiment`).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Treat predictions as cosine-head outputs against these factors.
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Run every configured row and print the results table.
    Experiment {
        /// Run every configuration instead of the configured rows.
        #[arg(long)]
        full_grid: bool,
    },
    /// Terms most informative about one label.
    Infogain {
        #[arg(long)]
        label: String,
        #[arg(long, default_value_t = DEFAULT_TOP_TERMS)]
        top: usize,
        /// Include enrichment terms.
        #[arg(long)]
        semantic: bool,
    },
    /// Render a results table from a `rows.jsonl` file.
    Report {
        #[arg(long)]
        rows: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliRowModality {
    Audio,
    Text,
    Image,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliHead {
    Logistic,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliModality {
    Audio,
    Text,
    Image,
}

impl From<CliModality> for Modality {
    fn from(m: CliModality) -> Self {
        match m {
            CliModality::Audio => Modality::Audio,
            CliModality::Text => Modality::Text,
            CliModality::Image => Modality::Image,
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, PipelineError> {
    v.as_deref().ok_or_else(|| config_err(format!("--{flag} is required")))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn experiment_config(g: &Global) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &g.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(t) = &g.taxonomy {
        cfg.taxonomy = Some(t.clone());
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn synth(g: &Global, top: Option<usize>, subs: Option<usize>, albums: Option<usize>, tracks: Option<usize>) -> Result<(), PipelineError> {
    let mut spec = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io(p))?;
            serde_json::from_str::<SynthSpec>(&text).map_err(|e| config_err(e.to_string()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = top {
        spec.n_top_genres = v;
    }
    if let Some(v) = subs {
        spec.subs_per_genre = v;
    }
    if let Some(v) = albums {
        spec.albums = v;
    }
    if let Some(v) = tracks {
        spec.tracks_per_album = v;
    }
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    let out = need(&g.out, "out")?;
    let m = synth_dataset(&spec, out)?;
    let tracks: usize = m.records.iter().map(|r| r.tracks.len()).sum();
    println!("wrote {} albums, {tracks} tracks to {}", m.len(), out.display());
    Ok(())
}

fn factorize(g: &Global, dim: usize) -> Result<(), PipelineError> {
    let cfg = ExperimentConfig {
        factor_dim: dim,
        ..experiment_config(g)?
    };
    let ds = Dataset::load(&cfg, true)?;
    let out = need(&g.out, "out")?;
    let f = ds.factors.as_ref().expect("factors requested");
    let file = File::create(out).map_err(io(out))?;
    write_factor_model(BufWriter::new(file), f)?;
    let labels = out.with_extension("labels.txt");
    fs::write(&labels, ds.label_paths().join("\n") + "\n").map_err(io(&labels))?;
    println!(
        "factorized {} labels into d={} from {} albums; wrote {} and {}",
        f.n_labels(),
        f.dim(),
        ds.split.fit_indices().len(),
        out.display(),
        labels.display()
    );
    Ok(())
}

fn run_rows(cfg: &ExperimentConfig) -> Result<(), PipelineError> {
    let out = run_experiment(cfg)?;
    print!("{}", out.table);
    Ok(())
}

fn extract(g: &Global, checkpoint: &Path, input: &Path, modality: Modality) -> Result<(), PipelineError> {
    let model = load_checkpoint(checkpoint)?;
    let fv = load_feature_vectors(input, modality)?;
    let feats = extract_features(&model, &fv.values, 64, Exec::default())?;
    let out = need(&g.out, "out")?;
    save_feature_vectors(out, &FeatureVectors::new(modality, fv.ids, feats)?)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn fuse_cmd(g: &Global, inputs: &[String], zero_missing: bool) -> Result<(), PipelineError> {
    let mut sources = Vec::new();
    for spec in inputs {
        let (m, p) = spec
            .split_once('=')
            .ok_or_else(|| config_err(format!("--input {spec:?} is not modality=path")))?;
        let m = CliModality::from_str(m, true).map_err(|_| config_err(format!("unknown modality {m:?}")))?;
        sources.push(load_feature_vectors(Path::new(p), m.into())?);
    }
    let ids = sources[0].ids.clone();
    let selection: Vec<Modality> = sources.iter().map(|s| s.modality).collect();
    let refs: Vec<&FeatureVectors> = sources.iter().collect();
    let policy = if zero_missing { MissingPolicy::ZeroBlock } else { MissingPolicy::Error };
    let fused = fuse(&ids, &refs, &selection, policy)?;
    let out = need(&g.out, "out")?;
    save_feature_vectors(out, &FeatureVectors::new(selection[0], fused.ids.clone(), fused.values.clone())?)?;
    println!(
        "fused {} items into {} dimensions ({} zero blocks); wrote {}",
        fused.ids.len(),
        fused.values.ncols(),
        fused.zero_blocks().len(),
        out.display()
    );
    Ok(())
}

fn evaluate_cmd(g: &Global, predictions: &Path, labels: Option<&Path>, factors: Option<&Path>) -> Result<(), PipelineError> {
    let cfg = experiment_config(g)?;
    let manifest = load_manifest(&cfg.manifest)?;
    let tax_path = cfg.taxonomy_path();
    let tax = genrefuse::label_space::LabelTaxonomy::from_text(&fs::read_to_string(&tax_path).map_err(io(&tax_path))?)?;
    let label_paths = match labels {
        Some(p) => Some(
            fs::read_to_string(p)
                .map_err(io(p))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>(),
        ),
        None => None,
    };
    let factors = match factors {
        Some(p) => Some(read_factor_model(File::open(p).map_err(io(p))?)?),
        None => None,
    };
    let preds = load_feature_vectors(predictions, Modality::Audio)?;
    let report = evaluate_predictions(&manifest, &tax, label_paths.as_deref(), &preds, factors.as_ref())?;
    let json = report.to_json();
    match &g.out {
        Some(p) => fs::write(p, json + "\n").map_err(io(p))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn infogain(g: &Global, label: &str, top: usize, semantic: bool) -> Result<(), PipelineError> {
    let cfg = experiment_config(g)?;
    let ds = Dataset::load(&cfg, false)?;
    for (term, ig) in label_infogain(&ds, label, cfg.text.vocab_size, cfg.text.char_limit, semantic, top)? {
        println!("{ig:.6}\t{term}");
    }
    Ok(())
}

fn report(rows: &Path) -> Result<(), PipelineError> {
    let text = fs::read_to_string(rows).map_err(io(rows))?;
    let mut parsed = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: ReportRow = serde_json::from_str(line).map_err(|e| PipelineError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        parsed.push(row);
    }
    if parsed.is_empty() {
        return Err(PipelineError::Data(format!("{} has no rows", rows.display())));
    }
    print!("{}", report_table(&parsed));
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let g = &cli.global;
    match cli.command {
        Command::Synth {
            top_genres,
            subs_per_genre,
            albums,
            tracks_per_album,
        } => synth(g, top_genres, subs_per_genre, albums, tracks_per_album),
        Command::Factorize { dim } => factorize(g, dim),
        Command::Train {
            modality,
            target,
            settings,
        } => {
            let modality = match modality {
                CliRowModality::Audio => RowModality::Audio,
                CliRowModality::Text => RowModality::Text,
                CliRowModality::Image => RowModality::Image,
            };
            let target = match target {
                CliHead::Logistic => HeadKind::Logistic,
                CliHead::Cosine => HeadKind::Cosine,
            };
            let cfg = ExperimentConfig {
                rows: vec![RowSpec::new(modality, target, &settings)],
                ..experiment_config(g)?
            };
            run_rows(&cfg)
        }
        Command::Extract {
            checkpoint,
            input,
            modality,
        } => extract(g, &checkpoint, &input, modality.into()),
        Command::Fuse { inputs, zero_missing } => fuse_cmd(g, &inputs, zero_missing),
        Command::Evaluate {
            predictions,
            labels,
            factors,
        } => evaluate_cmd(g, &predictions, labels.as_deref(), factors.as_deref()),
        Command::Experiment { full_grid: all } => {
            let mut cfg = experiment_config(g)?;
            if all {
                cfg.rows = full_grid();
            }
            run_rows(&cfg)
        }
        Command::Infogain { label, top, semantic } => infogain(g, &label, top, semantic),
        Command::Report { rows } => report(&rows),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            eprintln!("genrefuse: {kind}: {e}");
            ExitCode::from(kind.exit_code() as u8)
        }
    }
}
