use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::audio::DEFAULT_PATCH_WIDTH;
use crate::label_space::DEFAULT_FACTOR_DIM;
use crate::nn::OptimizerConfig;
use crate::text::{DEFAULT_CHAR_LIMIT, DEFAULT_VOCAB_SIZE};
use crate::zoo::{AudioCnnConfig, FilterShape, HeadKind, MissingPolicy, Modality, TrainConfig, Width};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowModality {
    Audio,
    Text,
    Image,
    Fusion,
}

/// One result row: modality, target and settings as in the results table.
///
/// Settings by modality: audio takes `timbre-mlp` or `<low|high>-<3x3|4x96|4x70>`,
/// text takes `VSM` or `VSM+Sem`, image takes `shallow`, and fusion takes
/// the selected modalities such as `A+T+I`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub modality: RowModality,
    pub target: HeadKind,
    pub settings: String,
}

/// Validated form of a [`RowSpec`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Plan {
    Timbre,
    Audio(AudioCnnConfig),
    Text { semantic: bool },
    Image,
    Fusion(Vec<Modality>),
}

impl RowSpec {
    pub fn new(modality: RowModality, target: HeadKind, settings: &str) -> Self {
        Self {
            modality,
            target,
            settings: settings.to_string(),
        }
    }

    pub(crate) fn plan(&self) -> Result<Plan, PipelineError> {
        let bad = || {
            PipelineError::Config(format!(
                "settings {:?} are not valid for modality {:?}",
                self.settings, self.modality
            ))
        };
        let s = self.settings.as_str();
        match self.modality {
            RowModality::Audio if s == "timbre-mlp" => Ok(Plan::Timbre),
            RowModality::Audio => {
                let (w, f) = s.split_once('-').ok_or_else(bad)?;
                let width = match w {
                    "low" => Width::Low,
                    "high" => Width::High,
                    _ => return Err(bad()),
                };
                let shape = FilterShape::ALL
                    .into_iter()
                    .find(|fs| fs.as_str() == f)
                    .ok_or_else(bad)?;
                Ok(Plan::Audio(AudioCnnConfig::new(shape, width, self.target)))
            }
            RowModality::Text => match s {
                "VSM" => Ok(Plan::Text { semantic: false }),
                "VSM+Sem" => Ok(Plan::Text { semantic: true }),
                _ => Err(bad()),
            },
            RowModality::Image if s == "shallow" => Ok(Plan::Image),
            RowModality::Image => Err(bad()),
            RowModality::Fusion => {
                let mut mods = Vec::new();
                for part in s.split('+') {
                    let m = Modality::ALL
                        .into_iter()
                        .find(|m| m.letter().to_string() == part.trim())
                        .ok_or_else(bad)?;
                    if mods.contains(&m) {
                        return Err(bad());
                    }
                    mods.push(m);
                }
                if mods.len() < 2 {
                    return Err(bad());
                }
                mods.sort();
                Ok(Plan::Fusion(mods))
            }
        }
    }

    /// Directory-safe name, e.g. `audio-cosine-low-4x70`.
    pub fn slug(&self) -> String {
        let m = match self.modality {
            RowModality::Audio => "audio",
            RowModality::Text => "text",
            RowModality::Image => "image",
            RowModality::Fusion => "fusion",
        };
        let s: String = self
            .settings
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
            .collect();
        format!("{m}-{}-{s}", self.target.as_str())
    }
}

/// The rows run by default: every modality once per head where it matters.
pub fn default_grid() -> Vec<RowSpec> {
    use HeadKind::{Cosine, Logistic};
    vec![
        RowSpec::new(RowModality::Audio, Logistic, "timbre-mlp"),
        RowSpec::new(RowModality::Audio, Logistic, "low-4x70"),
        RowSpec::new(RowModality::Audio, Cosine, "low-4x70"),
        RowSpec::new(RowModality::Text, Logistic, "VSM"),
        RowSpec::new(RowModality::Text, Logistic, "VSM+Sem"),
        RowSpec::new(RowModality::Text, Cosine, "VSM+Sem"),
        RowSpec::new(RowModality::Image, Logistic, "shallow"),
        RowSpec::new(RowModality::Fusion, Logistic, "A+T+I"),
        RowSpec::new(RowModality::Fusion, Cosine, "A+T+I"),
    ]
}

/// Every configuration of the results table.
pub fn full_grid() -> Vec<RowSpec> {
    use HeadKind::{Cosine, Logistic};
    let mut rows = vec![RowSpec::new(RowModality::Audio, Logistic, "timbre-mlp")];
    for head in [Logistic, Cosine] {
        for shape in ["3x3", "4x96", "4x70"] {
            for width in ["low", "high"] {
                rows.push(RowSpec::new(RowModality::Audio, head, &format!("{width}-{shape}")));
            }
        }
    }
    for head in [Logistic, Cosine] {
        for s in ["VSM", "VSM+Sem"] {
            rows.push(RowSpec::new(RowModality::Text, head, s));
        }
    }
    rows.push(RowSpec::new(RowModality::Image, Logistic, "shallow"));
    for head in [Logistic, Cosine] {
        for s in ["A+T", "A+I", "T+I", "A+T+I"] {
            rows.push(RowSpec::new(RowModality::Fusion, head, s));
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioSettings {
    pub patch_width: usize,
    /// Draw a fresh patch per track every epoch instead of a fixed one.
    pub resample_patches: bool,
}

impl Default for AudioSettings {
    fn default() -> Self {
        Self {
            patch_width: DEFAULT_PATCH_WIDTH,
            resample_patches: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextSettings {
    pub vocab_size: usize,
    pub char_limit: usize,
}

impl Default for TextSettings {
    fn default() -> Self {
        Self {
            vocab_size: DEFAULT_VOCAB_SIZE,
            char_limit: DEFAULT_CHAR_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    /// Defaults to `taxonomy.txt` next to the manifest.
    pub taxonomy: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub factor_dim: usize,
    pub min_support: usize,
    pub rows: Vec<RowSpec>,
    /// Training of the deep networks (audio CNN, text MLP).
    pub train: TrainConfig,
    /// Training of the shallow input-to-output networks.
    pub shallow_train: TrainConfig,
    pub audio: AudioSettings,
    pub text: TextSettings,
    pub missing_modality: MissingPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.jsonl"),
            taxonomy: None,
            out_dir: PathBuf::from("out"),
            seed: 42,
            factor_dim: DEFAULT_FACTOR_DIM,
            min_support: 1,
            rows: default_grid(),
            train: TrainConfig::default(),
            shallow_train: TrainConfig {
                epochs: 300,
                patience: 10,
                optimizer: OptimizerConfig::Adam {
                    lr: 1e-2,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
                ..TrainConfig::default()
            },
            audio: AudioSettings::default(),
            text: TextSettings::default(),
            missing_modality: MissingPolicy::Error,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(PipelineError::io(path))?;
        Self::from_json(&text)
    }

    pub fn taxonomy_path(&self) -> PathBuf {
        self.taxonomy.clone().unwrap_or_else(|| {
            self.manifest
                .parent()
                .unwrap_or_else(|| Path::new(""))
                .join("taxonomy.txt")
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.rows.is_empty() {
            return Err(PipelineError::Config("no experiment rows".into()));
        }
        if self.factor_dim == 0 || self.min_support == 0 {
            return Err(PipelineError::Config("factor_dim and min_support must be >= 1".into()));
        }
        if self.audio.patch_width == 0 || self.text.vocab_size == 0 || self.text.char_limit == 0 {
            return Err(PipelineError::Config("patch width, vocabulary size and character limit must be >= 1".into()));
        }
        for t in [&self.train, &self.shallow_train] {
            if t.batch_size == 0 {
                return Err(PipelineError::Config("batch_size must be >= 1".into()));
            }
        }
        for r in &self.rows {
            r.plan()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
        assert!(matches!(ExperimentConfig::from_json(r#"{"sed": 1}"#), Err(PipelineError::Config(_))));
        let c = ExperimentConfig::from_json(r#"{"seed": 7, "train": {"epochs": 2}, "rows": [{"modality":"audio","target":"cosine","settings":"high-3x3"}]}"#).unwrap();
        assert_eq!((c.seed, c.train.epochs, c.train.batch_size), (7, 2, 32));
        assert_eq!(c.rows[0].plan().unwrap(), Plan::Audio(AudioCnnConfig::new(FilterShape::Sq3x3, Width::High, HeadKind::Cosine)));
    }

    #[test]
    fn settings_must_fit_modality() {
        let bad = [
            (RowModality::Text, "low-4x70"),
            (RowModality::Audio, "VSM"),
            (RowModality::Audio, "mid-3x3"),
            (RowModality::Image, "4x70"),
            (RowModality::Fusion, "A"),
            (RowModality::Fusion, "A+A"),
            (RowModality::Fusion, "A+X"),
        ];
        for (m, s) in bad {
            assert!(RowSpec::new(m, HeadKind::Logistic, s).plan().is_err(), "{m:?} {s}");
        }
        assert_eq!(
            RowSpec::new(RowModality::Fusion, HeadKind::Logistic, "I+A").plan().unwrap(),
            Plan::Fusion(vec![Modality::Audio, Modality::Image])
        );
    }

    #[test]
    fn grids_are_valid() {
        let full = full_grid();
        assert_eq!(full.len(), 1 + 12 + 4 + 1 + 8);
        for r in full.iter().chain(default_grid().iter()) {
            r.plan().unwrap();
        }
        let slugs: std::collections::HashSet<_> = full.iter().map(RowSpec::slug).collect();
        assert_eq!(slugs.len(), full.len());
        assert_eq!(RowSpec::new(RowModality::Text, HeadKind::Cosine, "VSM+Sem").slug(), "text-cosine-vsm_sem");
    }

    #[test]
    fn taxonomy_defaults_next_to_manifest() {
        let c = ExperimentConfig {
            manifest: PathBuf::from("data/m.jsonl"),
            ..ExperimentConfig::default()
        };
        assert_eq!(c.taxonomy_path(), PathBuf::from("data/taxonomy.txt"));
    }
}
