use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::label_space::{close_labels, LabelTaxonomy};

/// One album. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracks: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reviews: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub enrichment: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_vec: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timbre: Vec<String>,
}

impl Record {
    fn paths(&self) -> impl Iterator<Item = &String> {
        self.tracks.iter().chain(self.image_vec.iter()).chain(self.timbre.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
    pub records: Vec<Record>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Ancestor-closed label ids of every record.
    pub fn label_sets(&self, tax: &LabelTaxonomy) -> Result<Vec<BTreeSet<usize>>, PipelineError> {
        self.records
            .iter()
            .map(|r| {
                close_labels(&r.labels, tax)
                    .map_err(|e| PipelineError::Data(format!("item {:?}: {e}", r.id)))
            })
            .collect()
    }
}

/// Reads and validates a JSON-lines manifest. Blank lines are skipped;
/// reported line numbers are 1-based.
pub fn load_manifest(path: &Path) -> Result<Manifest, PipelineError> {
    let text = fs::read_to_string(path).map_err(PipelineError::io(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(raw).map_err(|e| PipelineError::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(PipelineError::Parse {
                line,
                msg: "empty id".into(),
            });
        }
        if rec.labels.is_empty() {
            return Err(PipelineError::Parse {
                line,
                msg: format!("item {:?} has no labels", rec.id),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(PipelineError::DuplicateId { line, id: rec.id });
        }
        if let Some(p) = rec.paths().map(|p| base.join(p)).find(|p| !p.is_file()) {
            return Err(PipelineError::DanglingPath { line, path: p });
        }
        records.push(rec);
    }
    Ok(Manifest { base, records })
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<(), PipelineError> {
    let mut out = Vec::new();
    for r in &m.records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.write_all(b"\n").expect("write to vec");
    }
    fs::write(path, out).map_err(PipelineError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, lines: &[&str]) -> PathBuf {
        let p = dir.join("m.jsonl");
        fs::write(&p, lines.join("\n")).unwrap();
        p
    }

    #[test]
    fn loads_valid_lines() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t.mucq"), b"x").unwrap();
        let p = write(
            dir.path(),
            &[
                r#"{"id":"a","labels":["Jazz"],"tracks":["t.mucq"]}"#,
                "",
                r#"{"id":"b","labels":["Jazz/Vocal Jazz"],"reviews":["nice"]}"#,
                r#"{"id":"c","labels":["Pop"],"enrichment":["Vocal music"]}"#,
            ],
        );
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.resolve(&m.records[0].tracks[0]), dir.path().join("t.mucq"));
        let tax = crate::label_space::parse_taxonomy(["Jazz/Vocal Jazz", "Pop"]).unwrap();
        let sets = m.label_sets(&tax).unwrap();
        assert_eq!(sets[1].len(), 2);
    }

    #[test]
    fn reports_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &[r#"{"id":"a","labels":["X"]}"#, r#"{"id":"a","labels":["Y"]}"#]);
        assert!(matches!(load_manifest(&p), Err(PipelineError::DuplicateId { line: 2, ref id }) if id == "a"));
        let p = write(dir.path(), &[r#"{"id":"a","labels":["X"]}"#, "{nope"]);
        assert!(matches!(load_manifest(&p), Err(PipelineError::Parse { line: 2, .. })));
        let p = write(dir.path(), &[r#"{"id":"a","labels":[]}"#]);
        assert!(matches!(load_manifest(&p), Err(PipelineError::Parse { line: 1, .. })));
        let p = write(dir.path(), &[r#"{"id":"a","labels":["X"],"colour":1}"#]);
        assert!(matches!(load_manifest(&p), Err(PipelineError::Parse { line: 1, .. })));
        let p = write(dir.path(), &[r#"{"id":"a","labels":["X"]}"#, r#"{"id":"b","labels":["X"],"timbre":["gone.mutb"]}"#]);
        assert!(matches!(load_manifest(&p), Err(PipelineError::DanglingPath { line: 2, .. })));
    }

    #[test]
    fn unknown_label_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &[r#"{"id":"a","labels":["Rock"]}"#]);
        let tax = crate::label_space::parse_taxonomy(["Jazz"]).unwrap();
        assert!(load_manifest(&p).unwrap().label_sets(&tax).is_err());
    }
}
