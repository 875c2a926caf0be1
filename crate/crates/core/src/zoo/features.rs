use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::ZooError;
use crate::codec::{self, CodecError, Reader, Writer};

const MAGIC: &[u8; 4] = b"MUFV";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    Text,
    Image,
}

impl Modality {
    /// Fusion order.
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Text, Modality::Image];

    pub fn letter(self) -> char {
        match self {
            Modality::Audio => 'A',
            Modality::Text => 'T',
            Modality::Image => 'I',
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Audio => "audio",
            Modality::Text => "text",
            Modality::Image => "image",
        })
    }
}

/// One feature row per item id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVectors {
    pub modality: Modality,
    pub ids: Vec<String>,
    pub values: Array2<f64>,
}

impl FeatureVectors {
    pub fn new(modality: Modality, ids: Vec<String>, values: Array2<f64>) -> Result<Self, ZooError> {
        if ids.len() != values.nrows() {
            return Err(ZooError::DimensionMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                values.nrows()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CodecError::NonFiniteValue(i).into());
        }
        Ok(Self { modality, ids, values })
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}

/// Arithmetic mean of the track rows listed for each album.
pub fn average_tracks(tracks: &Array2<f64>, albums: &[Vec<usize>]) -> Result<Array2<f64>, ZooError> {
    let mut out = Array2::zeros((albums.len(), tracks.ncols()));
    for (a, rows) in albums.iter().enumerate() {
        if rows.is_empty() {
            return Err(ZooError::EmptyAlbum(a));
        }
        let mut acc = out.row_mut(a);
        for &r in rows {
            if r >= tracks.nrows() {
                return Err(ZooError::DimensionMismatch(format!(
                    "album {a} refers to track row {r} of {}",
                    tracks.nrows()
                )));
            }
            acc += &tracks.row(r);
        }
        acc /= rows.len() as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Error,
    ZeroBlock,
}

/// Concatenated per-modality blocks, each l2-normalized or all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    pub ids: Vec<String>,
    pub values: Array2<f64>,
    pub blocks: Vec<(Modality, Range<usize>)>,
    /// `present[[i, b]]` is false when block `b` of item `i` is zero,
    /// either because the vector was missing or because it was zero.
    pub present: Array2<bool>,
}

impl FusionInput {
    pub fn zero_blocks(&self) -> Vec<(usize, Modality)> {
        self.present
            .indexed_iter()
            .filter(|(_, &p)| !p)
            .map(|((i, b), _)| (i, self.blocks[b].0))
            .collect()
    }
}

fn normalized(v: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = v.dot(&v).sqrt();
    (n > 0.0).then(|| &v / n)
}

/// l2-normalizes each selected modality and concatenates the blocks in
/// audio, text, image order.
pub fn fuse(
    ids: &[String],
    sources: &[&FeatureVectors],
    selection: &[Modality],
    missing: MissingPolicy,
) -> Result<FusionInput, ZooError> {
    let mut chosen: Vec<&FeatureVectors> = Vec::new();
    for m in Modality::ALL {
        if !selection.contains(&m) {
            continue;
        }
        let src = sources.iter().find(|s| s.modality == m).ok_or_else(|| ZooError::MissingModality {
            modality: m,
            item: ids.first().cloned().unwrap_or_default(),
        })?;
        chosen.push(src);
    }
    if chosen.is_empty() {
        return Err(ZooError::ConfigInvalid("empty modality selection".into()));
    }
    let mut blocks = Vec::new();
    let mut at = 0;
    for src in &chosen {
        blocks.push((src.modality, at..at + src.dim()));
        at += src.dim();
    }
    let mut values = Array2::zeros((ids.len(), at));
    let mut present = Array2::from_elem((ids.len(), chosen.len()), false);
    for (b, src) in chosen.iter().enumerate() {
        let index = src.index();
        let range = blocks[b].1.clone();
        for (i, id) in ids.iter().enumerate() {
            let Some(&row) = index.get(id.as_str()) else {
                if missing == MissingPolicy::Error {
                    return Err(ZooError::MissingModality {
                        modality: src.modality,
                        item: id.clone(),
                    });
                }
                continue;
            };
            if let Some(v) = normalized(src.values.row(row)) {
                values.slice_mut(s![i, range.clone()]).assign(&v);
                present[[i, b]] = true;
            }
        }
    }
    Ok(FusionInput {
        ids: ids.to_vec(),
        values,
        blocks,
        present,
    })
}

pub fn write_feature_vectors<W: Write>(w: W, fv: &FeatureVectors) -> Result<(), ZooError> {
    let mut w = Writer::new(w);
    let (m, d) = fv.values.dim();
    let io = |e: std::io::Error| ZooError::from(CodecError::from(e));
    w.bytes(MAGIC).map_err(io)?;
    w.u32(codec::dim(m)?).map_err(io)?;
    w.u32(codec::dim(d)?).map_err(io)?;
    w.f64s(fv.values.iter().copied()).map_err(io)?;
    Ok(())
}

fn read_values<R: Read>(r: R) -> Result<Array2<f64>, ZooError> {
    let mut r = Reader::new(r);
    r.magic(MAGIC)?;
    let m = r.u32()? as usize;
    let d = r.u32()? as usize;
    let data = r.f64_vec(m * d)?;
    r.finish()?;
    Array2::from_shape_vec((m, d), data).map_err(|e| CodecError::Malformed(e.to_string()).into())
}

pub fn read_feature_vectors<R: Read, I: BufRead>(
    r: R,
    ids: I,
    modality: Modality,
) -> Result<FeatureVectors, ZooError> {
    let values = read_values(r)?;
    let ids = ids
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(CodecError::from)?;
    if ids.len() != values.nrows() {
        return Err(CodecError::Malformed(format!("{} ids for {} rows", ids.len(), values.nrows())).into());
    }
    Ok(FeatureVectors { modality, ids, values })
}

/// Sidecar id index path, `<path>.ids`.
pub fn ids_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ids");
    PathBuf::from(p)
}

pub fn save_feature_vectors(path: &Path, fv: &FeatureVectors) -> Result<(), ZooError> {
    let f = File::create(path).map_err(CodecError::from)?;
    let mut w = BufWriter::new(f);
    write_feature_vectors(&mut w, fv)?;
    w.flush().map_err(CodecError::from)?;
    let mut ids = BufWriter::new(File::create(ids_path(path)).map_err(CodecError::from)?);
    for id in &fv.ids {
        writeln!(ids, "{id}").map_err(CodecError::from)?;
    }
    ids.flush().map_err(CodecError::from)?;
    Ok(())
}

pub fn load_feature_vectors(path: &Path, modality: Modality) -> Result<FeatureVectors, ZooError> {
    let f = File::open(path).map_err(CodecError::from)?;
    let ids = File::open(ids_path(path)).map_err(CodecError::from)?;
    read_feature_vectors(BufReader::new(f), BufReader::new(ids), modality)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("item{i}")).collect()
    }

    #[test]
    fn averaging() {
        let t = array![[1.0, 2.0], [-1.0, -2.0], [3.0, 5.0]];
        let a = average_tracks(&t, &[vec![2], vec![0, 1]]).unwrap();
        assert_eq!(a, array![[3.0, 5.0], [0.0, 0.0]]);
        assert!(matches!(average_tracks(&t, &[vec![0], vec![]]), Err(ZooError::EmptyAlbum(1))));
    }

    #[test]
    fn fuse_normalizes_and_orders_blocks() {
        let text = FeatureVectors::new(Modality::Text, ids(2), array![[3.0, 4.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        let audio = FeatureVectors::new(Modality::Audio, vec!["item1".into(), "item0".into()], array![[0.0, 5.0], [1.0, 0.0]]).unwrap();
        let f = fuse(&ids(2), &[&text, &audio], &[Modality::Text, Modality::Audio], MissingPolicy::Error).unwrap();
        assert_eq!(f.blocks, vec![(Modality::Audio, 0..2), (Modality::Text, 2..5)]);
        assert_eq!(f.values, array![[1.0, 0.0, 0.6, 0.8, 0.0], [0.0, 1.0, 0.0, 0.0, 1.0]]);
        assert!(f.zero_blocks().is_empty());

        let only = fuse(&ids(2), &[&text, &audio], &[Modality::Text], MissingPolicy::Error).unwrap();
        assert_eq!(only.values, array![[0.6, 0.8, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn zero_and_missing_blocks() {
        let text = FeatureVectors::new(Modality::Text, ids(2), array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let image = FeatureVectors::new(Modality::Image, vec!["item1".into()], array![[2.0]]).unwrap();
        let f = fuse(&ids(2), &[&text, &image], &[Modality::Text, Modality::Image], MissingPolicy::ZeroBlock).unwrap();
        assert_eq!(f.zero_blocks(), vec![(0, Modality::Text), (0, Modality::Image)]);
        assert_eq!(f.values.row(0).sum(), 0.0);
        let e = fuse(&ids(2), &[&text, &image], &[Modality::Image], MissingPolicy::Error);
        assert!(matches!(e, Err(ZooError::MissingModality { modality: Modality::Image, ref item }) if item == "item0"));
        assert!(fuse(&ids(2), &[&text], &[Modality::Audio], MissingPolicy::ZeroBlock).is_err());
    }

    #[test]
    fn file_round_trip() {
        let fv = FeatureVectors::new(Modality::Audio, ids(3), Array2::from_shape_fn((3, 4), |(i, j)| i as f64 - 0.25 * j as f64)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("audio.fv");
        save_feature_vectors(&p, &fv).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"MUFV");
        assert_eq!(bytes.len(), 12 + 12 * 8);
        assert_eq!(std::fs::read_to_string(ids_path(&p)).unwrap(), "item0\nitem1\nitem2\n");
        assert_eq!(load_feature_vectors(&p, Modality::Audio).unwrap(), fv);
        assert!(load_feature_vectors(&dir.path().join("nope"), Modality::Audio).is_err());
    }
}
