//! `MUNN` model checkpoints: layer specs followed by every parameter block
//! as little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Head, LayerSpec, ModelGraph, NnError, Shape};
use crate::codec::{dim, CodecError, Reader, Writer};

const MAGIC: &[u8; 4] = b"MUNN";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(w: W, model: &ModelGraph) -> Result<(), NnError> {
    write_inner(Writer::new(w), model).map_err(NnError::Format)
}

fn write_inner<W: Write>(mut w: Writer<W>, model: &ModelGraph) -> Result<(), CodecError> {
    let input = model.input_shape();
    w.bytes(MAGIC)?;
    w.u32(VERSION)?;
    for v in [input.c, input.h, input.w] {
        w.u32(dim(v)?)?;
    }
    w.u64(model.seed())?;
    w.u32(dim(model.specs().len())?)?;
    for spec in model.specs() {
        match *spec {
            LayerSpec::Dense { out } => {
                w.u8(0)?;
                w.u32(dim(out)?)?;
            }
            LayerSpec::Conv2d { filters, kh, kw } => {
                w.u8(1)?;
                for v in [filters, kh, kw] {
                    w.u32(dim(v)?)?;
                }
            }
            LayerSpec::MaxPool { ph, pw } => {
                w.u8(2)?;
                w.u32(dim(ph)?)?;
                w.u32(dim(pw)?)?;
            }
            LayerSpec::Relu => w.u8(3)?,
            LayerSpec::Sigmoid => w.u8(4)?,
            LayerSpec::Dropout { rate } => {
                w.u8(5)?;
                w.f64(rate)?;
            }
            LayerSpec::Flatten => w.u8(6)?,
        }
    }
    match model.head() {
        Head::Logistic(n) => {
            w.u8(0)?;
            w.u32(dim(n)?)?;
        }
        Head::Cosine(d) => {
            w.u8(1)?;
            w.u32(dim(d)?)?;
        }
    }
    let blocks = model.param_blocks();
    w.u32(dim(blocks.len())?)?;
    for (_, b) in blocks {
        w.u64(b.len() as u64)?;
        w.f64s(b.iter().copied())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<ModelGraph, NnError> {
    let mut r = Reader::new(r);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version).into());
    }
    let input = Shape::image(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let seed = r.u64()?;
    let n_layers = r.u32()? as usize;
    let mut specs = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let spec = match r.u8()? {
            0 => LayerSpec::Dense { out: r.u32()? as usize },
            1 => LayerSpec::Conv2d {
                filters: r.u32()? as usize,
                kh: r.u32()? as usize,
                kw: r.u32()? as usize,
            },
            2 => LayerSpec::MaxPool {
                ph: r.u32()? as usize,
                pw: r.u32()? as usize,
            },
            3 => LayerSpec::Relu,
            4 => LayerSpec::Sigmoid,
            5 => LayerSpec::Dropout { rate: r.f64()? },
            6 => LayerSpec::Flatten,
            t => return Err(CodecError::Malformed(format!("unknown layer tag {t}")).into()),
        };
        specs.push(spec);
    }
    let head = match r.u8()? {
        0 => Head::Logistic(r.u32()? as usize),
        1 => Head::Cosine(r.u32()? as usize),
        t => return Err(CodecError::Malformed(format!("unknown head tag {t}")).into()),
    };
    let n_blocks = r.u32()? as usize;
    let expected = ModelGraph::count_params(input, &specs, head)?;
    let mut blocks = Vec::with_capacity(n_blocks.min(1024));
    let mut total = 0usize;
    for _ in 0..n_blocks {
        let len = r.u64()? as usize;
        total = total.saturating_add(len);
        if total > expected {
            return Err(CodecError::Malformed("parameter payload larger than the graph".into()).into());
        }
        blocks.push(r.f64_vec(len)?);
    }
    r.finish()?;
    ModelGraph::from_parts(input, specs, head, seed, &blocks)
}

pub fn save_checkpoint(path: &Path, model: &ModelGraph) -> Result<(), NnError> {
    let f = File::create(path).map_err(CodecError::from)?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, model)?;
    w.flush().map_err(CodecError::from)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelGraph, NnError> {
    let f = File::open(path).map_err(CodecError::from)?;
    read_checkpoint(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trip() {
        let m = ModelGraph::new(
            Shape::image(1, 6, 8),
            vec![
                LayerSpec::Conv2d { filters: 3, kh: 2, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { ph: 1, pw: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Dense { out: 4 },
                LayerSpec::Sigmoid,
            ],
            Head::Cosine(5),
            77,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"MUNN");
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, m);

        buf.truncate(buf.len() - 1);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
