//! Versioned binary checkpoints.
//!
//! Layout, little-endian: magic `IMCK`, format version (u32), the training
//! config and model layout as length-prefixed JSON, every parameter as
//! name / rows / cols / f32 values, every RNG stream as name / seed /
//! stream / word position, and finally a SHA-256 of all preceding bytes.

use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{Model, ModelMeta, TrainConfig};
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::rng::RngState;

const MAGIC: &[u8; 4] = b"IMCK";
const VERSION: u32 = 1;

/// Contents of a checkpoint file.
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model<f32>,
    pub rng_states: Vec<(String, RngState)>,
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    buf.extend_from_slice(&(b.len() as u64).to_le_bytes());
    buf.extend_from_slice(b);
}

pub fn encode(config: &TrainConfig, model: &Model<f32>, rng_states: &[(String, RngState)]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_bytes(&mut buf, &serde_json::to_vec(config)?);
    put_bytes(&mut buf, &serde_json::to_vec(&model.meta)?);
    buf.extend_from_slice(&(model.store.len() as u64).to_le_bytes());
    for id in model.store.ids() {
        put_bytes(&mut buf, model.store.name(id).as_bytes());
        let p = model.store.get(id);
        buf.extend_from_slice(&(p.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(p.ncols() as u64).to_le_bytes());
        for &x in p.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf.extend_from_slice(&(rng_states.len() as u64).to_le_bytes());
    for (name, st) in rng_states {
        put_bytes(&mut buf, name.as_bytes());
        buf.extend_from_slice(&st.seed);
        buf.extend_from_slice(&st.stream.to_le_bytes());
        buf.extend_from_slice(&st.word_pos.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }
}

pub fn decode(buf: &[u8]) -> Result<Checkpoint> {
    if buf.len() < 8 + 32 || &buf[..4] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let config: TrainConfig = serde_json::from_slice(r.bytes()?)?;
    let meta: ModelMeta = serde_json::from_slice(r.bytes()?)?;
    let n_params = r.u64()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..n_params {
        let name = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let raw = r.take(rows * cols * 4)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let arr = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        store.add(name, arr);
    }
    let n_rng = r.u64()? as usize;
    let mut rng_states = Vec::with_capacity(n_rng);
    for _ in 0..n_rng {
        let name = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("stream name is not UTF-8".into()))?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        rng_states.push((name, RngState { seed, stream, word_pos }));
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        config,
        model: Model { store, meta },
        rng_states,
    })
}

pub fn save_checkpoint(
    path: &Path,
    config: &TrainConfig,
    model: &Model<f32>,
    rng_states: &[(String, RngState)],
) -> Result<()> {
    let buf = encode(config, model, rng_states)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}
