//! Binary checkpoint container.
//!
//! Layout, all integers little-endian `u32`, all values little-endian `f64`:
//!
//! ```text
//! b"MHCKPT01"
//! config_len, config_len bytes of UTF-8 `key=value` lines (ModelConfig)
//! n_tensors
//! n_tensors x { name_len, name bytes, ndim, ndim dims, prod(dims) values }
//! ```
//!
//! Base tensors are named as in [`ModelParams::named`]; adapter tensors, if
//! present, as `adapters.<layer>.<q_down|q_up|o_down|o_up>`.

use std::collections::BTreeMap;
use std::path::Path;

use super::{AdapterSet, Model, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"MHCKPT01";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub adapters: Option<AdapterSet>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let cfg = ckpt.model.config.to_kv_string();
    put_u32(&mut out, cfg.len());
    out.extend_from_slice(cfg.as_bytes());
    let mut tensors = ckpt.model.params.named();
    if let Some(a) = &ckpt.adapters {
        tensors.extend(a.named());
    }
    put_u32(&mut out, tensors.len());
    for (name, t) in tensors {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len());
        for &d in t.shape() {
            put_u32(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::invalid(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::invalid(e.to_string()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::invalid("not a checkpoint (bad magic)"));
    }
    let config = ModelConfig::from_kv(&KvFile::parse(&r.string()?)?)?;
    let n = r.u32()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..n {
        let name = r.string()?;
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        tensors.insert(name, Tensor::new(shape, data)?);
    }
    if r.pos != buf.len() {
        return Err(Error::invalid("trailing bytes after checkpoint"));
    }

    let mut params = ModelParams::zeros(&config);
    for (name, slot) in params.named_mut() {
        let t = tensors.remove(&name).ok_or_else(|| Error::invalid(format!("checkpoint lacks {name}")))?;
        if t.shape() != slot.shape() {
            return Err(Error::Shape(format!("{name}: {:?} vs {:?}", t.shape(), slot.shape())));
        }
        *slot = t;
    }
    let adapters = if tensors.keys().any(|k| k.starts_with("adapters.")) {
        let mut a = AdapterSet::zeros(&config);
        for (name, slot) in a.named_mut() {
            let t = tensors.remove(&name).ok_or_else(|| Error::invalid(format!("checkpoint lacks {name}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Shape(format!("{name}: {:?} vs {:?}", t.shape(), slot.shape())));
            }
            *slot = t;
        }
        Some(a)
    } else {
        None
    };
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::invalid(format!("unknown tensor {extra} in checkpoint")));
    }
    Ok(Checkpoint { model: Model { config, params }, adapters })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}
