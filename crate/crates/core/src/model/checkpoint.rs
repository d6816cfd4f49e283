//! Binary checkpoint container. All integers are little-endian.
//!
//! ```text
//! magic        8 bytes  "TICDCKPT"
//! version      u32      1
//! config       u32 byte length, then UTF-8 TOML of ModelConfig
//! vocab sum    u32 byte length, then UTF-8 vocabulary checksum
//! labels       u32 count, then per label: u32 byte length, UTF-8 name
//! blocks       u32 count, then per block:
//!                u32 name length, UTF-8 name
//!                u32 rank, rank × u64 extents
//!                prod(extents) × f64 values, row-major
//! ```
//!
//! Blocks appear in parameter-layout order and are checked against the names
//! and shapes implied by the config on load.

use std::fs;
use std::path::Path;

use super::{Layout, Model, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 8] = b"TICDCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub vocab_checksum: String,
    pub labels: Vec<String>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Incompatible(format!(
                "checkpoint truncated at byte {}",
                self.pos
            )));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Incompatible("checkpoint string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.model.params.num_scalars());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.model.config.to_toml());
        put_str(&mut out, &self.vocab_checksum);
        put_u32(&mut out, self.labels.len());
        for l in &self.labels {
            put_str(&mut out, l);
        }
        let names = self.model.layout().names();
        put_u32(&mut out, names.len());
        for (name, t) in names.iter().zip(&self.model.params.tensors) {
            put_str(&mut out, name);
            put_u32(&mut out, t.rank());
            for &e in t.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Incompatible("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()? as u32;
        if version != VERSION {
            return Err(Error::Incompatible(format!(
                "checkpoint version {version}, expected {VERSION}"
            )));
        }
        let config = ModelConfig::from_toml(&r.string()?)?;
        let vocab_checksum = r.string()?;
        let labels = (0..r.u32()?)
            .map(|_| r.string())
            .collect::<Result<Vec<_>>>()?;
        if labels.len() != config.num_labels {
            return Err(Error::Incompatible(format!(
                "checkpoint lists {} labels, config expects {}",
                labels.len(),
                config.num_labels
            )));
        }
        let layout = Layout::new(&config);
        let names = layout.names();
        let count = r.u32()?;
        if count != names.len() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {count} blocks, config implies {}",
                names.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for expected in &names {
            let name = r.string()?;
            if &name != expected {
                return Err(Error::Incompatible(format!(
                    "block {name:?} found where {expected:?} was expected"
                )));
            }
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let bytes = r.take(n.checked_mul(8).ok_or_else(|| {
                Error::Incompatible(format!("block {name:?} is too large"))
            })?)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.pos != buf.len() {
            return Err(Error::Incompatible("trailing bytes after checkpoint".into()));
        }
        let model = Model::new(config, ModelParams { tensors })?;
        Ok(Self {
            model,
            vocab_checksum,
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// Fails unless `checksum` is the vocabulary this checkpoint was trained with.
    pub fn require_vocab(&self, checksum: &str) -> Result<()> {
        if self.vocab_checksum != checksum {
            return Err(Error::Incompatible(format!(
                "checkpoint was trained with vocabulary {}, got {checksum}",
                self.vocab_checksum
            )));
        }
        Ok(())
    }
}
