//! Parameter checkpoints: magic `DSCK`, u32 version, u32 header length, UTF-8
//! `key = value` header holding the optimizer settings, u32 tensor count, then per
//! tensor: u32 name length, name, u32 rank, u32 dims, f32 values. All little-endian.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::OptimizerConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub optimizer: OptimizerConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let io = |e| Error::io("<checkpoint>", e);
    let header = toml::to_string(&ckpt.optimizer).map_err(|e| Error::Config(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    put_u32(&mut w, CHECKPOINT_VERSION).map_err(io)?;
    put_u32(&mut w, header.len() as u32).map_err(io)?;
    w.write_all(header.as_bytes()).map_err(io)?;
    put_u32(&mut w, ckpt.tensors.len() as u32).map_err(io)?;
    for t in &ckpt.tensors {
        if t.shape.iter().product::<usize>() != t.values.len() {
            return Err(Error::shape(format!("tensor `{}` shape {:?} vs {} values", t.name, t.shape, t.values.len())));
        }
        put_u32(&mut w, t.name.len() as u32).map_err(io)?;
        w.write_all(t.name.as_bytes()).map_err(io)?;
        put_u32(&mut w, t.shape.len() as u32).map_err(io)?;
        for &d in &t.shape {
            put_u32(&mut w, d as u32).map_err(io)?;
        }
        for v in &t.values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let slice = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| Error::Format {
            offset: self.pos as u64,
            message: format!("truncated {what}"),
        })?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<checkpoint>", e))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad checkpoint magic".into(),
        });
    }
    let version = c.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let header_len = c.u32("header length")? as usize;
    let header_at = c.pos;
    let header = std::str::from_utf8(c.take(header_len, "header")?).map_err(|_| Error::Format {
        offset: header_at as u64,
        message: "header is not UTF-8".into(),
    })?;
    let optimizer: OptimizerConfig = toml::from_str(header).map_err(|e| Error::Format {
        offset: header_at as u64,
        message: format!("bad optimizer header: {e}"),
    })?;
    let n = c.u32("tensor count")?;
    let mut tensors = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let name_len = c.u32("name length")? as usize;
        let name_at = c.pos;
        let name = String::from_utf8(c.take(name_len, "tensor name")?.to_vec()).map_err(|_| Error::Format {
            offset: name_at as u64,
            message: "tensor name is not UTF-8".into(),
        })?;
        let rank = c.u32("rank")?;
        let shape = (0..rank)
            .map(|_| c.u32("dimension").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let payload = c.take(count * 4, "tensor payload")?;
        let values = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(NamedTensor { name, shape, values });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format {
            offset: c.pos as u64,
            message: "trailing bytes after last tensor".into(),
        });
    }
    Ok(Checkpoint { optimizer, tensors })
}
