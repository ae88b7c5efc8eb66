//! Binary checkpoints of named tensors.
//!
//! Layout (little-endian): magic `TKGN`, `u32` version, `u32` header length,
//! header bytes (UTF-8 `key=value` lines), then records until end of file.
//! Each record is `u32` name length, name bytes, `u32` rank, `u64` per
//! dimension and the `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TKGN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    /// Architecture and run configuration as `key=value` text.
    pub header: String,
    pub tensors: Vec<(String, Tensor)>,
}

fn read_exact<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated checkpoint while reading {what}: {e}")))?;
    Ok(buf)
}

impl Checkpoint {
    pub fn new(header: impl Into<String>) -> Self {
        Checkpoint {
            header: header.into(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, t: &Tensor) {
        self.tensors.push((name.into(), t.detach()));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let header_len = u32::try_from(self.header.len()).map_err(|_| Error::Format("header too long".into()))?;
        w.write_all(&header_len.to_le_bytes())?;
        w.write_all(self.header.as_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        if &read_exact::<4>(r, "magic")? != MAGIC {
            return Err(Error::Format("not a TKGN checkpoint".into()));
        }
        let version = u32::from_le_bytes(read_exact(r, "version")?);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version} (this build reads {VERSION})"
            )));
        }
        let header_len = u32::from_le_bytes(read_exact(r, "header length")?) as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("truncated checkpoint header: {e}")))?;
        let header = String::from_utf8(header).map_err(|_| Error::Format("header is not UTF-8".into()))?;

        let mut tensors = Vec::new();
        loop {
            let mut len = [0u8; 4];
            match r.read(&mut len[..1])? {
                0 => break,
                _ => r
                    .read_exact(&mut len[1..])
                    .map_err(|e| Error::Format(format!("truncated record: {e}")))?,
            }
            let name_len = u32::from_le_bytes(len) as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)
                .map_err(|e| Error::Format(format!("truncated tensor name: {e}")))?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = u32::from_le_bytes(read_exact(r, "rank")?) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(read_exact(r, "dimension")?) as usize);
            }
            let count: usize = shape.iter().product();
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                values.push(f64::from_le_bytes(read_exact(r, "values")?));
            }
            let t = if shape.is_empty() {
                Tensor::scalar(values[0])
            } else {
                Tensor::from_vec(values, &shape).map_err(|e| Error::Format(format!("tensor {name}: {e}")))?
            };
            tensors.push((name, t));
        }
        Ok(Checkpoint { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn bit_eq(&self, other: &Checkpoint) -> bool {
        self.header == other.header
            && self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((na, a), (nb, b))| na == nb && a.bit_eq(b))
    }
}
