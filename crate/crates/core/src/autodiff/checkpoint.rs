//! Versioned binary container for named arrays.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      8 bytes  "PRRCKPT\0"
//! version    u32
//! kind       str      (u32 length + UTF-8 bytes)
//! config     str      (TOML snapshot)
//! vocab_hash str
//! languages  u32 count, str each
//! phonemes   u32 count, str each
//! seed       u64
//! meta       u32 count, (str key, str value) each
//! arrays     u32 count, each: str name, u8 dtype (0 = f64, 1 = f32),
//!            u32 ndim, u64 dims..., row-major payload
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PRRCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl NamedArray {
    pub fn from_tensor(name: &str, t: &Tensor, dtype: DType) -> Self {
        let values = match dtype {
            DType::F64 => t.data().to_vec(),
            DType::F32 => t.data().iter().map(|&v| v as f32 as f64).collect(),
        };
        NamedArray {
            name: name.to_string(),
            dtype,
            shape: vec![t.rows(), t.cols()],
            values,
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        match self.shape[..] {
            [r, c] => Tensor::from_vec(r, c, self.values.clone()),
            _ => Err(Error::Checkpoint(format!(
                "array `{}` is not two-dimensional",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: String,
    pub vocab_hash: String,
    pub languages: Vec<String>,
    pub phonemes: Vec<String>,
    pub seed: u64,
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<NamedArray>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn strs(&mut self, items: &[String]) {
        self.u32(items.len() as u32);
        for s in items {
            self.str(s);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
    fn strs(&mut self) -> Result<Vec<String>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.str()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.str(&self.kind);
        w.str(&self.config);
        w.str(&self.vocab_hash);
        w.strs(&self.languages);
        w.strs(&self.phonemes);
        w.u64(self.seed);
        w.u32(self.meta.len() as u32);
        for (k, v) in &self.meta {
            w.str(k);
            w.str(v);
        }
        w.u32(self.arrays.len() as u32);
        for a in &self.arrays {
            w.str(&a.name);
            w.u8(match a.dtype {
                DType::F64 => 0,
                DType::F32 => 1,
            });
            w.u32(a.shape.len() as u32);
            for &d in &a.shape {
                w.u64(d as u64);
            }
            for &v in &a.values {
                match a.dtype {
                    DType::F64 => w.0.extend_from_slice(&v.to_le_bytes()),
                    DType::F32 => w.0.extend_from_slice(&(v as f32).to_le_bytes()),
                }
            }
        }
        let digest = Sha256::digest(&w.0);
        w.0.extend_from_slice(&digest);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("checksum mismatch; file is corrupt".into()));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let kind = r.str()?;
        let config = r.str()?;
        let vocab_hash = r.str()?;
        let languages = r.strs()?;
        let phonemes = r.strs()?;
        let seed = r.u64()?;
        let n_meta = r.u32()? as usize;
        let mut meta = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            meta.push((r.str()?, r.str()?));
        }
        let n_arrays = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(n_arrays);
        for _ in 0..n_arrays {
            let name = r.str()?;
            let dtype = match r.u8()? {
                0 => DType::F64,
                1 => DType::F32,
                d => return Err(Error::Checkpoint(format!("unknown dtype tag {d}"))),
            };
            let ndim = r.u32()? as usize;
            let shape: Vec<usize> = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<_>>()?;
            let count: usize = shape.iter().product();
            let values = match dtype {
                DType::F64 => r
                    .take(count * 8)?
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                DType::F32 => r
                    .take(count * 4)?
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
            };
            arrays.push(NamedArray {
                name,
                dtype,
                shape,
                values,
            });
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes after arrays".into()));
        }
        Ok(Checkpoint {
            kind,
            config,
            vocab_hash,
            languages,
            phonemes,
            seed,
            meta,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dtype: DType) -> Checkpoint {
        let t = Tensor::from_vec(2, 2, vec![0.1, -2.5, 1e-300, 3.0]).unwrap();
        Checkpoint {
            kind: "test".into(),
            config: "a = 1\n".into(),
            vocab_hash: "abc".into(),
            languages: vec!["A".into()],
            phonemes: vec!["p".into(), "ʔ".into()],
            seed: 42,
            meta: vec![("k".into(), "v".into())],
            arrays: vec![NamedArray::from_tensor("w", &t, dtype)],
        }
    }

    #[test]
    fn byte_exact_round_trip() {
        for dtype in [DType::F64, DType::F32] {
            let bytes = sample(dtype).to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn rejects_corruption_and_versions() {
        let mut bytes = sample(DType::F64).to_bytes();
        bytes[20] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_bytes(b"garbage").is_err());

        let mut body = sample(DType::F64).to_bytes();
        body.truncate(body.len() - 32);
        body[8..12].copy_from_slice(&99u32.to_le_bytes());
        let digest = Sha256::digest(&body);
        body.extend_from_slice(&digest);
        let err = Checkpoint::from_bytes(&body).unwrap_err();
        assert!(err.to_string().contains("version 99"));
    }
}
