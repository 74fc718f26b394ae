//! Binary checkpoint: metadata key/values plus every parameter block as
//! little-endian f64. Round-trips bit-exactly.

use std::fs;
use std::path::Path;

use crate::autodiff::Mat;
use crate::model::{Block, ModelDims, ModelParams};

const MAGIC: &[u8] = b"EMBSR-CKPT-1\n";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Free-form run description (variant, seed, config), in insertion order.
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        let put_u64 = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        put_u64(&mut out, self.meta.len() as u64);
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        let d = self.params.dims;
        for v in [d.dim, d.n_items, d.n_ops_aug, d.max_positions] {
            put_u64(&mut out, v as u64);
        }
        out.extend_from_slice(&self.params.scale.to_le_bytes());
        put_u64(&mut out, Block::COUNT as u64);
        for (b, t) in Block::ALL.iter().zip(self.params.tensors()) {
            put_str(&mut out, b.name());
            put_u64(&mut out, t.rows() as u64);
            put_u64(&mut out, t.cols() as u64);
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let rest = bytes.strip_prefix(MAGIC).ok_or(CheckpointError::BadMagic)?;
        let mut r = Reader { buf: rest };
        let n_meta = r.usize()?;
        let mut meta = Vec::with_capacity(n_meta.min(1024));
        for _ in 0..n_meta {
            meta.push((r.string()?, r.string()?));
        }
        let dims = ModelDims { dim: r.usize()?, n_items: r.usize()?, n_ops_aug: r.usize()?, max_positions: r.usize()? };
        let scale = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let n_blocks = r.usize()?;
        if n_blocks != Block::COUNT {
            return Err(CheckpointError::Corrupt(format!("{n_blocks} blocks, expected {}", Block::COUNT)));
        }
        let mut tensors = Vec::with_capacity(n_blocks);
        for b in Block::ALL {
            let name = r.string()?;
            if name != b.name() {
                return Err(CheckpointError::Corrupt(format!("block {name:?} where {:?} expected", b.name())));
            }
            let (rows, cols) = (r.usize()?, r.usize()?);
            let len = rows.checked_mul(cols).ok_or(CheckpointError::Truncated)?;
            let raw = r.take(len.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(Mat::from_vec(rows, cols, data));
        }
        if !r.buf.is_empty() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        let params = ModelParams::from_tensors(dims, scale, tensors).map_err(CheckpointError::Corrupt)?;
        Ok(Self { params, meta })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes =
            fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn usize(&mut self) -> Result<usize, CheckpointError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| CheckpointError::Corrupt(format!("size {v} too large")))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Corrupt("non-UTF-8 string".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let dims = ModelDims { dim: 3, n_items: 5, n_ops_aug: 3, max_positions: 6 };
        let mut params = ModelParams::init(dims, 7);
        params.get_mut(Block::FfnB1).set(0, 1, -0.0);
        params.get_mut(Block::FfnB1).set(0, 2, f64::MIN_POSITIVE / 3.0);
        Checkpoint { params, meta: vec![("variant".into(), "full".into()), ("seed".into(), "7".into())] }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.meta_value("variant"), Some("full"));
        let bits = |m: &Mat| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        for (a, b) in c.params.tensors().iter().zip(back.params.tensors()) {
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated)));
        assert!(matches!(Checkpoint::from_bytes(b"nope"), Err(CheckpointError::BadMagic)));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
