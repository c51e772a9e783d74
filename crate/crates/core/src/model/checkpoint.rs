//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! "MTKD"                      4 bytes magic
//! format_version              u32
//! dim_count                   u32
//! dims                        dim_count x u32   (input, hidden..., classes)
//! parameters                  f64 each, [W0, b0, W1, b1, ...], W row-major out x in
//! language_tag_len            u32
//! language_tag                UTF-8 bytes
//! seed                        u64
//! config_digest               32 bytes
//! ```

use std::path::Path;

use super::Classifier;
use crate::error::{io_err, Error, Result};

pub const MAGIC: &[u8; 4] = b"MTKD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Classifier,
    pub language_tag: String,
    pub seed: u64,
    pub config_digest: [u8; 32],
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.model.layer_dims();
        let mut out = Vec::with_capacity(16 + 4 * dims.len() + 8 * self.model.num_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for p in self.model.params_flat() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.language_tag.len() as u32).to_le_bytes());
        out.extend_from_slice(self.language_tag.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let n_dims = r.u32()? as usize;
        if n_dims < 2 {
            return Err(Error::CheckpointShape(format!("{n_dims} layer dims")));
        }
        let dims = (0..n_dims)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if dims.contains(&0) {
            return Err(Error::CheckpointShape(format!("zero-width layer in {dims:?}")));
        }
        let n_params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if r.remaining() < n_params.saturating_mul(8) {
            return Err(Error::CorruptCheckpoint(format!(
                "truncated parameters: need {} bytes, have {}",
                n_params * 8,
                r.remaining()
            )));
        }
        let params = (0..n_params).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let tag_len = r.u32()? as usize;
        let language_tag = String::from_utf8(r.take(tag_len)?.to_vec())
            .map_err(|_| Error::CorruptCheckpoint("language tag is not UTF-8".into()))?;
        let seed = r.u64()?;
        let config_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        if r.remaining() != 0 {
            return Err(Error::CorruptCheckpoint(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }

        let mut model = Classifier::init(&dims, 0)?;
        model.set_params_flat(&params)?;
        Ok(Self {
            model,
            language_tag,
            seed,
            config_digest,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::CorruptCheckpoint(format!(
                "unexpected end of file at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint.to_bytes()).map_err(io_err(path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    fn sample() -> Checkpoint {
        Checkpoint {
            model: Classifier::init(&[6, 5, 3], 21).unwrap(),
            language_tag: "fi".into(),
            seed: 21,
            config_digest: [7; 32],
        }
    }

    #[test]
    fn round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample();
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        let mut rng = Rng64::new(4);
        for _ in 0..10 {
            let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
            let a = ck.model.forward(&x).unwrap();
            let b = back.model.forward(&x).unwrap();
            assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = sample().to_bytes();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            match Checkpoint::from_bytes(&bytes[..cut]) {
                Err(Error::CorruptCheckpoint(_)) => {}
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bumped_version_is_unsupported() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
    }

    #[test]
    fn zero_dim_is_shape_error() {
        let mut bytes = sample().to_bytes();
        // second dim
        bytes[16..20].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::CheckpointShape(_))
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = sample().to_bytes();
        bytes.push(0);
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::CorruptCheckpoint(_))
        ));
    }
}
