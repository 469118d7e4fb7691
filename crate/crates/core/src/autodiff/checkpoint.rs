//! `STLN` parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    "STLN"
//! version  u32
//! count    u32
//! count × { name_len u16, name utf-8, rank u8, dims rank×u32, payload f32×prod(dims) }
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ParamSet, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"STLN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ParamSet<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + params.numel() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, tensor) in params.iter() {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("parameter name too long: {name}")))?;
        let rank = u8::try_from(tensor.rank())
            .map_err(|_| Error::Format(format!("rank too large for {name}")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in tensor.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension too large for {name}")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Bounds-checked little-endian reader that reports the failing byte offset.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corrupt {
                reason: format!("truncated while reading {what}"),
                offset: self.pos as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.corrupt("length overflow"))?, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn utf8(&mut self, n: usize, what: &str) -> Result<String> {
        let at = self.pos as u64;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Corrupt {
            reason: format!("{what} is not valid UTF-8"),
            offset: at,
        })
    }

    pub(crate) fn corrupt(&self, reason: &str) -> Error {
        Error::Corrupt {
            reason: reason.into(),
            offset: self.pos as u64,
        }
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamSet<f32>> {
    let mut r = Reader::new(bytes);
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an STLN checkpoint (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32("parameter count")?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = r.utf8(name_len, "parameter name")?;
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let len = len.ok_or_else(|| r.corrupt("shape overflow"))?;
        let data = r.f32s(len, "payload")?;
        params.add(name, Tensor::new(shape, data)?)?;
    }
    if !r.is_done() {
        return Err(r.corrupt("trailing bytes after last parameter"));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ParamSet<f32>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet<f32> {
        let mut p = ParamSet::new();
        p.add("lstm.w_i", Tensor::matrix(2, 3, vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5, -7.25, 1e-30]).unwrap())
            .unwrap();
        p.add("b", Tensor::vector(vec![0.5])).unwrap();
        p.add("s", Tensor::scalar(2.0)).unwrap();
        p
    }

    #[test]
    fn header_layout() {
        let bytes = encode_checkpoint(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"STLN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u16::from_le_bytes(bytes[12..14].try_into().unwrap()), 8);
        assert_eq!(&bytes[14..22], b"lstm.w_i");
        assert_eq!(bytes[22], 2);
    }

    #[test]
    fn roundtrip_preserves_bits() {
        let p = sample();
        let back = decode_checkpoint(&encode_checkpoint(&p).unwrap()).unwrap();
        for ((n1, t1), (n2, t2)) in p.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let b1: Vec<u32> = t1.data().iter().map(|x| x.to_bits()).collect();
            let b2: Vec<u32> = t2.data().iter().map(|x| x.to_bits()).collect();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_checkpoint(&sample()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match decode_checkpoint(cut) {
            Err(Error::Corrupt { offset, .. }) => assert!(offset > 12),
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_checkpoint(&sample()).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format(_))));
    }
}
