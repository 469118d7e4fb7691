//! Raw RGB frame sequences and the `FSEQ` container.
//!
//! ```text
//! magic "FSEQ" | version u32 | width u32 | height u32 | channels u8 (=3) | frame_count u32
//! frame_count × (width·height·3 bytes, row-major RGB)
//! ```

use std::fs;
use std::path::Path;

use crate::autodiff::Reader;
use crate::error::{Error, Result};

pub const FSEQ_MAGIC: &[u8; 4] = b"FSEQ";
pub const FSEQ_VERSION: u32 = 1;

/// Borrowed view of one RGB frame.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub width: usize,
    pub height: usize,
    pub pixels: &'a [u8],
}

impl Frame<'_> {
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Equal-sized 8-bit RGB frames stored back to back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl FrameSequence {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("frame size {width}×{height} must be positive")));
        }
        if !data.len().is_multiple_of(width * height * 3) {
            return Err(Error::Format(format!(
                "{} bytes is not a whole number of {width}×{height} RGB frames",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_frames(width: usize, height: usize, frames: &[Vec<u8>]) -> Result<Self> {
        let size = width * height * 3;
        let mut data = Vec::with_capacity(size * frames.len());
        for (i, f) in frames.iter().enumerate() {
            if f.len() != size {
                return Err(Error::Format(format!("frame {i} has {} bytes, expected {size}", f.len())));
            }
            data.extend_from_slice(f);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn frame_bytes(&self) -> usize {
        self.width * self.height * 3
    }

    pub fn frame_count(&self) -> usize {
        self.data.len() / self.frame_bytes()
    }

    pub fn frame(&self, index: usize) -> Result<Frame<'_>> {
        if index >= self.frame_count() {
            return Err(Error::Range(format!(
                "frame {index} of a {}-frame sequence",
                self.frame_count()
            )));
        }
        let size = self.frame_bytes();
        Ok(Frame {
            width: self.width,
            height: self.height,
            pixels: &self.data[index * size..(index + 1) * size],
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame<'_>> {
        self.data.chunks_exact(self.frame_bytes()).map(|pixels| Frame {
            width: self.width,
            height: self.height,
            pixels,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + self.data.len());
        out.extend_from_slice(FSEQ_MAGIC);
        out.extend_from_slice(&FSEQ_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.push(3);
        out.extend_from_slice(&(self.frame_count() as u32).to_le_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4, "magic")? != FSEQ_MAGIC {
            return Err(Error::Format("not an FSEQ file (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != FSEQ_VERSION {
            return Err(Error::Format(format!("unsupported FSEQ version {version}")));
        }
        let width = r.u32("width")? as usize;
        let height = r.u32("height")? as usize;
        let channels = r.u8("channels")?;
        if channels != 3 {
            return Err(Error::Format(format!("expected 3 channels, found {channels}")));
        }
        let count = r.u32("frame count")? as usize;
        let size = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(3))
            .and_then(|p| p.checked_mul(count))
            .ok_or_else(|| r.corrupt("frame payload size overflows"))?;
        let data = r.take(size, "frame payload")?.to_vec();
        if !r.is_done() {
            return Err(r.corrupt("trailing bytes after last frame"));
        }
        if count == 0 {
            if width == 0 || height == 0 {
                return Err(Error::Format("frame size must be positive".into()));
            }
            return Ok(Self {
                width,
                height,
                data,
            });
        }
        Self::new(width, height, data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fseq_roundtrip_and_header() {
        let seq = FrameSequence::from_frames(2, 1, &[vec![1, 2, 3, 4, 5, 6], vec![9; 6]]).unwrap();
        let bytes = seq.to_bytes();
        assert_eq!(&bytes[..4], b"FSEQ");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(bytes[16], 3);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 2);
        assert_eq!(FrameSequence::from_bytes(&bytes).unwrap(), seq);
        assert_eq!(seq.frame(1).unwrap().rgb(1, 0), [9, 9, 9]);
        assert!(seq.frame(2).is_err());
    }

    #[test]
    fn truncated_fseq_is_corrupt() {
        let seq = FrameSequence::from_frames(2, 2, &[vec![0; 12]]).unwrap();
        let bytes = seq.to_bytes();
        assert!(matches!(
            FrameSequence::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Corrupt { offset: 21, .. })
        ));
    }
}
