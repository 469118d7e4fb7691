//! In-memory shot features and the `SHTF` cache.
//!
//! ```text
//! magic "SHTF" | version u32 | D u32 | count u64
//! count × (id_len u16 | video id UTF-8 | ordinal u32 | D × f32)
//! ```
//! All integers and floats little-endian.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::autodiff::Reader;
use crate::error::{Error, Result};
use crate::segmentation::ShotId;

pub const SHTF_MAGIC: &[u8; 4] = b"SHTF";
pub const SHTF_VERSION: u32 = 1;

/// Shot features of one dimension, kept in insertion order and grouped by
/// video in the order each video first appeared.
#[derive(Clone, Debug, Default)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<ShotId>,
    data: Vec<f32>,
    index: HashMap<ShotId, usize>,
    videos: Vec<String>,
    by_video: HashMap<String, Vec<usize>>,
}

impl PartialEq for FeatureStore {
    /// Bitwise on the feature values, so `NaN` payloads compare too.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.ids == other.ids
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn insert(&mut self, id: ShotId, feature: &[f32]) -> Result<()> {
        if feature.len() != self.dim {
            return Err(Error::shape("feature store", &[self.dim], &[feature.len()]));
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let row = self.ids.len();
        match self.by_video.get_mut(&id.video) {
            Some(rows) => rows.push(row),
            None => {
                self.videos.push(id.video.clone());
                self.by_video.insert(id.video.clone(), vec![row]);
            }
        }
        self.index.insert(id.clone(), row);
        self.ids.push(id);
        self.data.extend_from_slice(feature);
        Ok(())
    }

    pub fn get(&self, id: &ShotId) -> Result<&[f32]> {
        self.index
            .get(id)
            .map(|&row| self.row(row))
            .ok_or_else(|| Error::Lookup(format!("no feature for shot {id}")))
    }

    pub fn contains(&self, id: &ShotId) -> bool {
        self.index.contains_key(id)
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn id(&self, row: usize) -> &ShotId {
        &self.ids[row]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ShotId, &[f32])> {
        self.ids.iter().enumerate().map(|(i, id)| (id, self.row(i)))
    }

    pub fn videos(&self) -> &[String] {
        &self.videos
    }

    pub fn has_video(&self, video: &str) -> bool {
        self.by_video.contains_key(video)
    }

    /// Row numbers of a video's shots in insertion order.
    pub fn video_rows(&self, video: &str) -> Result<&[usize]> {
        self.by_video
            .get(video)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("no shots for video `{video}`")))
    }

    /// Feature rows of one video, in insertion order.
    pub fn video_features(&self, video: &str) -> Result<Vec<&[f32]>> {
        Ok(self.video_rows(video)?.iter().map(|&r| self.row(r)).collect())
    }

    /// Records of `other` appended in order; dimensions must agree.
    pub fn extend(&mut self, other: &FeatureStore) -> Result<()> {
        if other.dim != self.dim && !other.is_empty() {
            return Err(Error::shape("feature store merge", &[self.dim], &[other.dim]));
        }
        for (id, f) in other.iter() {
            self.insert(id.clone(), f)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4 + self.len() * 16);
        out.extend_from_slice(SHTF_MAGIC);
        out.extend_from_slice(&SHTF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (id, f) in self.iter() {
            let name = id.video.as_bytes();
            let len = u16::try_from(name.len())
                .map_err(|_| Error::Format(format!("video id of {} bytes is too long", name.len())))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&id.ordinal.to_le_bytes());
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4, "magic")? != SHTF_MAGIC {
            return Err(Error::Format("not an SHTF file (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != SHTF_VERSION {
            return Err(Error::Format(format!("unsupported SHTF version {version}")));
        }
        let dim = r.u32("dimension")? as usize;
        let count = r.u64("record count")?;
        let mut store = Self::new(dim);
        for _ in 0..count {
            let offset = r.offset();
            let len = r.u16("video id length")? as usize;
            let video = r.utf8(len, "video id")?;
            let ordinal = r.u32("shot ordinal")?;
            let f = r.f32s(dim, "feature values")?;
            store.insert(ShotId::new(video, ordinal), &f).map_err(|e| Error::Corrupt {
                reason: e.to_string(),
                offset,
            })?;
        }
        if !r.is_done() {
            return Err(r.corrupt("trailing bytes after last record"));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
