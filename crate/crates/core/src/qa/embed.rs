use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Default embedding width.
pub const EMBED_DIM: usize = 300;

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Text to a fixed-width vector. Deterministic; empty text maps to zero.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Vec<f32>;
}

/// Token table; a text embeds to the mean over its tokens, unknown tokens
/// counting as zero vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LookupEmbedding {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
}

impl LookupEmbedding {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Tokens are stored lowercased so lookups match [`tokenize`].
    pub fn insert(&mut self, token: &str, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape("embedding table", &[vector.len()], &[self.dim]));
        }
        if self.table.insert(token.to_lowercase(), vector).is_some() {
            return Err(Error::DuplicateId(token.to_string()));
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.table.get(token).map(Vec::as_slice)
    }

    /// `token<SPACE>E floats` per line; the width comes from the first line.
    /// Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out: Option<Self> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let token = parts.next().filter(|t| !t.is_empty()).ok_or_else(|| Error::Parse {
                line: line_no,
                reason: "missing token".into(),
            })?;
            let values = parts
                .map(|v| {
                    v.parse::<f32>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Parse {
                            line: line_no,
                            reason: format!("bad value `{v}`"),
                        })
                })
                .collect::<Result<Vec<f32>>>()?;
            let table = out.get_or_insert_with(|| Self::new(values.len()));
            if values.is_empty() || values.len() != table.dim {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected {} values, found {}", table.dim, values.len()),
                });
            }
            table.insert(token, values).map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
        }
        out.ok_or_else(|| Error::EmptyInput("embedding table has no entries".into()))
    }

    /// Sorted by token, shortest round-trip float formatting.
    pub fn format(&self) -> String {
        let mut tokens: Vec<&String> = self.table.keys().collect();
        tokens.sort();
        let mut out = String::new();
        for t in tokens {
            out.push_str(t);
            for v in &self.table[t] {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.format()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl EmbeddingProvider for LookupEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let tokens = tokenize(text);
        let mut acc = vec![0.0f64; self.dim];
        for t in &tokens {
            if let Some(v) = self.table.get(t) {
                acc.iter_mut().zip(v).for_each(|(a, &x)| *a += x as f64);
            }
        }
        let n = tokens.len().max(1) as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }
}

/// Signed feature hashing: each token adds ±1 to one of `dim` buckets, chosen
/// by 64-bit FNV-1a; the sum is L2-normalised.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashingEmbedding {
    dim: usize,
}

impl HashingEmbedding {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding width must be positive".into()));
        }
        Ok(Self { dim })
    }
}

impl Default for HashingEmbedding {
    fn default() -> Self {
        Self { dim: EMBED_DIM }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl EmbeddingProvider for HashingEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dim];
        for t in tokenize(text) {
            let h = fnv1a64(t.as_bytes());
            // top bit picks the sign, the rest the bucket
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[((h & (u64::MAX >> 1)) % self.dim as u64) as usize] += sign;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; self.dim];
        }
        acc.into_iter().map(|x| (x / norm) as f32).collect()
    }
}
