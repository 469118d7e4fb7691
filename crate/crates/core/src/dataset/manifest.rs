use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::{Branch, TagVocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoKind {
    Movie,
    Trailer,
}

/// One line of a JSON Lines manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: VideoKind,
    /// FSEQ file or feature cache holding the video's shots.
    pub path: String,
    pub genres: Vec<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub linked_movie_id: Option<String>,
}

impl ManifestEntry {
    /// Genre and keyword indices under `vocab`.
    pub fn label_indices(&self, vocab: &TagVocabulary) -> Result<(Vec<usize>, Vec<usize>)> {
        Ok((
            vocab.indices(Branch::Genre, &self.genres)?,
            vocab.indices(Branch::Keyword, &self.keywords)?,
        ))
    }
}

/// Parses and validates manifest text: ids unique, labels known.
pub fn parse_manifest(text: &str, vocab: &TagVocabulary) -> Result<Vec<ManifestEntry>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: n + 1,
            reason: e.to_string(),
        })?;
        if entry.id.is_empty() {
            return Err(Error::Parse {
                line: n + 1,
                reason: "empty video id".into(),
            });
        }
        entry.label_indices(vocab)?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("manifest entries serialize") + "\n")
        .collect()
}

pub fn load_manifest(path: &Path, vocab: &TagVocabulary) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, vocab)
}

pub fn save_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    fs::write(path, format_manifest(entries)).map_err(|e| Error::io(path, e))
}
