use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which output head a label belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Genre,
    Keyword,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Genre => "genre",
            Branch::Keyword => "keyword",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const GENRES: [&str; 22] = [
    "Action",
    "Adventure",
    "Animation",
    "Biography",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Family",
    "Fantasy",
    "Film-Noir",
    "History",
    "Horror",
    "Music",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Sport",
    "Thriller",
    "War",
    "Western",
];

const KEYWORDS: [&str; 33] = [
    "alien",
    "apocalypse",
    "betrayal",
    "blood",
    "chase",
    "detective",
    "dystopia",
    "escape",
    "explosion",
    "father-son-relationship",
    "friendship",
    "ghost",
    "heist",
    "high-school",
    "kidnapping",
    "love",
    "magic",
    "monster",
    "murder",
    "police",
    "prison",
    "revenge",
    "robot",
    "small-town",
    "soldier",
    "space",
    "spy",
    "superhero",
    "survival",
    "time-travel",
    "vampire",
    "wedding",
    "zombie",
];

/// Ordered genre and keyword label sets with name lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagVocabulary {
    genres: Vec<String>,
    keywords: Vec<String>,
    genre_index: HashMap<String, usize>,
    keyword_index: HashMap<String, usize>,
}

impl Default for TagVocabulary {
    /// 22 genres and 33 plot keywords.
    fn default() -> Self {
        Self::new(
            GENRES.iter().map(|s| s.to_string()).collect(),
            KEYWORDS.iter().map(|s| s.to_string()).collect(),
        )
        .expect("built-in labels are unique")
    }
}

impl TagVocabulary {
    pub fn new(genres: Vec<String>, keywords: Vec<String>) -> Result<Self> {
        let index = |names: &[String], branch: Branch| -> Result<HashMap<String, usize>> {
            let mut map = HashMap::new();
            for (i, n) in names.iter().enumerate() {
                if map.insert(n.clone(), i).is_some() {
                    return Err(Error::DuplicateId(format!("{branch} label `{n}`")));
                }
            }
            Ok(map)
        };
        Ok(Self {
            genre_index: index(&genres, Branch::Genre)?,
            keyword_index: index(&keywords, Branch::Keyword)?,
            genres,
            keywords,
        })
    }

    pub fn labels(&self, branch: Branch) -> &[String] {
        match branch {
            Branch::Genre => &self.genres,
            Branch::Keyword => &self.keywords,
        }
    }

    pub fn len(&self, branch: Branch) -> usize {
        self.labels(branch).len()
    }

    pub fn name(&self, branch: Branch, index: usize) -> Result<&str> {
        self.labels(branch)
            .get(index)
            .map(String::as_str)
            .ok_or_else(|| Error::Index(format!("{branch} label {index} of {}", self.len(branch))))
    }

    pub fn index(&self, branch: Branch, name: &str) -> Result<usize> {
        let map = match branch {
            Branch::Genre => &self.genre_index,
            Branch::Keyword => &self.keyword_index,
        };
        map.get(name).copied().ok_or_else(|| Error::Vocabulary {
            kind: branch.name(),
            name: name.to_string(),
        })
    }

    /// Finds a label in either branch, genres first.
    pub fn resolve(&self, name: &str) -> Result<(Branch, usize)> {
        self.index(Branch::Genre, name)
            .map(|i| (Branch::Genre, i))
            .or_else(|_| self.index(Branch::Keyword, name).map(|i| (Branch::Keyword, i)))
            .map_err(|_| Error::Vocabulary {
                kind: "tag",
                name: name.to_string(),
            })
    }

    pub fn indices(&self, branch: Branch, names: &[String]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index(branch, n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_and_lookup() {
        let v = TagVocabulary::default();
        assert_eq!(v.len(Branch::Genre), 22);
        assert_eq!(v.len(Branch::Keyword), 33);
        let i = v.index(Branch::Genre, "Horror").unwrap();
        assert_eq!(v.name(Branch::Genre, i).unwrap(), "Horror");
        assert_eq!(v.resolve("zombie").unwrap(), (Branch::Keyword, 32));
        assert!(matches!(
            v.index(Branch::Keyword, "Horror"),
            Err(Error::Vocabulary { kind: "keyword", .. })
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = TagVocabulary::new(vec!["a".into(), "a".into()], vec![]);
        assert!(matches!(r, Err(Error::DuplicateId(_))));
    }
}
