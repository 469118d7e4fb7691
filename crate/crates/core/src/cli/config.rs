//! Flat `key=value` configuration merged over a command's defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Raw overrides, later entries winning.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides(BTreeMap<String, String>);

impl Overrides {
    /// `key=value` lines; blank lines and `#` comments are ignored.
    pub fn parse_file_text(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            out.push(line).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_file_text(&text)
    }

    pub fn push(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("empty key in `{assignment}`")));
        }
        self.0.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn extend(&mut self, other: Overrides) {
        self.0.extend(other.0);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

/// JSON literal if it parses as one (numbers, booleans, `null`, arrays),
/// otherwise the raw string. A comma list of numbers becomes an array.
fn literal(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        let parts: Option<Vec<Value>> = raw
            .split(',')
            .map(|p| serde_json::from_str::<Value>(p.trim()).ok().filter(Value::is_number))
            .collect();
        if let Some(parts) = parts {
            return Value::Array(parts);
        }
    }
    Value::String(raw.to_string())
}

/// Applies `overrides` to the serialized `defaults` and deserializes the
/// result. Keys must name fields of `C`; nested fields use dots
/// (`movie_len=[100,200]` replaces a whole tuple, `a.b=1` a nested field).
/// `seed`, when given, replaces a top-level `seed` field.
pub fn resolve<C: Serialize + DeserializeOwned>(defaults: &C, overrides: &Overrides, seed: Option<u64>) -> Result<C> {
    let mut value = serde_json::to_value(defaults).map_err(|e| Error::Config(e.to_string()))?;
    let root = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("configuration is not a key/value table".into()))?;
    for (key, raw) in &overrides.0 {
        set_path(root, key, literal(raw))?;
    }
    if let Some(seed) = seed {
        if root.contains_key("seed") {
            root.insert("seed".into(), Value::from(seed));
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Splits `overrides` between two config types by top-level key: keys naming
/// a field of `A` go to `A`, all others to `B` (where unknown keys fail).
/// Returns both configs and their union as the effective config.
pub fn resolve_pair<A, B>(a: &A, b: &B, overrides: &Overrides, seed: Option<u64>) -> Result<(A, B, Value)>
where
    A: Serialize + DeserializeOwned,
    B: Serialize + DeserializeOwned,
{
    let a_value = serde_json::to_value(a).map_err(|e| Error::Config(e.to_string()))?;
    let a_keys = a_value.as_object().map(|m| m.keys().cloned().collect::<Vec<_>>()).unwrap_or_default();
    let (mut oa, mut ob) = (Overrides::default(), Overrides::default());
    for (k, v) in &overrides.0 {
        let top = k.split('.').next().unwrap_or(k);
        let target = if a_keys.iter().any(|x| x == top) { &mut oa } else { &mut ob };
        target.0.insert(k.clone(), v.clone());
    }
    let a = resolve(a, &oa, seed)?;
    let b = resolve(b, &ob, seed)?;
    let mut effective = serde_json::to_value(&b).map_err(|e| Error::Config(e.to_string()))?;
    if let (Some(e), Value::Object(av)) = (effective.as_object_mut(), serde_json::to_value(&a).map_err(|e| Error::Config(e.to_string()))?) {
        e.extend(av);
    }
    Ok((a, b, effective))
}

fn set_path(root: &mut Map<String, Value>, key: &str, v: Value) -> Result<()> {
    let unknown = || Error::Config(format!("unknown configuration key `{key}`"));
    let mut parts = key.split('.').peekable();
    let mut table = root;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            let slot = table.get_mut(part).ok_or_else(unknown)?;
            // a string field keeps numeric-looking text as text
            *slot = match (&*slot, v) {
                (Value::String(_), Value::Number(n)) => Value::String(n.to_string()),
                (_, v) => v,
            };
            return Ok(());
        }
        table = table.get_mut(part).and_then(Value::as_object_mut).ok_or_else(unknown)?;
    }
    Err(unknown())
}
