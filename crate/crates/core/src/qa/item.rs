use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::segmentation::ShotId;

/// A multiple-choice question about a clip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QaItem {
    pub qid: String,
    pub question: String,
    pub answers: Vec<String>,
    pub clip: Vec<ShotId>,
    pub correct_index: usize,
}

impl QaItem {
    pub fn validate(&self) -> Result<()> {
        if self.answers.len() < 2 {
            return Err(Error::Config(format!("item {} needs at least two answers", self.qid)));
        }
        if self.correct_index >= self.answers.len() {
            return Err(Error::Index(format!(
                "item {}: correct index {} of {} answers",
                self.qid,
                self.correct_index,
                self.answers.len()
            )));
        }
        if self.clip.is_empty() {
            return Err(Error::EmptyInput(format!("item {} has an empty clip", self.qid)));
        }
        let bad = |s: &str| s.contains(['\t', '\n', '\r']);
        if bad(&self.qid) || bad(&self.question) || self.answers.iter().any(|a| bad(a) || a.contains('|')) {
            return Err(Error::Format(format!("item {}: tab, newline or `|` inside a text field", self.qid)));
        }
        Ok(())
    }
}

/// `qid<TAB>question<TAB>a0|a1|…<TAB>clip ids (comma)<TAB>correct_index`.
pub fn format_items(items: &[QaItem]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        item.validate()?;
        let clip: Vec<String> = item.clip.iter().map(ShotId::to_string).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            item.qid,
            item.question,
            item.answers.join("|"),
            clip.join(","),
            item.correct_index
        );
    }
    Ok(out)
}

pub fn parse_items(text: &str) -> Result<Vec<QaItem>> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: i + 1, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        let [qid, question, answers, clip, correct] = fields[..] else {
            return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
        };
        let item = QaItem {
            qid: qid.to_string(),
            question: question.to_string(),
            answers: answers.split('|').map(str::to_string).collect(),
            clip: clip
                .split(',')
                .map(|s| s.parse())
                .collect::<Result<_>>()
                .map_err(|e| err(e.to_string()))?,
            correct_index: correct.parse().map_err(|_| err(format!("bad correct index `{correct}`")))?,
        };
        item.validate().map_err(|e| err(e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}
