//! Corpus records: `<id> TAB <label,label,…> TAB <text>`, one per line, UTF-8.
//! Preprocessed corpora use the same layout with space-joined tokens as text.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub labels: Vec<String>,
    pub text: String,
}

impl RawRecord {
    fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.id, self.labels.join(","), self.text)
    }
}

pub fn parse_records(text: &str, what: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(labels), Some(body)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::parse(what, i + 1, "expected 3 tab-separated fields"));
        };
        if id.is_empty() {
            return Err(Error::parse(what, i + 1, "empty document id"));
        }
        let labels = labels
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        out.push(RawRecord {
            id: id.to_string(),
            labels,
            text: body.to_string(),
        });
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, &path.display().to_string())
}

pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Ordered label names; a label's index is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains([',', '\t', '\n']) {
                return Err(Error::Validation(format!("bad label name {n:?}")));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate label {n:?}")));
            }
        }
        Ok(Self { names, index })
    }

    /// Sorted distinct label names of the given records.
    pub fn from_records(records: &[RawRecord]) -> Result<Self> {
        let names: BTreeSet<&str> = records
            .iter()
            .flat_map(|r| r.labels.iter().map(String::as_str))
            .collect();
        Self::new(names.into_iter().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::LabelNotFound(name.to_string()))
    }

    pub fn indices<S: AsRef<str>>(&self, names: &[S]) -> Result<BTreeSet<usize>> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }
}

pub fn write_labels(path: &Path, labels: &LabelSet) -> Result<()> {
    let mut s = labels.names().join("\n");
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<LabelSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabelSet::new(
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().to_string())
            .collect(),
    )
}

/// A preprocessed, vocabulary-encoded document with its true label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<usize>,
    pub raw_tokens: Vec<String>,
    pub labels: BTreeSet<usize>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        raw_tokens: Vec<String>,
        labels: BTreeSet<usize>,
        vocab: &Vocabulary,
        max_len: usize,
    ) -> Self {
        let mut raw_tokens = raw_tokens;
        raw_tokens.truncate(max_len);
        let tokens = vocab.encode(&raw_tokens, max_len);
        Self {
            id: id.into(),
            tokens,
            raw_tokens,
            labels,
        }
    }

    /// Dense 0/1 label vector of length `num_labels`.
    pub fn targets(&self, num_labels: usize) -> Vec<f64> {
        let mut y = vec![0.0; num_labels];
        for &l in &self.labels {
            y[l] = 1.0;
        }
        y
    }
}

/// Reads a preprocessed corpus (text field = space-joined tokens) and encodes it.
pub fn read_token_corpus(
    path: &Path,
    vocab: &Vocabulary,
    labels: &LabelSet,
    max_len: usize,
) -> Result<Vec<Document>> {
    read_records(path)?
        .into_iter()
        .map(|r| {
            let tokens = r.text.split_whitespace().map(str::to_string).collect();
            let label_ids = labels.indices(&r.labels)?;
            Ok(Document::new(r.id, tokens, label_ids, vocab, max_len))
        })
        .collect()
}
