use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "PAD";
pub const UNK_TOKEN: &str = "UNK";

const HEADER: &str = "#vocab v1 reserved PAD=0 UNK=1 first-line-index=2";
const RESERVED: usize = 2;

/// Token ↔ index map. Indices 0 and 1 are reserved for padding and
/// out-of-vocabulary tokens; corpus tokens start at 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokenized training documents. Indices follow
    /// first occurrence, so the same corpus always yields the same map.
    pub fn build<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut vocab = Self::reserved_only();
        for doc in docs {
            for tok in doc {
                vocab.insert(tok.as_ref());
            }
        }
        Ok(vocab)
    }

    fn reserved_only() -> Self {
        Self {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: HashMap::new(),
        }
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of a corpus token; reserved names are not looked up, so a corpus
    /// token spelled `PAD` still maps to its own entry or to UNK.
    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Maps tokens to indices, truncating to `max_len`. No padding is added.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> Vec<usize> {
        tokens
            .iter()
            .take(max_len)
            .map(|t| self.id(t.as_ref()))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN))
            .collect()
    }

    /// Short content hash used to tie embeddings and checkpoints to this vocabulary.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for t in &self.tokens[RESERVED..] {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == HEADER => {}
            other => {
                return Err(Error::parse(
                    "vocabulary",
                    1,
                    format!("expected header {HEADER:?}, got {other:?}"),
                ))
            }
        }
        let mut vocab = Self::reserved_only();
        for (i, line) in lines.enumerate() {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(Error::parse("vocabulary", i + 2, "empty or whitespace token"));
            }
            if vocab.index.contains_key(line) {
                return Err(Error::parse("vocabulary", i + 2, format!("duplicate {line:?}")));
            }
            vocab.insert(line);
        }
        Ok(vocab)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vocabulary {
        Vocabulary::build(&[vec!["bleed", "infect", "bleed"]]).unwrap()
    }

    #[test]
    fn reserves_pad_and_unk() {
        let v = toy();
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(PAD), Some(PAD_TOKEN));
        assert_eq!(v.token(UNK), Some(UNK_TOKEN));
        assert_eq!(v.encode(&["bleed"], 10), vec![2]);
        assert_eq!(v.encode(&["fever"], 10), vec![UNK]);
    }

    #[test]
    fn corpus_token_named_pad_does_not_collide() {
        let v = Vocabulary::build(&[vec!["PAD", "x"]]).unwrap();
        assert_eq!(v.get("PAD"), Some(2));
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(toy(), toy());
        assert_eq!(toy().checksum(), toy().checksum());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let docs: Vec<Vec<&str>> = Vec::new();
        assert!(matches!(Vocabulary::build(&docs), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn encode_truncates_without_padding() {
        let v = toy();
        let toks: Vec<&str> = std::iter::repeat_n("infect", 3000).collect();
        let ids = v.encode(&toks, 2500);
        assert_eq!(ids.len(), 2500);
        assert!(ids.iter().all(|&i| i == 3));
        assert_eq!(v.encode(&["bleed"], 5).len(), 1);
    }

    #[test]
    fn file_round_trip() {
        let v = toy();
        let text = v.to_file_string();
        assert!(text.starts_with("#vocab v1"));
        assert_eq!(text.lines().nth(1), Some("bleed"));
        assert_eq!(Vocabulary::parse(&text).unwrap(), v);
        assert!(Vocabulary::parse("bleed\n").is_err());
    }
}
