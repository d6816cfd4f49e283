//! Text normalization: raw note text to stemmed, digit-masked token streams,
//! plus the vocabulary and corpus files built from them.

mod corpus;
pub mod stemmer;
mod vocab;

use std::collections::HashSet;
use std::sync::OnceLock;

pub use corpus::{
    parse_records, read_labels, read_records, read_token_corpus, write_labels, write_records, Document, LabelSet,
    RawRecord,
};
pub use vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

const STOPWORDS_FILE: &str = include_str!("../../data/stopwords_en.txt");

/// The shipped English stopword list.
pub fn stopwords() -> &'static HashSet<String> {
    static LIST: OnceLock<HashSet<String>> = OnceLock::new();
    LIST.get_or_init(|| {
        STOPWORDS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepConfig {
    pub min_token_len: usize,
    pub remove_stopwords: bool,
    pub stem: bool,
    pub mask_digits: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            min_token_len: 3,
            remove_stopwords: true,
            stem: true,
            mask_digits: true,
        }
    }
}

/// Splits lowercased text into tokens. Anything that is neither alphanumeric
/// nor whitespace acts as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    let spaced: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    spaced.split_whitespace().map(str::to_string).collect()
}

fn is_number(token: &str) -> bool {
    token.chars().all(char::is_numeric)
}

fn char_len(token: &str) -> usize {
    token.chars().count()
}

/// Full normalization pipeline, in order: lowercase, tokenize (punctuation
/// becomes a separator), drop standalone numbers, drop stopwords, drop short
/// tokens, stem, mask remaining digits as `n`.
///
/// Stemming can shorten a token below the minimum length (`ads` → `ad`), so
/// the length filter is applied once more at the end.
pub fn pipeline(text: &str, config: &PrepConfig) -> Vec<String> {
    let stop = stopwords();
    tokenize(&text.to_lowercase())
        .into_iter()
        .filter(|t| !is_number(t))
        .filter(|t| !config.remove_stopwords || !stop.contains(t.as_str()))
        .filter(|t| char_len(t) >= config.min_token_len)
        .map(|t| if config.stem { stemmer::stem(&t) } else { t })
        .map(|t| {
            if config.mask_digits {
                t.chars()
                    .map(|c| if c.is_numeric() { 'n' } else { c })
                    .collect()
            } else {
                t
            }
        })
        .filter(|t| char_len(t) >= config.min_token_len)
        .collect()
}
