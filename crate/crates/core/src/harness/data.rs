use std::path::Path;

use crate::embeddings::{train_cbow, CbowConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::synth::{self, SynthCorpus, SynthSpec};
use crate::preprocess::{
    pipeline, read_labels, read_records, Document, LabelSet, PrepConfig, RawRecord, Vocabulary,
};

/// Runs the text pipeline over raw records; the output text is the
/// space-joined token stream.
pub fn preprocess_records(records: &[RawRecord], config: &PrepConfig) -> Vec<RawRecord> {
    records
        .iter()
        .map(|r| RawRecord {
            id: r.id.clone(),
            labels: r.labels.clone(),
            text: pipeline(&r.text, config).join(" "),
        })
        .collect()
}

/// Token lists of preprocessed records.
pub fn token_lists(records: &[RawRecord]) -> Vec<Vec<&str>> {
    records.iter().map(|r| r.text.split_whitespace().collect()).collect()
}

/// Encodes preprocessed records against a vocabulary and label set.
pub fn documents(
    records: &[RawRecord],
    vocab: &Vocabulary,
    labels: &LabelSet,
    max_len: usize,
) -> Result<Vec<Document>> {
    records
        .iter()
        .map(|r| {
            let tokens = r.text.split_whitespace().map(str::to_string).collect();
            Ok(Document::new(r.id.clone(), tokens, labels.indices(&r.labels)?, vocab, max_len))
        })
        .collect()
}

/// Encoded splits plus the artifacts they were encoded with.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Document>,
    pub valid: Vec<Document>,
    pub test: Option<Vec<Document>>,
    pub vocab: Vocabulary,
    pub labels: LabelSet,
    pub embeddings: EmbeddingMatrix,
}

impl Dataset {
    pub fn new(
        train: Vec<Document>,
        valid: Vec<Document>,
        test: Option<Vec<Document>>,
        vocab: Vocabulary,
        labels: LabelSet,
        embeddings: EmbeddingMatrix,
    ) -> Result<Self> {
        if train.is_empty() || valid.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if embeddings.vocab_size() != vocab.len() {
            return Err(Error::Incompatible(format!(
                "embeddings cover {} tokens, vocabulary has {}",
                embeddings.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Self {
            train,
            valid,
            test,
            vocab,
            labels,
            embeddings,
        })
    }

    /// Loads every artifact named in the config and checks that the
    /// embeddings were trained against this vocabulary.
    pub fn load(config: &super::RunConfig) -> Result<Self> {
        let vocab = Vocabulary::read(&config.vocab)?;
        let labels = read_labels(&config.labels)?;
        let (embeddings, checksum) = EmbeddingMatrix::read(&config.embeddings)?;
        if checksum != vocab.checksum() {
            return Err(Error::Incompatible(format!(
                "{} was built for vocabulary {checksum}, {} is {}",
                config.embeddings.display(),
                config.vocab.display(),
                vocab.checksum()
            )));
        }
        let load = |p: &Path| documents(&read_records(p)?, &vocab, &labels, config.max_len);
        let train = load(&config.train_corpus)?;
        let valid = load(&config.valid_corpus)?;
        let test = config.test_corpus.as_deref().map(load).transpose()?;
        Self::new(train, valid, test, vocab, labels, embeddings)
    }
}

/// Generates a synthetic corpus and runs it through preprocessing,
/// vocabulary building and CBOW training entirely in memory. CBOW sees the
/// training split only.
pub fn synthetic_dataset(
    spec: &SynthSpec,
    prep: &PrepConfig,
    cbow: &CbowConfig,
    max_len: usize,
) -> Result<(Dataset, SynthCorpus)> {
    let corpus = synth::generate(spec)?;
    let train = preprocess_records(&corpus.train, prep);
    let valid = preprocess_records(&corpus.valid, prep);
    let test = preprocess_records(&corpus.test, prep);
    let vocab = Vocabulary::build(&token_lists(&train))?;
    let labels = LabelSet::new(corpus.labels.clone())?;
    let encode = |recs: &[RawRecord]| documents(recs, &vocab, &labels, max_len);
    let (train, valid, test) = (encode(&train)?, encode(&valid)?, encode(&test)?);
    let cbow_docs: Vec<Vec<usize>> = train.iter().map(|d| d.tokens.clone()).collect();
    let embeddings = train_cbow(&cbow_docs, vocab.len(), cbow)?;
    let data = Dataset::new(train, valid, Some(test), vocab, labels, embeddings)?;
    Ok((data, corpus))
}
