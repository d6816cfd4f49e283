//! Long-tailed synthetic corpora with known trigger tokens.
//!
//! Label `l` is drawn independently with probability `head_rate · γ^l`
//! (empty label sets are redrawn). A document is a run of noise words; for
//! each true label its trigger word is inserted at a random position with
//! probability `trigger_strength`. Documents belong to synthetic patients,
//! and whole patients are assigned to train/valid/test.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{pipeline, write_labels, write_records, LabelSet, PrepConfig, RawRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub num_docs: usize,
    pub num_labels: usize,
    pub vocab_noise_size: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    pub tail_decay: f64,
    pub trigger_strength: f64,
    pub head_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub valid_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_docs: 2000,
            num_labels: 10,
            vocab_noise_size: 500,
            doc_len_min: 30,
            doc_len_max: 50,
            tail_decay: 0.7,
            trigger_strength: 0.9,
            head_rate: 0.8,
            seed: 1,
            train_fraction: 0.7,
            valid_fraction: 0.15,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.num_labels == 0 {
            return fail("num_labels must be >= 1".into());
        }
        if self.num_docs < 10 * self.num_labels {
            return fail(format!(
                "num_docs {} is below 10 x num_labels ({})",
                self.num_docs,
                10 * self.num_labels
            ));
        }
        if self.doc_len_min < self.num_labels || self.doc_len_max < self.doc_len_min {
            return fail(format!(
                "doc_len range {}..={} must start at or above the label count {}",
                self.doc_len_min, self.doc_len_max, self.num_labels
            ));
        }
        if self.vocab_noise_size == 0 {
            return fail("vocab_noise_size must be >= 1".into());
        }
        for (name, v) in [
            ("tail_decay", self.tail_decay),
            ("trigger_strength", self.trigger_strength),
            ("head_rate", self.head_rate),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        let (t, v) = (self.train_fraction, self.valid_fraction);
        if !(t > 0.0 && v >= 0.0 && t + v < 1.0) {
            return fail(format!("split fractions train {t}, valid {v} leave no test split"));
        }
        Ok(())
    }

    /// Marginal probability of label `l`.
    pub fn label_rate(&self, l: usize) -> f64 {
        self.head_rate * self.tail_decay.powi(l as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<RawRecord>,
    pub valid: Vec<RawRecord>,
    pub test: Vec<RawRecord>,
    pub labels: Vec<String>,
    /// `triggers[l]` is the trigger word of label `l`.
    pub triggers: Vec<String>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "pl",
    "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["b", "d", "g", "k", "m", "n", "p", "r", "t", "x"];

fn candidate_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
    }
    w.push_str(CODAS.choose(rng).expect("non-empty"));
    w
}

/// `count` distinct pseudo-words that pass through preprocessing unchanged.
fn word_pool(count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let config = PrepConfig::default();
    let mut seen = BTreeSet::new();
    let mut words = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while words.len() < count {
        attempts += 1;
        if attempts > 100 * count + 1000 {
            return Err(Error::Spec(format!("could not draw {count} distinct words")));
        }
        let w = candidate_word(rng);
        if pipeline(&w, &config) == [w.as_str()] && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    Ok(words)
}

pub fn label_name(l: usize, num_labels: usize) -> String {
    let width = num_labels.saturating_sub(1).to_string().len().max(2);
    format!("L{l:0width$}")
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pool = word_pool(spec.vocab_noise_size + spec.num_labels, &mut rng)?;
    let (triggers, noise) = pool.split_at(spec.num_labels);
    let labels: Vec<String> = (0..spec.num_labels)
        .map(|l| label_name(l, spec.num_labels))
        .collect();

    // Patients own 1 to 3 consecutive documents.
    let mut patients: Vec<Vec<RawRecord>> = Vec::new();
    let mut made = 0;
    while made < spec.num_docs {
        let n = rng.gen_range(1..=3).min(spec.num_docs - made);
        let pid = patients.len();
        let docs = (0..n)
            .map(|k| {
                let record = document(spec, &labels, triggers, noise, &mut rng);
                RawRecord {
                    id: format!("p{pid:05}-{k}"),
                    ..record
                }
            })
            .collect();
        patients.push(docs);
        made += n;
    }

    patients.shuffle(&mut rng);
    let train_cut = (spec.train_fraction * spec.num_docs as f64).round() as usize;
    let valid_cut = train_cut + (spec.valid_fraction * spec.num_docs as f64).round() as usize;
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut assigned = 0;
    for docs in patients {
        let split = if assigned < train_cut {
            &mut train
        } else if assigned < valid_cut {
            &mut valid
        } else {
            &mut test
        };
        assigned += docs.len();
        split.extend(docs);
    }
    for split in [&mut train, &mut valid, &mut test] {
        split.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(SynthCorpus {
        train,
        valid,
        test,
        labels,
        triggers: triggers.to_vec(),
    })
}

fn document(
    spec: &SynthSpec,
    labels: &[String],
    triggers: &[String],
    noise: &[String],
    rng: &mut ChaCha8Rng,
) -> RawRecord {
    let true_labels: Vec<usize> = loop {
        let drawn: Vec<usize> = (0..spec.num_labels)
            .filter(|&l| rng.gen::<f64>() < spec.label_rate(l))
            .collect();
        if !drawn.is_empty() {
            break drawn;
        }
    };
    let len = rng.gen_range(spec.doc_len_min..=spec.doc_len_max);
    let mut words: Vec<&str> = (0..len)
        .map(|_| noise.choose(rng).expect("non-empty").as_str())
        .collect();
    for &l in &true_labels {
        if rng.gen::<f64>() < spec.trigger_strength {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, &triggers[l]);
        }
    }
    RawRecord {
        id: String::new(),
        labels: true_labels.iter().map(|&l| labels[l].clone()).collect(),
        text: words.join(" "),
    }
}

impl SynthCorpus {
    /// Writes `train.tsv`, `valid.tsv`, `test.tsv`, `labels.txt` and
    /// `triggers.txt` (`label TAB trigger`) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_records(&dir.join("train.tsv"), &self.train)?;
        write_records(&dir.join("valid.tsv"), &self.valid)?;
        write_records(&dir.join("test.tsv"), &self.test)?;
        write_labels(&dir.join("labels.txt"), &LabelSet::new(self.labels.clone())?)?;
        let mut s = String::new();
        for (l, t) in self.labels.iter().zip(&self.triggers) {
            s.push_str(&format!("{l}\t{t}\n"));
        }
        let path = dir.join("triggers.txt");
        fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }
}

/// Reads a `label TAB trigger` file.
pub fn read_triggers(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.split_once('\t')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| Error::parse("triggers", i + 1, "expected `label TAB trigger`"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label_counts(c: &SynthCorpus) -> Vec<usize> {
        let mut counts = vec![0; c.labels.len()];
        for r in c.train.iter().chain(&c.valid).chain(&c.test) {
            for l in &r.labels {
                counts[c.labels.iter().position(|x| x == l).unwrap()] += 1;
            }
        }
        counts
    }

    #[test]
    fn uniform_decay_gives_equal_frequencies() {
        let spec = SynthSpec {
            num_labels: 4,
            tail_decay: 1.0,
            head_rate: 0.3,
            num_docs: 2000,
            ..SynthSpec::default()
        };
        let c = generate(&spec).unwrap();
        let counts = label_counts(&c);
        let mean = counts.iter().sum::<usize>() as f64 / 4.0;
        let p = mean / 2000.0;
        let sigma = (2000.0 * p * (1.0 - p)).sqrt();
        for &n in &counts {
            assert!((n as f64 - mean).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn long_tail_ratio() {
        let c = generate(&SynthSpec::default()).unwrap();
        let counts = label_counts(&c);
        for l in 0..5 {
            let ratio = counts[l + 1] as f64 / counts[l] as f64;
            assert!((ratio - 0.7).abs() <= 0.1, "label {l}: {counts:?}");
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec {
            num_docs: 200,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 2, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn patients_never_cross_splits() {
        let c = generate(&SynthSpec::default()).unwrap();
        let patient = |r: &RawRecord| r.id.split('-').next().unwrap().to_string();
        let sets: Vec<BTreeSet<String>> = [&c.train, &c.valid, &c.test]
            .iter()
            .map(|s| s.iter().map(patient).collect())
            .collect();
        assert!(sets[0].is_disjoint(&sets[1]));
        assert!(sets[0].is_disjoint(&sets[2]));
        assert!(sets[1].is_disjoint(&sets[2]));
        assert_eq!(c.train.len() + c.valid.len() + c.test.len(), 2000);
        assert!((c.train.len() as f64 - 1400.0).abs() <= 3.0);
    }

    #[test]
    fn words_survive_preprocessing_and_triggers_mark_labels() {
        let spec = SynthSpec {
            num_docs: 300,
            trigger_strength: 1.0,
            ..SynthSpec::default()
        };
        let c = generate(&spec).unwrap();
        let config = PrepConfig::default();
        for r in &c.train {
            let tokens = pipeline(&r.text, &config);
            assert_eq!(tokens.len(), r.text.split(' ').count());
            assert!(!r.labels.is_empty());
            for (l, t) in c.labels.iter().zip(&c.triggers) {
                assert_eq!(r.labels.contains(l), tokens.contains(t), "{}", r.id);
            }
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let short = SynthSpec {
            doc_len_min: 5,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&short).unwrap_err().kind(), "spec");
        let few = SynthSpec {
            num_docs: 50,
            ..SynthSpec::default()
        };
        assert!(generate(&few).is_err());
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            num_docs: 100,
            ..SynthSpec::default()
        };
        let c = generate(&spec).unwrap();
        c.write(dir.path()).unwrap();
        let triggers = read_triggers(&dir.path().join("triggers.txt")).unwrap();
        assert_eq!(triggers.len(), 10);
        assert_eq!(triggers[0].0, "L00");
        let back = crate::preprocess::read_records(&dir.path().join("test.tsv")).unwrap();
        assert_eq!(back, c.test);
    }
}
