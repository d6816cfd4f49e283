//! Multi-label evaluation: macro/micro ROC AUC, macro/micro F1 and
//! precision at k over a document × label score matrix.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("AUC is undefined when truth has a single class")]
    UndefinedAuc,
    #[error("no label has both classes present; macro AUC is undefined")]
    NoComputableLabel,
    #[error("k = {k} is out of range for {labels} labels")]
    KOutOfRange { k: usize, labels: usize },
    #[error("score matrix: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, MetricsError>;

/// Predicted probabilities and 0/1 truth, both `docs × labels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    docs: usize,
    labels: usize,
    scores: Vec<f64>,
    truth: Vec<bool>,
}

impl ScoreMatrix {
    pub fn new(docs: usize, labels: usize, scores: Vec<f64>, truth: Vec<bool>) -> Result<Self> {
        if docs == 0 || labels == 0 {
            return Err(MetricsError::Invalid("empty matrix".into()));
        }
        if scores.len() != docs * labels || truth.len() != docs * labels {
            return Err(MetricsError::Invalid(format!(
                "expected {} entries, got {} scores and {} truth values",
                docs * labels,
                scores.len(),
                truth.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(MetricsError::Invalid(format!("score {s} outside [0, 1]")));
        }
        Ok(Self {
            docs,
            labels,
            scores,
            truth,
        })
    }

    pub fn from_rows(scores: &[Vec<f64>], truth: &[Vec<bool>]) -> Result<Self> {
        let docs = scores.len();
        let labels = scores.first().map_or(0, Vec::len);
        if truth.len() != docs
            || scores.iter().any(|r| r.len() != labels)
            || truth.iter().any(|r| r.len() != labels)
        {
            return Err(MetricsError::Invalid("ragged or mismatched rows".into()));
        }
        Self::new(
            docs,
            labels,
            scores.concat(),
            truth.concat(),
        )
    }

    pub fn docs(&self) -> usize {
        self.docs
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn score(&self, doc: usize, label: usize) -> f64 {
        self.scores[doc * self.labels + label]
    }

    pub fn truth(&self, doc: usize, label: usize) -> bool {
        self.truth[doc * self.labels + label]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn truths(&self) -> &[bool] {
        &self.truth
    }

    fn column(&self, label: usize) -> (Vec<f64>, Vec<bool>) {
        (0..self.docs)
            .map(|d| (self.score(d, label), self.truth(d, label)))
            .unzip()
    }
}

/// Mann-Whitney AUC with midranks for ties:
/// P(score_pos > score_neg) + ½·P(score_pos = score_neg).
pub fn auc_binary(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(MetricsError::Invalid("scores and truth differ in length".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // Sum of (1-based) midranks of positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| truth[k]).count();
        rank_sum += midrank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Returns (macro, micro, skipped label indices).
pub fn macro_micro_auc(sm: &ScoreMatrix) -> Result<(f64, f64, Vec<usize>)> {
    let mut per_label = Vec::new();
    let mut skipped = Vec::new();
    for l in 0..sm.labels {
        let (s, t) = sm.column(l);
        match auc_binary(&s, &t) {
            Ok(a) => per_label.push(a),
            Err(MetricsError::UndefinedAuc) => skipped.push(l),
            Err(e) => return Err(e),
        }
    }
    if per_label.is_empty() {
        return Err(MetricsError::NoComputableLabel);
    }
    let macro_auc = per_label.iter().sum::<f64>() / per_label.len() as f64;
    let micro_auc = auc_binary(&sm.scores, &sm.truth)?;
    Ok((macro_auc, micro_auc, skipped))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn f1(self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Returns (macro, micro). Prediction is `score >= threshold`; a label with
/// no true and no predicted positives scores 0 and still counts in the macro mean.
pub fn macro_micro_f1(sm: &ScoreMatrix, threshold: f64) -> (f64, f64) {
    let mut per_label = vec![Counts::default(); sm.labels];
    for d in 0..sm.docs {
        for (l, c) in per_label.iter_mut().enumerate() {
            match (sm.score(d, l) >= threshold, sm.truth(d, l)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let macro_f1 = per_label.iter().map(|c| c.f1()).sum::<f64>() / sm.labels as f64;
    let pooled = per_label.iter().fold(Counts::default(), |acc, c| Counts {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
    });
    (macro_f1, pooled.f1())
}

/// Label indices of the `k` highest scores in one row; ties go to the lower index.
pub fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| {
        row[b]
            .partial_cmp(&row[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Mean over documents of |top-k ∩ truth| / k.
pub fn precision_at_k(sm: &ScoreMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > sm.labels {
        return Err(MetricsError::KOutOfRange {
            k,
            labels: sm.labels,
        });
    }
    let mut total = 0.0;
    for d in 0..sm.docs {
        let row = &sm.scores[d * sm.labels..(d + 1) * sm.labels];
        let hits = top_k(row, k).into_iter().filter(|&l| sm.truth(d, l)).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / sm.docs as f64)
}

pub const DEFAULT_K: usize = 5;
pub const THRESHOLD: f64 = 0.5;

/// Names of the metric fields, in report order.
pub const METRIC_KEYS: [&str; 5] = ["macro_auc", "micro_auc", "macro_f1", "micro_f1", "p_at_k"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub macro_auc: f64,
    pub micro_auc: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub p_at_k: f64,
    pub k: usize,
    pub skipped_labels: Vec<usize>,
}

impl MetricsReport {
    /// Computes every metric. `k` is clamped to the label count so small
    /// label sets still get a precision figure.
    pub fn compute(sm: &ScoreMatrix, k: usize) -> Result<Self> {
        let k = k.min(sm.labels);
        let (macro_auc, micro_auc, skipped_labels) = macro_micro_auc(sm)?;
        let (macro_f1, micro_f1) = macro_micro_f1(sm, THRESHOLD);
        let p_at_k = precision_at_k(sm, k)?;
        Ok(Self {
            macro_auc,
            micro_auc,
            macro_f1,
            micro_f1,
            p_at_k,
            k,
            skipped_labels,
        })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        match key {
            "macro_auc" => Some(self.macro_auc),
            "micro_auc" => Some(self.micro_auc),
            "macro_f1" => Some(self.macro_f1),
            "micro_f1" => Some(self.micro_f1),
            "p_at_k" => Some(self.p_at_k),
            _ => None,
        }
    }

    /// Flat `key value` lines, one metric per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in METRIC_KEYS {
            let _ = writeln!(s, "{key} {:.6}", self.get(key).unwrap_or_default());
        }
        let _ = writeln!(s, "k {}", self.k);
        let skipped: Vec<String> = self.skipped_labels.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "skipped_labels {}", skipped.join(","));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
