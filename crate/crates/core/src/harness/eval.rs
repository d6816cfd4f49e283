use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, ScoreMatrix, METRIC_KEYS};
use crate::model::Model;
use crate::preprocess::{Document, LabelSet};

/// Probabilities for every document, in inference mode.
pub fn score_matrix(model: &Model, docs: &[Document]) -> Result<ScoreMatrix> {
    let l = model.config.num_labels;
    let mut scores = Vec::with_capacity(docs.len() * l);
    let mut truth = Vec::with_capacity(docs.len() * l);
    for doc in docs {
        scores.extend(model.predict(&doc.tokens)?.probs);
        truth.extend((0..l).map(|j| doc.labels.contains(&j)));
    }
    Ok(ScoreMatrix::new(docs.len(), l, scores, truth)?)
}

pub fn evaluate(model: &Model, docs: &[Document], k: usize) -> Result<MetricsReport> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(MetricsReport::compute(&score_matrix(model, docs)?, k)?)
}

/// Writes `<stem>.json` and `<stem>.txt`.
pub fn write_report(stem: &Path, report: &MetricsReport) -> Result<()> {
    for (ext, text) in [("json", report.to_json()), ("txt", report.to_text())] {
        let p = stem.with_extension(ext);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

/// Per-label attention over one document's tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub doc_id: String,
    pub tokens: Vec<String>,
    /// `(label name, probability, weights over tokens)`
    pub rows: Vec<(String, f64, Vec<f64>)>,
}

pub fn attend(
    model: &Model,
    doc: &Document,
    labels: &LabelSet,
    requested: &[String],
) -> Result<AttentionReport> {
    let indices: Vec<usize> = requested
        .iter()
        .map(|n| labels.index_of(n))
        .collect::<Result<_>>()?;
    let pred = model.predict(&doc.tokens)?;
    let rows = requested
        .iter()
        .zip(indices)
        .map(|(name, l)| (name.clone(), pred.probs[l], pred.attention.row(l).to_vec()))
        .collect();
    Ok(AttentionReport {
        doc_id: doc.id.clone(),
        tokens: doc.raw_tokens.clone(),
        rows,
    })
}

/// Background intensity in `[0, 1]`: the weight divided by the row maximum.
pub fn intensities(weights: &[f64]) -> Vec<f64> {
    let max = weights.iter().cloned().fold(0.0, f64::max);
    weights
        .iter()
        .map(|&w| if max > 0.0 { w / max } else { 0.0 })
        .collect()
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl AttentionReport {
    /// One block per label: a `# label` header line, then `token TAB weight`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (name, prob, weights) in &self.rows {
            let _ = writeln!(s, "# doc {} label {name} probability {prob:.6}", self.doc_id);
            for (t, w) in self.tokens.iter().zip(weights) {
                let _ = writeln!(s, "{t}\t{w:.8}");
            }
        }
        s
    }

    /// Static page with each token shaded by its normalized weight.
    pub fn to_html(&self) -> String {
        let mut s = String::from(
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>attention</title>\n\
             <style>body{font-family:sans-serif;max-width:60em}span{padding:1px 2px;margin:1px;\
             display:inline-block}</style></head><body>\n",
        );
        let _ = writeln!(s, "<h1>{}</h1>", escape_html(&self.doc_id));
        for (name, prob, weights) in &self.rows {
            let _ = writeln!(
                s,
                "<h2>{} (p = {prob:.3})</h2>\n<p>",
                escape_html(name)
            );
            for ((t, w), a) in self.tokens.iter().zip(weights).zip(intensities(weights)) {
                let _ = write!(
                    s,
                    "<span title=\"{w:.6}\" style=\"background:rgba(220,30,30,{a:.4})\">{}</span> ",
                    escape_html(t)
                );
            }
            s.push_str("\n</p>\n");
        }
        s.push_str("</body></html>\n");
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [("attention.tsv", self.to_tsv()), ("attention.html", self.to_html())] {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// How often a label's attention peaks on its trigger token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerFidelity {
    /// Documents with at least one true label whose trigger is present.
    pub docs: usize,
    /// Of those, documents where every such label's attention argmax is a trigger position.
    pub docs_hit: usize,
    /// (document, label) pairs with the trigger present.
    pub pairs: usize,
    pub pairs_hit: usize,
}

impl TriggerFidelity {
    pub fn doc_rate(&self) -> f64 {
        self.docs_hit as f64 / self.docs.max(1) as f64
    }

    pub fn pair_rate(&self) -> f64 {
        self.pairs_hit as f64 / self.pairs.max(1) as f64
    }
}

/// `trigger_ids[l]` is the vocabulary index of label `l`'s trigger.
pub fn trigger_fidelity(
    model: &Model,
    docs: &[Document],
    trigger_ids: &[usize],
) -> Result<TriggerFidelity> {
    let mut f = TriggerFidelity {
        docs: 0,
        docs_hit: 0,
        pairs: 0,
        pairs_hit: 0,
    };
    for doc in docs {
        let present: Vec<usize> = doc
            .labels
            .iter()
            .copied()
            .filter(|&l| doc.tokens.contains(&trigger_ids[l]))
            .collect();
        if present.is_empty() {
            continue;
        }
        let attention = model.predict(&doc.tokens)?.attention;
        let mut all = true;
        for l in present {
            let row = attention.row(l);
            let argmax = crate::metrics::top_k(row, 1)[0];
            let hit = doc.tokens[argmax] == trigger_ids[l];
            f.pairs += 1;
            f.pairs_hit += usize::from(hit);
            all &= hit;
        }
        f.docs += 1;
        f.docs_hit += usize::from(all);
    }
    Ok(f)
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub key: String,
    pub mean: f64,
    pub stdev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub runs: usize,
    pub k: usize,
    pub metrics: Vec<MetricSummary>,
}

/// Aggregates per-seed reports. The deviation uses the `n − 1` denominator
/// and is 0 for a single run.
pub fn aggregate(reports: &[MetricsReport]) -> Result<SeedReport> {
    let first = reports.first().ok_or_else(|| Error::Validation("no reports to aggregate".into()))?;
    if reports.iter().any(|r| r.k != first.k) {
        return Err(Error::Validation("reports use different k".into()));
    }
    let n = reports.len() as f64;
    let metrics = METRIC_KEYS
        .iter()
        .map(|&key| {
            let vals: Vec<f64> = reports.iter().map(|r| r.get(key).expect("known key")).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let stdev = if reports.len() > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            MetricSummary {
                key: key.to_string(),
                mean,
                stdev,
            }
        })
        .collect();
    Ok(SeedReport {
        runs: reports.len(),
        k: first.k,
        metrics,
    })
}

impl SeedReport {
    /// `key mean ± stdev` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for m in &self.metrics {
            let _ = writeln!(s, "{} {:.6} ± {:.6}", m.key, m.mean, m.stdev);
        }
        let _ = writeln!(s, "k {}", self.k);
        let _ = writeln!(s, "runs {}", self.runs);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(micro_auc: f64) -> MetricsReport {
        MetricsReport {
            macro_auc: 0.5,
            micro_auc,
            macro_f1: 0.1,
            micro_f1: 0.2,
            p_at_k: 0.3,
            k: 5,
            skipped_labels: vec![],
        }
    }

    #[test]
    fn intensity_peaks_at_row_max() {
        assert_eq!(intensities(&[0.7, 0.2, 0.1])[0], 1.0);
        let i = intensities(&[0.1, 0.6, 0.3]);
        assert!(i[1] > i[2] && i[2] > i[0]);
    }

    #[test]
    fn aggregate_uses_sample_deviation() {
        let r = aggregate(&[report(0.9), report(0.8), report(1.0)]).unwrap();
        let auc = r.metrics.iter().find(|m| m.key == "micro_auc").unwrap();
        assert!((auc.mean - 0.9).abs() < 1e-12);
        assert!((auc.stdev - 0.1).abs() < 1e-12);
        let text = r.to_text();
        for key in METRIC_KEYS {
            assert!(text.contains(&format!("{key} ")));
        }
        assert!(text.contains("±"));
        assert_eq!(aggregate(&[report(0.9)]).unwrap().metrics[1].stdev, 0.0);
        assert!(aggregate(&[]).is_err());
    }
}
