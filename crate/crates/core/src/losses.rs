//! Multi-label binary cross-entropy and the label-distribution-aware margin
//! (LDAM) variant, which subtracts a per-label margin from the logits of
//! positive labels before the sigmoid.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kernels, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Ldam,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bce" => Ok(LossKind::Bce),
            "ldam" => Ok(LossKind::Ldam),
            _ => Err(Error::Config(format!("unknown loss {s:?} (expected bce or ldam)"))),
        }
    }
}

/// `-Σ_l [y_l ln p_l + (1-y_l) ln(1-p_l)]`, probabilities clamped to `[1e-12, 1-1e-12]`.
pub fn bce(y: &[f64], probs: &[f64]) -> Result<f64> {
    if y.len() != probs.len() {
        return Err(Error::Shape(format!(
            "bce: {} targets vs {} probabilities",
            y.len(),
            probs.len()
        )));
    }
    Ok(kernels::bce_sum(y, probs))
}

/// `Δ_l = C / n_l^{1/4}` with `n_l` floored at 1.
///
/// The fourth root is taken as two square roots: `sqrt` is correctly rounded,
/// so perfect fourth powers such as 16 and 81 give exact margins.
pub fn ldam_margins(counts: &[i64], c: f64) -> Result<Vec<f64>> {
    if c < 0.0 || !c.is_finite() {
        return Err(Error::Validation(format!("margin constant must be >= 0, got {c}")));
    }
    counts
        .iter()
        .map(|&n| {
            if n < 0 {
                return Err(Error::Validation(format!("negative label count {n}")));
            }
            let n = n.max(1) as f64;
            Ok(c / n.sqrt().sqrt())
        })
        .collect()
}

/// Per-label training counts and the margins derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    pub counts: Vec<u64>,
    pub c: f64,
    pub margins: Vec<f64>,
}

impl LabelStats {
    pub fn new(counts: Vec<u64>, c: f64) -> Result<Self> {
        let signed: Vec<i64> = counts.iter().map(|&n| n as i64).collect();
        let margins = ldam_margins(&signed, c)?;
        Ok(Self { counts, c, margins })
    }

    /// Counts the documents carrying each label. Pass the training split only.
    pub fn from_label_sets<'a, I>(num_labels: usize, label_sets: I, c: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a std::collections::BTreeSet<usize>>,
    {
        let mut counts = vec![0u64; num_labels];
        for set in label_sets {
            for &l in set {
                if l >= num_labels {
                    return Err(Error::Validation(format!(
                        "label index {l} out of range for {num_labels} labels"
                    )));
                }
                counts[l] += 1;
            }
        }
        Self::new(counts, c)
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    /// Per-label logit shifts for one document: `Δ_l` on positives, 0 elsewhere.
    pub fn shifts(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.margins)
            .map(|(&yl, &m)| if yl == 1.0 { m } else { 0.0 })
            .collect()
    }

    /// `label_index TAB count TAB margin` lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (i, (n, m)) in self.counts.iter().zip(&self.margins).enumerate() {
            let _ = writeln!(s, "{i}\t{n}\t{m}");
        }
        s
    }

    /// Reads a table written by [`to_tsv`](Self::to_tsv); margins are
    /// recomputed from the counts with constant `c` and checked against the file.
    pub fn parse_tsv(text: &str, c: f64) -> Result<Self> {
        let mut counts = Vec::new();
        let mut margins_in = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::parse("label stats", i + 1, "expected `index TAB count TAB margin`");
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(counts.len()) {
                return Err(bad());
            }
            counts.push(f[1].parse::<u64>().map_err(|_| bad())?);
            margins_in.push(f[2].parse::<f64>().map_err(|_| bad())?);
        }
        let stats = Self::new(counts, c)?;
        if stats.margins != margins_in {
            return Err(Error::Validation(format!(
                "label stats margins do not match C = {c}"
            )));
        }
        Ok(stats)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// LDAM on plain values: subtract `Δ_l` from positive logits, sigmoid, BCE.
pub fn ldam_loss(y: &[f64], logits: &[f64], stats: &LabelStats) -> Result<f64> {
    ldam_loss_scaled(y, logits, stats, 1.0)
}

/// LDAM with an optional logit scale `s` applied after the margin shift.
pub fn ldam_loss_scaled(y: &[f64], logits: &[f64], stats: &LabelStats, s: f64) -> Result<f64> {
    if y.len() != logits.len() || y.len() != stats.num_labels() {
        return Err(Error::Shape(format!(
            "ldam: {} targets, {} logits, {} labels",
            y.len(),
            logits.len(),
            stats.num_labels()
        )));
    }
    let shifts = stats.shifts(y);
    let probs: Vec<f64> = logits
        .iter()
        .zip(&shifts)
        .map(|(&z, &d)| kernels::sigmoid(s * (z - d)))
        .collect();
    bce(y, &probs)
}

/// Training-loss configuration applied to a logits vector on the tape.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Bce,
    Ldam { stats: LabelStats, scale: f64 },
}

impl Objective {
    /// Summed-over-labels loss for one document's `[L]` logits.
    pub fn apply<'t>(&self, logits: Var<'t>, y: &[f64]) -> Result<Var<'t>> {
        let out = match self {
            Objective::Bce => logits.bce_with_logits(y, &vec![0.0; y.len()], 1.0)?,
            Objective::Ldam { stats, scale } => {
                if stats.num_labels() != y.len() {
                    return Err(Error::Shape(format!(
                        "ldam: stats for {} labels, targets for {}",
                        stats.num_labels(),
                        y.len()
                    )));
                }
                logits.bce_with_logits(y, &stats.shifts(y), *scale)?
            }
        };
        Ok(out)
    }

    /// Value-only version of [`apply`](Self::apply).
    pub fn value(&self, logits: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Objective::Bce => {
                let probs: Vec<f64> = logits.iter().map(|&z| kernels::sigmoid(z)).collect();
                bce(y, &probs)
            }
            Objective::Ldam { stats, scale } => ldam_loss_scaled(y, logits, stats, *scale),
        }
    }
}
