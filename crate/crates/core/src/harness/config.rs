use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::model::ModelConfig;

/// Everything a training run needs. Read from a flat TOML file; unknown keys
/// are rejected and `key=value` overrides are applied before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train_corpus: PathBuf,
    pub valid_corpus: PathBuf,
    /// Optional; when set, the selected checkpoint is also scored on it.
    pub test_corpus: Option<PathBuf>,
    pub vocab: PathBuf,
    pub labels: PathBuf,
    pub embeddings: PathBuf,
    pub out_dir: PathBuf,

    /// Must equal the embedding width.
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    /// 0 means `4 · d_model`.
    pub d_ff: usize,
    /// 0 means `2 · d_model`.
    pub d_attn: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub positional_encoding: bool,
    pub scale_embeddings: bool,
    pub mask_padding: bool,
    pub shared_head: bool,
    pub freeze_embeddings: bool,

    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    /// LDAM margin constant.
    pub margin_c: f64,
    /// Logit scale inside the LDAM sigmoid; 1 applies no scaling.
    pub ldam_scale: f64,
    pub seed: u64,
    pub k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train_corpus: "data/train.tsv".into(),
            valid_corpus: "data/valid.tsv".into(),
            test_corpus: None,
            vocab: "data/vocab.txt".into(),
            labels: "data/labels.txt".into(),
            embeddings: "data/embeddings.txt".into(),
            out_dir: "runs/default".into(),
            d_model: 128,
            layers: 2,
            heads: 8,
            d_ff: 0,
            d_attn: 0,
            dropout: 0.1,
            max_len: 2500,
            positional_encoding: true,
            scale_embeddings: false,
            mask_padding: true,
            shared_head: false,
            freeze_embeddings: false,
            lr: 0.001,
            epochs: 30,
            batch_size: 8,
            loss: LossKind::Bce,
            margin_c: 3.0,
            ldam_scale: 1.0,
            seed: 1,
            k: 5,
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string so paths
/// and loss names need no quoting on the command line.
fn override_value(value: &str) -> toml::Value {
    let probe = format!("v = {value}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

impl RunConfig {
    /// Builds a config from TOML text plus `key=value` overrides.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            table.insert(k.trim().to_string(), override_value(v.trim()));
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.batch_size == 0 || self.k == 0 {
            return fail("epochs, batch_size and k must be >= 1".into());
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.margin_c < 0.0 || !self.margin_c.is_finite() || self.ldam_scale <= 0.0 || !self.ldam_scale.is_finite() {
            return fail("margin_c must be >= 0 and ldam_scale > 0".into());
        }
        self.model_config(3, 1).validate()
    }

    /// Model shape for a given vocabulary and label count.
    pub fn model_config(&self, vocab_size: usize, num_labels: usize) -> ModelConfig {
        let d = self.d_model;
        ModelConfig {
            vocab_size,
            num_labels,
            d_model: d,
            layers: self.layers,
            heads: self.heads,
            d_ff: if self.d_ff == 0 { 4 * d } else { self.d_ff },
            d_attn: if self.d_attn == 0 { 2 * d } else { self.d_attn },
            dropout: self.dropout,
            max_len: self.max_len,
            positional_encoding: self.positional_encoding,
            scale_embeddings: self.scale_embeddings,
            mask_padding: self.mask_padding,
            shared_head: self.shared_head,
        }
    }
}
