use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and behaviour of the network. `d_model` equals the embedding width
/// and is preserved through the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub num_labels: usize,
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub d_attn: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub positional_encoding: bool,
    /// Multiply embeddings by `sqrt(d_model)` before adding positions.
    pub scale_embeddings: bool,
    pub mask_padding: bool,
    pub shared_head: bool,
}

impl ModelConfig {
    /// Defaults for everything but the data-dependent sizes: 2 layers,
    /// 8 heads, `d_ff = 4·d`, `d_attn = 2·d`, dropout 0.1.
    pub fn new(vocab_size: usize, num_labels: usize, d_model: usize, max_len: usize) -> Self {
        Self {
            vocab_size,
            num_labels,
            d_model,
            layers: 2,
            heads: 8,
            d_ff: 4 * d_model,
            d_attn: 2 * d_model,
            dropout: 0.1,
            max_len,
            positional_encoding: true,
            scale_embeddings: false,
            mask_padding: true,
            shared_head: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vocab_size < 3 {
            return fail(format!("vocab_size {} leaves no room for corpus tokens", self.vocab_size));
        }
        if self.num_labels == 0 || self.max_len == 0 || self.d_ff == 0 || self.d_attn == 0 {
            return fail("num_labels, max_len, d_ff and d_attn must be >= 1".into());
        }
        if self.d_model < 2 {
            return fail(format!("d_model must be >= 2, got {}", self.d_model));
        }
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return fail(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ModelConfig::new(100, 10, 32, 64);
        c.validate().unwrap();
        assert_eq!(c.d_attn, 64);
        assert_eq!(c.d_ff, 128);
        assert_eq!(ModelConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_indivisible_heads_and_bad_dropout() {
        let mut c = ModelConfig::new(100, 10, 30, 64);
        assert!(c.validate().is_err());
        c.heads = 3;
        c.validate().unwrap();
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = ModelConfig::new(100, 10, 32, 64).to_toml() + "bogus = 1\n";
        assert!(ModelConfig::from_toml(&text).is_err());
    }
}
