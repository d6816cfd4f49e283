//! The TransICD network: embedding lookup, transformer encoder, code-wise
//! label attention and per-label output heads.

mod checkpoint;
mod config;
mod params;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use params::{Bound, LayerParam, Layout, ModelParams, LAYER_PARAMS};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::preprocess::PAD;

/// Inference mode, or training mode with the RNG that draws dropout masks.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
}

/// Sinusoidal position table `[n×d]`: sin on even columns, cos on odd ones.
pub fn positional_encoding(n: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * d);
    for pos in 0..n {
        for j in 0..d {
            let rate = 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            data.push(if j % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::matrix(n, d, data).expect("n, d >= 1")
}

/// `true` where the token is real, `false` on padding.
pub fn pad_mask(ids: &[usize]) -> Vec<bool> {
    ids.iter().map(|&i| i != PAD).collect()
}

fn dropout<'t>(tape: &'t Tape, x: Var<'t>, p: f64, mode: &mut Mode<'_>) -> Result<Var<'t>> {
    match mode {
        Mode::Train(rng) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            let shape = x.shape();
            let n: usize = shape.iter().product();
            let mask = (0..n)
                .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                .collect();
            Ok(x.mul(tape.constant(Tensor::new(shape, mask)?))?)
        }
        _ => Ok(x),
    }
}

/// Encoder output `H` `[n×d]` for one (possibly padded) document.
pub fn encode<'t>(
    tape: &'t Tape,
    bound: &Bound<'t>,
    config: &ModelConfig,
    ids: &[usize],
    mask: &[bool],
    mode: &mut Mode<'_>,
) -> Result<Var<'t>> {
    if ids.len() > config.max_len {
        return Err(Error::Shape(format!(
            "sequence of {} tokens exceeds max_len {}",
            ids.len(),
            config.max_len
        )));
    }
    let layout = Layout::new(config);
    let mut x = bound.get(Layout::EMBEDDINGS).gather_rows(ids)?;
    if config.scale_embeddings {
        x = x.scale((config.d_model as f64).sqrt());
    }
    if config.positional_encoding {
        x = x.add(tape.constant(positional_encoding(ids.len(), config.d_model)))?;
    }
    x = dropout(tape, x, config.dropout, mode)?;
    let key_mask = config.mask_padding.then_some(mask);
    for l in 0..config.layers {
        x = encoder_layer(tape, bound, &layout, config, l, x, key_mask, mode)?;
    }
    Ok(x)
}

#[allow(clippy::too_many_arguments)]
fn encoder_layer<'t>(
    tape: &'t Tape,
    bound: &Bound<'t>,
    layout: &Layout,
    config: &ModelConfig,
    layer: usize,
    x: Var<'t>,
    key_mask: Option<&[bool]>,
    mode: &mut Mode<'_>,
) -> Result<Var<'t>> {
    let p = |which| bound.get(layout.layer(layer, which));
    let q = x.matmul(p(LayerParam::Wq))?.add(p(LayerParam::Bq))?;
    let k = x.matmul(p(LayerParam::Wk))?.add(p(LayerParam::Bk))?;
    let v = x.matmul(p(LayerParam::Wv))?.add(p(LayerParam::Bv))?;
    let dk = config.head_dim();
    let inv_sqrt = 1.0 / (dk as f64).sqrt();
    let mut outs = Vec::with_capacity(config.heads);
    for h in 0..config.heads {
        let (qh, kh, vh) = if config.heads == 1 {
            (q, k, v)
        } else {
            (
                q.slice_cols(h * dk, dk)?,
                k.slice_cols(h * dk, dk)?,
                v.slice_cols(h * dk, dk)?,
            )
        };
        let weights = qh.matmul_t(kh)?.scale(inv_sqrt).softmax(key_mask)?;
        outs.push(weights.matmul(vh)?);
    }
    let joined = if outs.len() == 1 {
        outs[0]
    } else {
        Var::concat_cols(&outs)?
    };
    let attn = joined.matmul(p(LayerParam::Wo))?.add(p(LayerParam::Bo))?;
    let attn = dropout(tape, attn, config.dropout, mode)?;
    let x = x
        .add(attn)?
        .layer_norm(p(LayerParam::Ln1Gain), p(LayerParam::Ln1Bias))?;
    let ff = x
        .matmul(p(LayerParam::W1))?
        .add(p(LayerParam::B1))?
        .relu()
        .matmul(p(LayerParam::W2))?
        .add(p(LayerParam::B2))?;
    let ff = dropout(tape, ff, config.dropout, mode)?;
    Ok(x.add(ff)?.layer_norm(p(LayerParam::Ln2Gain), p(LayerParam::Ln2Bias))?)
}

/// Code-wise attention: `A = softmax(V·tanh(H·U)ᵀ)` over unmasked positions
/// (`[L×n]`) and the label-specific document vectors `C = A·H` (`[L×d]`).
pub fn label_attention<'t>(
    h: Var<'t>,
    mask: Option<&[bool]>,
    attn_u: Var<'t>,
    attn_v: Var<'t>,
) -> Result<(Var<'t>, Var<'t>)> {
    let s = h.matmul(attn_u)?.tanh();
    let a = attn_v.matmul_t(s)?.softmax(mask)?;
    let c = a.matmul(h)?;
    Ok((a, c))
}

/// Per-label logits `z_l = Z_l·c_l + b_l`, or one shared `Z`, `b` for all labels.
pub fn classify<'t>(c: Var<'t>, z: Var<'t>, b: Var<'t>, shared: bool) -> Result<Var<'t>> {
    if shared {
        let labels = c.shape()[0];
        Ok(c.matmul_t(z)?.add(b)?.reshape(vec![labels])?)
    } else {
        Ok(c.mul(z)?.row_sum()?.add(b)?)
    }
}

/// Graph outputs for one document.
#[derive(Clone, Copy)]
pub struct DocGraph<'t> {
    /// `[L]`
    pub logits: Var<'t>,
    /// `[L×n]`
    pub attention: Var<'t>,
    /// `[L×d]`
    pub doc_reps: Var<'t>,
}

/// Builds the full forward graph for one document.
pub fn doc_graph<'t>(
    tape: &'t Tape,
    bound: &Bound<'t>,
    config: &ModelConfig,
    ids: &[usize],
    mode: &mut Mode<'_>,
) -> Result<DocGraph<'t>> {
    let layout = Layout::new(config);
    let mask = pad_mask(ids);
    let h = encode(tape, bound, config, ids, &mask, mode)?;
    let label_mask = config.mask_padding.then_some(mask.as_slice());
    let (attention, doc_reps) = label_attention(
        h,
        label_mask,
        bound.get(layout.attn_u()),
        bound.get(layout.attn_v()),
    )?;
    let logits = classify(
        doc_reps,
        bound.get(layout.heads_z()),
        bound.get(layout.heads_b()),
        config.shared_head,
    )?;
    Ok(DocGraph {
        logits,
        attention,
        doc_reps,
    })
}

/// Batched forward values. Documents are padded to the longest in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `[batch×L]`
    pub logits: Tensor,
    /// `[batch×L×n]`
    pub attention: Tensor,
    /// `[batch×L×d]`
    pub doc_reps: Tensor,
}

/// Predictions for one unpadded document.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// `[L×n]`
    pub attention: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn init(config: ModelConfig, embeddings: &EmbeddingMatrix, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, embeddings, seed)?;
        Ok(Self { config, params })
    }

    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.validate(&config)?;
        Ok(Self { config, params })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Pads every document with PAD to the longest one and runs each through
    /// the network. An empty document becomes a single PAD token, which the
    /// masked attention rejects.
    pub fn forward(&self, batch: &[Vec<usize>], mode: &mut Mode<'_>) -> Result<ForwardOutput> {
        if batch.is_empty() {
            return Err(Error::Shape("forward on an empty batch".into()));
        }
        let n = batch.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let (l, d) = (self.config.num_labels, self.config.d_model);
        let mut logits = Vec::with_capacity(batch.len() * l);
        let mut attention = Vec::with_capacity(batch.len() * l * n);
        let mut reps = Vec::with_capacity(batch.len() * l * d);
        for doc in batch {
            let mut ids = doc.clone();
            ids.resize(n, PAD);
            let tape = Tape::new();
            let bound = self.params.bind(&tape, false, false);
            let g = doc_graph(&tape, &bound, &self.config, &ids, mode)?;
            logits.extend_from_slice(g.logits.value().data());
            attention.extend_from_slice(g.attention.value().data());
            reps.extend_from_slice(g.doc_reps.value().data());
        }
        let b = batch.len();
        Ok(ForwardOutput {
            logits: Tensor::new(vec![b, l], logits)?,
            attention: Tensor::new(vec![b, l, n], attention)?,
            doc_reps: Tensor::new(vec![b, l, d], reps)?,
        })
    }

    /// Inference on one document at its own length.
    pub fn predict(&self, ids: &[usize]) -> Result<Prediction> {
        let ids: Vec<usize> = if ids.is_empty() { vec![PAD] } else { ids.to_vec() };
        let tape = Tape::new();
        let bound = self.params.bind(&tape, false, false);
        let g = doc_graph(&tape, &bound, &self.config, &ids, &mut Mode::Eval)?;
        let logits = g.logits.value().to_vec();
        let probs = logits.iter().map(|&z| crate::numerics::kernels::sigmoid(z)).collect();
        Ok(Prediction {
            logits,
            probs,
            attention: g.attention.value(),
        })
    }
}
