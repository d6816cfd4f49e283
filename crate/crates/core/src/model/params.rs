//! Parameter storage. Every trainable tensor sits in one flat, named list
//! whose order is fixed by the configuration; the same order is used for
//! bound tape variables, gradients, optimizer state and checkpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::preprocess::PAD;

/// Per-layer tensors, in storage order.
pub const LAYER_PARAMS: [&str; 16] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "w1", "b1", "w2", "b2", "ln1_gain",
    "ln1_bias", "ln2_gain", "ln2_bias",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerParam {
    Wq,
    Bq,
    Wk,
    Bk,
    Wv,
    Bv,
    Wo,
    Bo,
    W1,
    B1,
    W2,
    B2,
    Ln1Gain,
    Ln1Bias,
    Ln2Gain,
    Ln2Bias,
}

/// Index arithmetic over the flat parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    layers: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            layers: config.layers,
        }
    }

    pub const EMBEDDINGS: usize = 0;

    pub fn layer(&self, layer: usize, p: LayerParam) -> usize {
        debug_assert!(layer < self.layers);
        1 + layer * LAYER_PARAMS.len() + p as usize
    }

    fn tail(&self) -> usize {
        1 + self.layers * LAYER_PARAMS.len()
    }

    pub fn attn_u(&self) -> usize {
        self.tail()
    }

    pub fn attn_v(&self) -> usize {
        self.tail() + 1
    }

    pub fn heads_z(&self) -> usize {
        self.tail() + 2
    }

    pub fn heads_b(&self) -> usize {
        self.tail() + 3
    }

    pub fn len(&self) -> usize {
        self.tail() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["embeddings".to_string()];
        for l in 0..self.layers {
            names.extend(LAYER_PARAMS.iter().map(|p| format!("layer{l}.{p}")));
        }
        names.extend(["attn_u", "attn_v", "heads_z", "heads_b"].map(String::from));
        names
    }

    /// Expected shape of every tensor, in storage order.
    pub fn shapes(&self, c: &ModelConfig) -> Vec<Vec<usize>> {
        let d = c.d_model;
        let mut shapes = vec![vec![c.vocab_size, d]];
        for _ in 0..self.layers {
            shapes.extend([
                vec![d, d],
                vec![d],
                vec![d, d],
                vec![d],
                vec![d, d],
                vec![d],
                vec![d, d],
                vec![d],
                vec![d, c.d_ff],
                vec![c.d_ff],
                vec![c.d_ff, d],
                vec![d],
                vec![d],
                vec![d],
                vec![d],
                vec![d],
            ]);
        }
        let heads = if c.shared_head { 1 } else { c.num_labels };
        shapes.extend([
            vec![d, c.d_attn],
            vec![c.num_labels, c.d_attn],
            vec![heads, d],
            vec![heads],
        ]);
        shapes
    }
}

/// All model tensors in [`Layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tensors: Vec<Tensor>,
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, shape: &[usize]) -> Result<Tensor> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
    Ok(Tensor::new(shape.to_vec(), data)?)
}

impl ModelParams {
    /// Xavier-uniform weight matrices, zero biases, unit layer-norm gains;
    /// the embedding table is copied from `embeddings`.
    pub fn init(config: &ModelConfig, embeddings: &EmbeddingMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.vocab_size() != config.vocab_size || embeddings.dim() != config.d_model {
            return Err(Error::Config(format!(
                "embedding matrix is {}x{}, model expects {}x{}",
                embeddings.vocab_size(),
                embeddings.dim(),
                config.vocab_size,
                config.d_model
            )));
        }
        let layout = Layout::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::with_capacity(layout.len());
        for (name, shape) in layout.names().iter().zip(layout.shapes(config)) {
            let t = if name == "embeddings" {
                embeddings.matrix().clone()
            } else if name.ends_with("gain") {
                Tensor::filled(&shape, 1.0)?
            } else if shape.len() == 1 {
                Tensor::zeros(&shape)?
            } else {
                xavier(&mut rng, shape[0], shape[1], &shape)?
            };
            tensors.push(t);
        }
        Ok(Self { tensors })
    }

    /// Checks count, shapes, finiteness and the zero padding row.
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let layout = Layout::new(config);
        let shapes = layout.shapes(config);
        if self.tensors.len() != shapes.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for ((t, s), name) in self.tensors.iter().zip(&shapes).zip(layout.names()) {
            if t.shape() != s.as_slice() {
                return Err(Error::Shape(format!(
                    "{name}: expected {s:?}, got {:?}",
                    t.shape()
                )));
            }
            if !t.all_finite() {
                return Err(Error::Validation(format!("{name} has non-finite entries")));
            }
        }
        if self.tensors[Layout::EMBEDDINGS].row(PAD).iter().any(|&v| v != 0.0) {
            return Err(Error::Validation("padding embedding row is not zero".into()));
        }
        Ok(())
    }

    pub fn get(&self, index: usize) -> &Tensor {
        &self.tensors[index]
    }

    /// Puts every tensor on `tape`: as a trainable leaf, or as a constant
    /// when `trainable` is false. A frozen embedding table is always constant.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool, freeze_embeddings: bool) -> Bound<'t> {
        let vars = self
            .tensors
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let frozen = !trainable || (freeze_embeddings && i == Layout::EMBEDDINGS);
                if frozen {
                    tape.constant(t.clone())
                } else {
                    tape.leaf(t.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

/// Tape handles for a [`ModelParams`], same order.
#[derive(Clone)]
pub struct Bound<'t> {
    pub vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    pub fn get(&self, index: usize) -> Var<'t> {
        self.vars[index]
    }
}
