//! CBOW word embeddings trained with negative sampling.
//!
//! The context window around each position is averaged and scored against
//! the center word and `negatives` words drawn from the unigram distribution
//! raised to the 3/4 power. Updates are plain SGD with a learning rate that
//! decays linearly over the whole run.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{kernels, Tensor};
use crate::preprocess::PAD;

/// `vocab_size × dim` matrix whose row 0 (padding) is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    matrix: Tensor,
}

impl EmbeddingMatrix {
    pub fn new(matrix: Tensor) -> Result<Self> {
        if matrix.rank() != 2 {
            return Err(Error::Shape(format!(
                "embedding matrix must be 2-d, got {:?}",
                matrix.shape()
            )));
        }
        if !matrix.all_finite() {
            return Err(Error::Validation("embedding matrix has non-finite entries".into()));
        }
        if matrix.row(PAD).iter().any(|&v| v != 0.0) {
            return Err(Error::Validation("padding row must be zero".into()));
        }
        Ok(Self { matrix })
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn into_tensor(self) -> Tensor {
        self.matrix
    }

    /// Row gather for a sequence of ids.
    pub fn lookup(&self, ids: &[usize]) -> Result<Tensor> {
        let d = self.dim();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= self.vocab_size() {
                return Err(crate::numerics::NumericsError::Index {
                    index: id,
                    bound: self.vocab_size(),
                }
                .into());
            }
            out.extend_from_slice(self.matrix.row(id));
        }
        Ok(Tensor::matrix(ids.len(), d, out)?)
    }

    /// Text form: `EMB v1 <vocab_size> <dim> <vocab_checksum>` then one row
    /// per line. Values use shortest round-trip formatting, so reloading is exact.
    pub fn to_file_string(&self, vocab_checksum: &str) -> String {
        let mut s = format!("EMB v1 {} {} {}\n", self.vocab_size(), self.dim(), vocab_checksum);
        for r in 0..self.vocab_size() {
            let row: Vec<String> = self.matrix.row(r).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parses the text form, returning the matrix and the vocabulary checksum it carries.
    pub fn parse(text: &str) -> Result<(Self, String)> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (v, d, checksum) = match fields.as_slice() {
            ["EMB", "v1", v, d, c] => {
                let v: usize = v
                    .parse()
                    .map_err(|_| Error::parse("embeddings", 1, "bad vocab size"))?;
                let d: usize = d
                    .parse()
                    .map_err(|_| Error::parse("embeddings", 1, "bad dimension"))?;
                (v, d, c.to_string())
            }
            _ => return Err(Error::parse("embeddings", 1, "expected `EMB v1 <V> <d> <checksum>`")),
        };
        let mut data = Vec::with_capacity(v * d);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                let x: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse("embeddings", i + 2, format!("bad value {tok:?}")))?;
                data.push(x);
            }
            if data.len() - before != d {
                return Err(Error::parse("embeddings", i + 2, format!("expected {d} values")));
            }
            rows += 1;
        }
        if rows != v {
            return Err(Error::parse("embeddings", rows + 1, format!("expected {v} rows, got {rows}")));
        }
        Ok((Self::new(Tensor::matrix(v, d, data)?)?, checksum))
    }

    pub fn write(&self, path: &Path, vocab_checksum: &str) -> Result<()> {
        fs::write(path, self.to_file_string(vocab_checksum)).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

/// Negative-sampling CBOW objective for one position:
/// `-log σ(u_c·h) - Σ_n log σ(-u_n·h)`, where `h` is the mean of the
/// context rows of `input` and `u` are rows of `output`.
pub fn cbow_loss(
    input: &[f64],
    output: &[f64],
    dim: usize,
    context: &[usize],
    center: usize,
    negatives: &[usize],
) -> f64 {
    let h = context_mean(input, dim, context);
    let row = |id: usize| &output[id * dim..(id + 1) * dim];
    let mut loss = -kernels::sigmoid(kernels::dot(row(center), &h)).ln();
    for &n in negatives {
        loss -= kernels::sigmoid(-kernels::dot(row(n), &h)).ln();
    }
    loss
}

/// Gradients of [`cbow_loss`] with respect to the full input and output matrices.
pub fn cbow_gradients(
    input: &[f64],
    output: &[f64],
    dim: usize,
    context: &[usize],
    center: usize,
    negatives: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let mut g_in = vec![0.0; input.len()];
    let mut g_out = vec![0.0; output.len()];
    let (g_h, _) = accumulate_output_grads(output, dim, context, center, negatives, input, &mut g_out);
    let inv = 1.0 / context.len() as f64;
    for &c in context {
        for (g, v) in g_in[c * dim..(c + 1) * dim].iter_mut().zip(&g_h) {
            *g += v * inv;
        }
    }
    (g_in, g_out)
}

fn context_mean(input: &[f64], dim: usize, context: &[usize]) -> Vec<f64> {
    let mut h = vec![0.0; dim];
    for &c in context {
        for (hv, v) in h.iter_mut().zip(&input[c * dim..(c + 1) * dim]) {
            *hv += v;
        }
    }
    let inv = 1.0 / context.len() as f64;
    h.iter_mut().for_each(|v| *v *= inv);
    h
}

/// Adds output-row gradients into `g_out`; returns (dL/dh, h).
fn accumulate_output_grads(
    output: &[f64],
    dim: usize,
    context: &[usize],
    center: usize,
    negatives: &[usize],
    input: &[f64],
    g_out: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = context_mean(input, dim, context);
    let mut g_h = vec![0.0; dim];
    let targets = std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (t, label) in targets {
        let row = &output[t * dim..(t + 1) * dim];
        let g = kernels::sigmoid(kernels::dot(row, &h)) - label;
        for j in 0..dim {
            g_h[j] += g * row[j];
            g_out[t * dim + j] += g * h[j];
        }
    }
    (g_h, h)
}

struct UnigramSampler {
    ids: Vec<usize>,
    cumulative: Vec<f64>,
}

impl UnigramSampler {
    fn new(counts: &[u64]) -> Self {
        let mut ids = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (id, &c) in counts.iter().enumerate() {
            if c > 0 && id != PAD {
                total += (c as f64).powf(0.75);
                ids.push(id);
                cumulative.push(total);
            }
        }
        Self { ids, cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("sampler has at least one id");
        let x = rng.gen::<f64>() * total;
        let pos = self.cumulative.partition_point(|&c| c <= x);
        self.ids[pos.min(self.ids.len() - 1)]
    }
}

/// Trains input embeddings on encoded documents. Padding ids are skipped and
/// the padding row stays zero.
pub fn train_cbow(
    docs: &[Vec<usize>],
    vocab_size: usize,
    config: &CbowConfig,
) -> Result<EmbeddingMatrix> {
    if config.window == 0 || config.negatives == 0 || config.dim == 0 || config.epochs == 0 {
        return Err(Error::Config(
            "cbow window, negatives, dim and epochs must be >= 1".into(),
        ));
    }
    let total_tokens: usize = docs.iter().map(|d| d.iter().filter(|&&t| t != PAD).count()).sum();
    if total_tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    if vocab_size < config.negatives + 1 {
        return Err(Error::InsufficientVocabulary {
            vocab: vocab_size,
            negatives: config.negatives,
        });
    }
    let dim = config.dim;
    let mut counts = vec![0u64; vocab_size];
    for &t in docs.iter().flatten() {
        if t >= vocab_size {
            return Err(crate::numerics::NumericsError::Index {
                index: t,
                bound: vocab_size,
            }
            .into());
        }
        counts[t] += 1;
    }
    let sampler = UnigramSampler::new(&counts);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = vec![0.0; vocab_size * dim];
    for v in input[dim..].iter_mut() {
        *v = (rng.gen::<f64>() - 0.5) / dim as f64;
    }
    let mut output = vec![0.0; vocab_size * dim];

    let total_steps = (config.epochs * total_tokens) as f64;
    let mut step = 0usize;
    let mut context = Vec::with_capacity(2 * config.window);
    let mut negatives = Vec::with_capacity(config.negatives);
    for _ in 0..config.epochs {
        for doc in docs {
            for (i, &center) in doc.iter().enumerate() {
                if center == PAD {
                    continue;
                }
                let lr = config.lr * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let reach = config.window - rng.gen_range(0..config.window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(doc.len() - 1);
                context.clear();
                context.extend((lo..=hi).filter(|&j| j != i).map(|j| doc[j]).filter(|&t| t != PAD));
                if context.is_empty() {
                    continue;
                }
                negatives.clear();
                for _ in 0..config.negatives {
                    let n = sampler.sample(&mut rng);
                    if n != center {
                        negatives.push(n);
                    }
                }
                sgd_step(&mut input, &mut output, dim, &context, center, &negatives, lr);
            }
        }
    }
    debug_assert!(input[..dim].iter().all(|&v| v == 0.0));
    EmbeddingMatrix::new(Tensor::matrix(vocab_size, dim, input)?)
}

fn sgd_step(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    context: &[usize],
    center: usize,
    negatives: &[usize],
    lr: f64,
) {
    let h = context_mean(input, dim, context);
    let mut g_h = vec![0.0; dim];
    let targets = std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    let mut updates: Vec<(usize, f64)> = Vec::with_capacity(negatives.len() + 1);
    for (t, label) in targets {
        let row = &output[t * dim..(t + 1) * dim];
        let g = kernels::sigmoid(kernels::dot(row, &h)) - label;
        for j in 0..dim {
            g_h[j] += g * row[j];
        }
        updates.push((t, g));
    }
    for (t, g) in updates {
        for j in 0..dim {
            output[t * dim + j] -= lr * g * h[j];
        }
    }
    let scale = lr / context.len() as f64;
    for &c in context {
        for j in 0..dim {
            input[c * dim + j] -= scale * g_h[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_docs() -> Vec<Vec<usize>> {
        vec![vec![2, 3, 4, 5, 6, 7, 8, 9], vec![9, 8, 7, 6, 5, 4, 3, 2, 0, 0]]
    }

    fn small_config(seed: u64) -> CbowConfig {
        CbowConfig {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 2,
            lr: 0.025,
            seed,
        }
    }

    #[test]
    fn output_shape_and_padding_row() {
        let emb = train_cbow(&toy_docs(), 10, &small_config(3)).unwrap();
        assert_eq!(emb.matrix().shape(), &[10, 8]);
        assert!(emb.matrix().row(PAD).iter().all(|&v| v == 0.0));
        assert!(emb.matrix().all_finite());
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = train_cbow(&toy_docs(), 10, &small_config(5)).unwrap();
        let b = train_cbow(&toy_docs(), 10, &small_config(5)).unwrap();
        assert!(a.matrix().bitwise_eq(b.matrix()));
        let c = train_cbow(&toy_docs(), 10, &small_config(6)).unwrap();
        assert!(!a.matrix().bitwise_eq(c.matrix()));
    }

    #[test]
    fn rejects_small_vocabulary_and_empty_corpus() {
        let cfg = CbowConfig {
            negatives: 5,
            ..small_config(1)
        };
        assert!(matches!(
            train_cbow(&[vec![2, 3]], 5, &cfg),
            Err(Error::InsufficientVocabulary { vocab: 5, negatives: 5 })
        ));
        assert!(matches!(
            train_cbow(&[vec![0, 0]], 10, &small_config(1)),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn lookup_rows() {
        let m = Tensor::matrix(3, 2, vec![0.0, 0.0, 0.5, 0.5, 1.0, 2.0]).unwrap();
        let emb = EmbeddingMatrix::new(m).unwrap();
        assert_eq!(emb.lookup(&[0]).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(emb.lookup(&[1]).unwrap().data(), &[0.5, 0.5]);
        assert_eq!(emb.lookup(&[2, 2]).unwrap().data(), &[1.0, 2.0, 1.0, 2.0]);
        assert!(emb.lookup(&[3]).is_err());
    }

    #[test]
    fn nonzero_padding_row_is_rejected() {
        let m = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
        assert!(EmbeddingMatrix::new(m).is_err());
    }

    #[test]
    fn file_round_trip_is_exact() {
        let emb = train_cbow(&toy_docs(), 10, &small_config(9)).unwrap();
        let text = emb.to_file_string("abc123");
        assert!(text.starts_with("EMB v1 10 8 abc123\n"));
        let (back, sum) = EmbeddingMatrix::parse(&text).unwrap();
        assert_eq!(sum, "abc123");
        assert!(back.matrix().bitwise_eq(emb.matrix()));
    }
}
