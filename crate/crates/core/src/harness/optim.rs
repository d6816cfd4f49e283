use crate::error::{Error, Result};
use crate::model::{Layout, ModelParams};
use crate::numerics::Tensor;
use crate::preprocess::PAD;

/// Adam with bias correction. State is kept per parameter tensor, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.numel()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update. `grads[i]` is `None` for frozen tensors, which are left
    /// alone. The padding embedding row is reset to zero afterwards.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Option<Tensor>]) -> Result<()> {
        if grads.len() != params.tensors.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.tensors.len()
            )));
        }
        for (p, g) in params.tensors.iter().zip(grads) {
            if let Some(g) = g {
                if g.shape() != p.shape() {
                    return Err(Error::Shape(format!(
                        "gradient {:?} for parameter {:?}",
                        g.shape(),
                        p.shape()
                    )));
                }
            }
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let p = &params.tensors[i];
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut data = p.to_vec();
            for (j, (&gj, x)) in g.data().iter().zip(data.iter_mut()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *x -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            if i == Layout::EMBEDDINGS {
                let d = p.last_dim();
                data[PAD * d..(PAD + 1) * d].iter_mut().for_each(|x| *x = 0.0);
            }
            params.tensors[i] = Tensor::new(p.shape().to_vec(), data)?;
        }
        Ok(())
    }
}
