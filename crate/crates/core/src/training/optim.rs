use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// AdamW with decoupled weight decay. Elements marked frozen in a step are
/// skipped entirely: no moment update, no decay, no parameter change.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig, params: &[&Tensor]) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self { cfg, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], frozen: Option<&[Vec<bool>]>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != p.len() {
                return Err(Error::Shape(format!("tensor {i}: param {:?} vs grad {:?}", p.shape(), g.shape())));
            }
        }
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let skip = frozen.map(|f| f[i].as_slice());
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                if skip.is_some_and(|s| s[j]) {
                    continue;
                }
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
                let update = (m[j] / bc1) / ((v[j] / bc2).sqrt() + c.eps);
                *w -= c.lr * (update + c.weight_decay * *w);
            }
        }
        Ok(())
    }
}
