use ndarray::{Array2, Zip};

use super::{cast, Encoder, Scalar};
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction. Moment buffers exist for every tensor, but
/// frozen tensors are never read or written.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: f64,
    m: Vec<Array2<F>>,
    v: Vec<Array2<F>>,
    t: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(model: &Encoder<F>, lr: f64) -> Self {
        let zeros = || {
            model
                .tensors()
                .iter()
                .map(|t| Array2::zeros(t.value.raw_dim()))
                .collect::<Vec<_>>()
        };
        Self {
            lr,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, model: &mut Encoder<F>, grads: &[Array2<F>]) -> Result<()> {
        if grads.len() != self.m.len() || model.tensors().len() != self.m.len() {
            return Err(Error::Shape("optimizer state does not match the model".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2): (F, F) = (cast(ADAM_BETA1), cast(ADAM_BETA2));
        let c1: F = cast(1.0 - ADAM_BETA1.powi(t));
        let c2: F = cast(1.0 - ADAM_BETA2.powi(t));
        let lr: F = cast(self.lr);
        let eps: F = cast(ADAM_EPS);
        let one = F::one();
        for (((tensor, g), m), v) in model
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            if tensor.frozen {
                continue;
            }
            Zip::from(&mut tensor.value)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let mhat = *m / c1;
                    let vhat = *v / c2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                });
        }
        Ok(())
    }
}
