//! Low-rank adapters on the query and value projections.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{cast, layout, slots, Encoder, Scalar, Tensor, TensorKind, INIT_STD};
use crate::dataset::NUM_LABELS;
use crate::model::LoraConfig;
use crate::{Error, Result};

impl<F: Scalar> Encoder<F> {
    /// Attach adapters and freeze every base tensor except the classifier
    /// head. `A` starts from `Normal(0, 0.02)` and `B` from zero, so the
    /// adapted model initially computes exactly what the base model does.
    pub fn apply_lora(&mut self, lora: &LoraConfig, seed: u64) -> Result<()> {
        if self.lora.is_some() {
            return Err(Error::Config("model already carries LoRA adapters".into()));
        }
        lora.validate(self.config.hidden)?;
        let specs = layout(&self.config, Some(lora));
        let normal = Normal::new(0.0, INIT_STD).expect("positive std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (spec, tensor) in specs.iter().zip(self.tensors.iter_mut()) {
            tensor.frozen = !spec.kind.is_classifier();
        }
        for spec in &specs[self.tensors.len()..] {
            let value = match spec.kind {
                TensorKind::LoraA => {
                    Array2::from_shape_simple_fn((spec.rows, spec.cols), || cast(normal.sample(&mut rng)))
                }
                _ => Array2::zeros((spec.rows, spec.cols)),
            };
            self.tensors.push(Tensor { value, frozen: false });
        }
        self.slots = slots(&self.config, Some(lora));
        self.specs = specs;
        self.lora = Some(lora.clone());
        Ok(())
    }

    /// Fold each adapter into its base weight, `W ← W + (α/r)·A·Bᵀ`, and
    /// drop the adapters. All tensors of the result are trainable.
    pub fn merge_lora(&mut self) -> Result<()> {
        let Some(lora) = self.lora.take() else {
            return Err(Error::Config("model has no LoRA adapters to merge".into()));
        };
        let s: F = cast(lora.scale());
        for ls in self.slots.layers.clone() {
            for (w, adapter) in [(ls.q_w, ls.lora_q), (ls.v_w, ls.lora_v)] {
                if let Some((a, b)) = adapter {
                    let delta = self.tensors[a].value.dot(&self.tensors[b].value.t());
                    self.tensors[w].value.scaled_add(s, &delta);
                }
            }
        }
        let base = layout(&self.config, None);
        self.tensors.truncate(base.len());
        for t in &mut self.tensors {
            t.frozen = false;
        }
        self.specs = base;
        self.slots = slots(&self.config, None);
        Ok(())
    }

    /// Drop adapters without merging them.
    pub fn strip_lora(&mut self) {
        if self.lora.take().is_some() {
            let base = layout(&self.config, None);
            self.tensors.truncate(base.len());
            for t in &mut self.tensors {
                t.frozen = false;
            }
            self.specs = base;
            self.slots = slots(&self.config, None);
        }
    }
}

/// Element count of the classifier head, trainable in both modes.
pub fn head_param_count(hidden: usize) -> usize {
    hidden * NUM_LABELS + NUM_LABELS
}
