use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, Encoder, Mode, Scalar};
use crate::dataset::{LabelVector, NUM_LABELS};
use crate::metrics::weighted_f1;
use crate::seed;
use crate::text::TokenSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict improvement in validation F1 before stopping.
    pub patience: usize,
    pub threshold: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 30,
            patience: 5,
            threshold: 0.5,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} not in [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub seq: TokenSequence,
    pub labels: LabelVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_f1: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best score seen; only a strict improvement resets patience.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, score: f64) -> StopDecision {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scores: [f64; NUM_LABELS],
    pub labels: LabelVector,
}

/// Labels whose score reaches `threshold`; when none does, the single
/// highest-scoring label (lowest index on ties).
pub fn decide_labels(scores: &[f64], threshold: f64) -> LabelVector {
    let bits: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    if bits.iter().any(|&b| b) {
        return LabelVector::from_bools(&bits);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let mut bits = vec![false; scores.len()];
    bits[best] = true;
    LabelVector::from_bools(&bits)
}

impl<F: Scalar> Encoder<F> {
    /// One optimizer update on a mini-batch. Nothing is modified when the
    /// loss or a gradient is not finite.
    pub fn train_step(&mut self, adam: &mut Adam<F>, batch: &[Example], rng: &mut ChaCha8Rng) -> Result<f64> {
        let seqs: Vec<TokenSequence> = batch.iter().map(|e| e.seq.clone()).collect();
        let targets: Vec<LabelVector> = batch.iter().map(|e| e.labels).collect();
        let (loss, grads) = self.loss_and_gradients(&seqs, &targets, Mode::Train(rng))?;
        let step = adam.steps() as usize + 1;
        if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        adam.step(self, &grads)?;
        Ok(loss)
    }

    pub fn predict(&self, seqs: &[TokenSequence], threshold: f64) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(seqs.len());
        for seq in seqs {
            let mut scores = [0.0; NUM_LABELS];
            let logits = self.logits(seq, &mut Mode::Eval)?;
            for (s, z) in scores.iter_mut().zip(logits) {
                let z = z.to_f64().unwrap();
                *s = 1.0 / (1.0 + (-z).exp());
            }
            out.push(Prediction {
                labels: decide_labels(&scores, threshold),
                scores,
            });
        }
        Ok(out)
    }

    /// Weighted F1 of thresholded predictions against the examples' labels.
    pub fn evaluate_f1(&self, data: &[Example], threshold: f64) -> Result<f64> {
        let seqs: Vec<TokenSequence> = data.iter().map(|e| e.seq.clone()).collect();
        let preds = self.predict(&seqs, threshold)?;
        let pred = bool_matrix(preds.iter().map(|p| p.labels));
        let gold = bool_matrix(data.iter().map(|e| e.labels));
        weighted_f1(pred.view(), gold.view())
    }
}

pub(crate) fn bool_matrix(rows: impl ExactSizeIterator<Item = LabelVector>) -> Array2<bool> {
    let n = rows.len();
    let mut m = Array2::from_elem((n, NUM_LABELS), false);
    for (i, lv) in rows.enumerate() {
        for (j, b) in lv.to_bools().into_iter().enumerate() {
            m[[i, j]] = b;
        }
    }
    m
}

/// Mini-batch training with per-epoch shuffling and early stopping on
/// validation F1. The weights of the best epoch are restored at the end.
pub fn train<F: Scalar>(
    model: &mut Encoder<F>,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Input("training and validation sets must be non-empty".into()));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "shuffle"));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "dropout"));
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = History::default();
    let mut best = model.clone();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            loss_sum += model.train_step(&mut adam, &batch, &mut dropout_rng)?;
            batches += 1;
        }
        let val_f1 = model.evaluate_f1(val_set, cfg.threshold)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_f1,
        });
        match stopper.observe(val_f1) {
            StopDecision::Improved => {
                history.best_epoch = epoch;
                history.best_f1 = val_f1;
                best = model.clone();
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    *model = best;
    Ok(history)
}
