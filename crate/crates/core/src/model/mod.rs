//! Transformer encoder for multi-label section classification.
//!
//! Token and position embeddings feed `L` post-layer-norm blocks
//! (self-attention then a GELU feed-forward network). The hidden state at
//! the leading CLS position goes through a linear head that produces one
//! logit per label.
//!
//! Parameters live in one flat list of named 2-D tensors whose order is
//! fixed by [`layout`]: base tensors first, LoRA adapters (when present)
//! appended after them. Biases and layer-norm vectors are `1 × n` rows.
//!
//! The model is generic over `f32`/`f64`; training and checkpoints use
//! `f32`, gradient checking uses `f64`.

mod checkpoint;
mod forward;
mod lora;
mod optim;
mod train;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::NUM_LABELS;
use crate::{Error, Result};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{bce_loss, Mode};
pub use lora::head_param_count;
pub use optim::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use train::{
    decide_labels, train, EarlyStopping, EpochRecord, Example, History, Prediction, StopDecision, TrainingConfig,
};

pub trait Scalar:
    LinalgScalar
    + Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Debug
    + Display
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn cast<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("finite constant")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub dropout: f64,
    #[serde(default = "default_num_labels")]
    pub num_labels: usize,
}

fn default_num_labels() -> usize {
    NUM_LABELS
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vocab_size == 0 || self.hidden == 0 || self.ff_dim == 0 {
            return fail("vocab_size, hidden and ff_dim must be positive".into());
        }
        if self.layers < 1 || self.heads < 1 {
            return fail("layers and heads must be at least 1".into());
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return fail(format!("d not divisible by H ({} % {} != 0)", self.hidden, self.heads));
        }
        if self.max_len < 2 {
            return fail(format!("max_len must be at least 2, got {}", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if self.num_labels != NUM_LABELS {
            return fail(format!("num_labels must be {NUM_LABELS}, got {}", self.num_labels));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoraTarget {
    Query,
    Value,
}

impl LoraTarget {
    fn name(self) -> &'static str {
        match self {
            LoraTarget::Query => "query",
            LoraTarget::Value => "value",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    /// Scale numerator; the adapter update is `(alpha / rank) · A·Bᵀ`.
    /// Defaults to `rank`, i.e. a scale of one.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_targets")]
    pub targets: Vec<LoraTarget>,
}

fn default_targets() -> Vec<LoraTarget> {
    vec![LoraTarget::Query, LoraTarget::Value]
}

impl LoraConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            alpha: None,
            targets: default_targets(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.rank as f64)
    }

    pub fn scale(&self) -> f64 {
        self.alpha() / self.rank as f64
    }

    pub fn targets_query(&self) -> bool {
        self.targets.contains(&LoraTarget::Query)
    }

    pub fn targets_value(&self) -> bool {
        self.targets.contains(&LoraTarget::Value)
    }

    pub fn validate(&self, hidden: usize) -> Result<()> {
        if self.rank < 1 {
            return Err(Error::Config("LoRA rank must be at least 1".into()));
        }
        if self.rank >= hidden {
            return Err(Error::Config(format!(
                "LoRA rank {} must be below the hidden size {hidden}",
                self.rank
            )));
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            return Err(Error::Config(format!(
                "LoRA alpha must be positive, got {}",
                self.alpha()
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("LoRA needs at least one target projection".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FineTuneMode {
    #[default]
    Full,
    Lora,
}

impl std::str::FromStr for FineTuneMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(FineTuneMode::Full),
            "lora" => Ok(FineTuneMode::Lora),
            other => Err(format!("unknown mode {other:?} (expected full or lora)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Embedding,
    Weight,
    Bias,
    NormGain,
    NormBias,
    ClassifierWeight,
    ClassifierBias,
    LoraA,
    LoraB,
}

impl TensorKind {
    pub fn is_adapter(self) -> bool {
        matches!(self, TensorKind::LoraA | TensorKind::LoraB)
    }

    pub fn is_classifier(self) -> bool {
        matches!(self, TensorKind::ClassifierWeight | TensorKind::ClassifierBias)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: TensorKind,
}

impl TensorSpec {
    fn new(name: impl Into<String>, rows: usize, cols: usize, kind: TensorKind) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            kind,
        }
    }

    pub fn numel(&self) -> usize {
        self.rows * self.cols
    }
}

/// Slot indices of one block's tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerSlots {
    pub q_w: usize,
    pub q_b: usize,
    pub k_w: usize,
    pub k_b: usize,
    pub v_w: usize,
    pub v_b: usize,
    pub o_w: usize,
    pub o_b: usize,
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub ff1_w: usize,
    pub ff1_b: usize,
    pub ff2_w: usize,
    pub ff2_b: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    /// (A, B) slots of the query and value adapters.
    pub lora_q: Option<(usize, usize)>,
    pub lora_v: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Slots {
    pub token: usize,
    pub position: usize,
    pub layers: Vec<LayerSlots>,
    pub cls_w: usize,
    pub cls_b: usize,
}

const BLOCK_TENSORS: [(&str, TensorKind); 16] = [
    ("attention.query.weight", TensorKind::Weight),
    ("attention.query.bias", TensorKind::Bias),
    ("attention.key.weight", TensorKind::Weight),
    ("attention.key.bias", TensorKind::Bias),
    ("attention.value.weight", TensorKind::Weight),
    ("attention.value.bias", TensorKind::Bias),
    ("attention.output.weight", TensorKind::Weight),
    ("attention.output.bias", TensorKind::Bias),
    ("attention_norm.gain", TensorKind::NormGain),
    ("attention_norm.bias", TensorKind::NormBias),
    ("ffn.in.weight", TensorKind::Weight),
    ("ffn.in.bias", TensorKind::Bias),
    ("ffn.out.weight", TensorKind::Weight),
    ("ffn.out.bias", TensorKind::Bias),
    ("ffn_norm.gain", TensorKind::NormGain),
    ("ffn_norm.bias", TensorKind::NormBias),
];

/// The named tensor directory for a configuration, in storage order.
pub fn layout(cfg: &EncoderConfig, lora: Option<&LoraConfig>) -> Vec<TensorSpec> {
    let d = cfg.hidden;
    let mut specs = vec![
        TensorSpec::new("embeddings.token", cfg.vocab_size, d, TensorKind::Embedding),
        TensorSpec::new("embeddings.position", cfg.max_len, d, TensorKind::Embedding),
    ];
    for l in 0..cfg.layers {
        for (name, kind) in BLOCK_TENSORS {
            let (rows, cols) = match name {
                "ffn.in.weight" => (d, cfg.ff_dim),
                "ffn.in.bias" => (1, cfg.ff_dim),
                "ffn.out.weight" => (cfg.ff_dim, d),
                _ if kind == TensorKind::Weight => (d, d),
                _ => (1, d),
            };
            specs.push(TensorSpec::new(format!("layers.{l}.{name}"), rows, cols, kind));
        }
    }
    specs.push(TensorSpec::new(
        "classifier.weight",
        d,
        cfg.num_labels,
        TensorKind::ClassifierWeight,
    ));
    specs.push(TensorSpec::new(
        "classifier.bias",
        1,
        cfg.num_labels,
        TensorKind::ClassifierBias,
    ));
    if let Some(lc) = lora {
        for l in 0..cfg.layers {
            for target in [LoraTarget::Query, LoraTarget::Value] {
                if lc.targets.contains(&target) {
                    let base = format!("layers.{l}.attention.{}", target.name());
                    specs.push(TensorSpec::new(format!("{base}.lora_a"), d, lc.rank, TensorKind::LoraA));
                    specs.push(TensorSpec::new(format!("{base}.lora_b"), d, lc.rank, TensorKind::LoraB));
                }
            }
        }
    }
    specs
}

fn slots(cfg: &EncoderConfig, lora: Option<&LoraConfig>) -> Slots {
    let per_layer = BLOCK_TENSORS.len();
    let base_end = 2 + cfg.layers * per_layer + 2;
    let mut next_adapter = base_end;
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let o = 2 + l * per_layer;
        let mut adapter = |on: bool| {
            on.then(|| {
                let s = (next_adapter, next_adapter + 1);
                next_adapter += 2;
                s
            })
        };
        let lora_q = adapter(lora.is_some_and(LoraConfig::targets_query));
        let lora_v = adapter(lora.is_some_and(LoraConfig::targets_value));
        layers.push(LayerSlots {
            q_w: o,
            q_b: o + 1,
            k_w: o + 2,
            k_b: o + 3,
            v_w: o + 4,
            v_b: o + 5,
            o_w: o + 6,
            o_b: o + 7,
            ln1_g: o + 8,
            ln1_b: o + 9,
            ff1_w: o + 10,
            ff1_b: o + 11,
            ff2_w: o + 12,
            ff2_b: o + 13,
            ln2_g: o + 14,
            ln2_b: o + 15,
            lora_q,
            lora_v,
        });
    }
    Slots {
        token: 0,
        position: 1,
        layers,
        cls_w: base_end - 2,
        cls_b: base_end - 1,
    }
}

/// Closed-form element count of all base tensors:
/// `V·d + T·d + L·(4(d² + d) + 4d + (d·f + f) + (f·d + d)) + d·C + C`.
pub fn full_param_count(cfg: &EncoderConfig) -> usize {
    let (v, t, d, f, c, l) = (
        cfg.vocab_size,
        cfg.max_len,
        cfg.hidden,
        cfg.ff_dim,
        cfg.num_labels,
        cfg.layers,
    );
    v * d + t * d + l * (4 * (d * d + d) + 4 * d + (d * f + f) + (f * d + d)) + d * c + c
}

/// Closed-form count of the parameters LoRA fine-tuning updates:
/// `L · |targets| · 2·d·r` adapter weights plus the `d·C + C` head.
pub fn lora_param_count(cfg: &EncoderConfig, lora: &LoraConfig) -> usize {
    let targets = usize::from(lora.targets_query()) + usize::from(lora.targets_value());
    cfg.layers * targets * 2 * cfg.hidden * lora.rank + cfg.hidden * cfg.num_labels + cfg.num_labels
}

/// Count trainable elements by walking a tensor directory.
pub fn count_specs(specs: &[TensorSpec], mode: FineTuneMode) -> usize {
    specs
        .iter()
        .filter(|s| match mode {
            FineTuneMode::Full => !s.kind.is_adapter(),
            FineTuneMode::Lora => s.kind.is_adapter() || s.kind.is_classifier(),
        })
        .map(TensorSpec::numel)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub value: Array2<F>,
    pub frozen: bool,
}

/// Encoder parameters plus the configuration that shapes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<F> {
    config: EncoderConfig,
    lora: Option<LoraConfig>,
    specs: Vec<TensorSpec>,
    tensors: Vec<Tensor<F>>,
    slots: Slots,
}

/// Standard deviation of the initial weights.
pub const INIT_STD: f64 = 0.02;

/// Samples `Normal(0, std)` truncated to ±2σ by resampling.
pub(crate) fn truncated_normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let normal = Normal::new(0.0, std).expect("positive std");
    loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * std {
            return x;
        }
    }
}

impl<F: Scalar> Encoder<F> {
    /// Build a freshly initialized model: weights and embeddings from a
    /// truncated `Normal(0, 0.02)`, biases 0, layer-norm gains 1.
    pub fn init(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = layout(cfg, None);
        let tensors = specs
            .iter()
            .map(|s| {
                let value = match s.kind {
                    TensorKind::Embedding | TensorKind::Weight | TensorKind::ClassifierWeight => {
                        Array2::from_shape_simple_fn((s.rows, s.cols), || cast(truncated_normal(&mut rng, INIT_STD)))
                    }
                    TensorKind::NormGain => Array2::ones((s.rows, s.cols)),
                    _ => Array2::zeros((s.rows, s.cols)),
                };
                Tensor { value, frozen: false }
            })
            .collect();
        Ok(Self {
            slots: slots(cfg, None),
            config: cfg.clone(),
            lora: None,
            specs,
            tensors,
        })
    }

    /// Assemble a model from explicit tensors in [`layout`] order.
    pub(crate) fn from_parts(cfg: EncoderConfig, lora: Option<LoraConfig>, tensors: Vec<Tensor<F>>) -> Result<Self> {
        cfg.validate()?;
        if let Some(lc) = &lora {
            lc.validate(cfg.hidden)?;
        }
        let specs = layout(&cfg, lora.as_ref());
        if specs.len() != tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (s, t) in specs.iter().zip(&tensors) {
            if t.value.dim() != (s.rows, s.cols) {
                return Err(Error::Shape(format!(
                    "{}: expected {}x{}, got {:?}",
                    s.name,
                    s.rows,
                    s.cols,
                    t.value.dim()
                )));
            }
        }
        Ok(Self {
            slots: slots(&cfg, lora.as_ref()),
            config: cfg,
            lora,
            specs,
            tensors,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn lora_config(&self) -> Option<&LoraConfig> {
        self.lora.as_ref()
    }

    pub fn mode(&self) -> FineTuneMode {
        if self.lora.is_some() {
            FineTuneMode::Lora
        } else {
            FineTuneMode::Full
        }
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<F>> {
        self.specs.iter().position(|s| s.name == name).map(|i| &self.tensors[i])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| &mut self.tensors[i])
    }

    pub(crate) fn value(&self, slot: usize) -> &Array2<F> {
        &self.tensors[slot].value
    }

    pub fn named_tensors(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.specs.iter().map(|s| s.name.as_str()).zip(&self.tensors)
    }

    /// Trainable element count by enumerating the model's own tensors.
    /// `Full` counts every base tensor; `Lora` counts adapters and the
    /// classifier head.
    pub fn count_trainable(&self, mode: FineTuneMode) -> usize {
        self.specs
            .iter()
            .zip(&self.tensors)
            .filter(|(s, _)| match mode {
                FineTuneMode::Full => !s.kind.is_adapter(),
                FineTuneMode::Lora => s.kind.is_adapter() || s.kind.is_classifier(),
            })
            .map(|(_, t)| t.value.len())
            .sum()
    }

    /// Elements that an optimizer step may change.
    pub fn count_unfrozen(&self) -> usize {
        self.tensors.iter().filter(|t| !t.frozen).map(|t| t.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.iter().all(|v| v.is_finite()))
    }

    /// Convert every tensor to another float type.
    pub fn cast<G: Scalar>(&self) -> Encoder<G> {
        Encoder {
            config: self.config.clone(),
            lora: self.lora.clone(),
            specs: self.specs.clone(),
            slots: self.slots.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    value: t.value.mapv(|v| G::from_f64(v.to_f64().unwrap()).unwrap()),
                    frozen: t.frozen,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            vocab_size: 100,
            hidden: 8,
            layers: 1,
            heads: 2,
            ff_dim: 16,
            max_len: 16,
            dropout: 0.1,
            num_labels: 7,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = Encoder::<f32>::init(&tiny_config(), 5).unwrap();
        let b = Encoder::<f32>::init(&tiny_config(), 5).unwrap();
        assert_eq!(a, b);
        let c = Encoder::<f32>::init(&tiny_config(), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_values_follow_rules() {
        let m = Encoder::<f64>::init(&tiny_config(), 1).unwrap();
        for (spec, t) in m.specs().iter().zip(m.tensors()) {
            match spec.kind {
                TensorKind::NormGain => assert!(t.value.iter().all(|&v| v == 1.0), "{}", spec.name),
                TensorKind::NormBias | TensorKind::Bias | TensorKind::ClassifierBias => {
                    assert!(t.value.iter().all(|&v| v == 0.0))
                }
                _ => assert!(t.value.iter().all(|&v| v.abs() <= 2.0 * INIT_STD && v != 0.0)),
            }
        }
        let emb = &m.tensor("embeddings.token").unwrap().value;
        let mean = emb.mean().unwrap();
        let sd = (emb.mapv(|v| (v - mean).powi(2)).mean().unwrap()).sqrt();
        assert!(
            mean.abs() < 0.005 && (0.012..0.022).contains(&sd),
            "mean {mean} sd {sd}"
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config();
        cfg.heads = 3;
        let err = Encoder::<f32>::init(&cfg, 0).unwrap_err();
        assert!(err.to_string().contains("d not divisible by H"));
        let mut cfg = tiny_config();
        cfg.max_len = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.dropout = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn counts_agree_for_tiny_config() {
        let cfg = tiny_config();
        let m = Encoder::<f32>::init(&cfg, 0).unwrap();
        // enumerated by hand: 800 + 128 + (4*72 + 32 + 144 + 136) + 63
        let by_hand = 100 * 8 + 16 * 8 + (4 * (64 + 8) + 4 * 8 + (8 * 16 + 16) + (16 * 8 + 8)) + 8 * 7 + 7;
        assert_eq!(full_param_count(&cfg), by_hand);
        assert_eq!(m.count_trainable(FineTuneMode::Full), by_hand);
        assert_eq!(count_specs(&layout(&cfg, None), FineTuneMode::Full), by_hand);
    }

    #[test]
    fn lora_count_closed_form() {
        let cfg = tiny_config();
        let lc = LoraConfig::new(4);
        assert_eq!(lora_param_count(&cfg, &lc), 191);
        assert_eq!(count_specs(&layout(&cfg, Some(&lc)), FineTuneMode::Lora), 191);
        let mut doubled = lc.clone();
        doubled.rank = 8;
        let head = 8 * 7 + 7;
        assert_eq!(lora_param_count(&cfg, &doubled) - head, 2 * (191 - head));
    }

    #[test]
    fn lora_config_defaults() {
        let lc: LoraConfig = serde_json::from_str(r#"{"rank": 4}"#).unwrap();
        assert_eq!(lc.alpha(), 4.0);
        assert_eq!(lc.scale(), 1.0);
        assert_eq!(lc.targets, vec![LoraTarget::Query, LoraTarget::Value]);
        assert!(lc.validate(8).is_ok());
        assert!(LoraConfig::new(8).validate(8).is_err());
    }

    #[test]
    fn slots_match_layout_names() {
        let cfg = EncoderConfig {
            layers: 2,
            ..tiny_config()
        };
        let lc = LoraConfig::new(2);
        let specs = layout(&cfg, Some(&lc));
        let s = slots(&cfg, Some(&lc));
        assert_eq!(specs[s.cls_w].name, "classifier.weight");
        assert_eq!(specs[s.layers[1].ff2_b].name, "layers.1.ffn.out.bias");
        assert_eq!(specs[s.layers[1].ln2_g].name, "layers.1.ffn_norm.gain");
        let (a, b) = s.layers[1].lora_v.unwrap();
        assert_eq!(specs[a].name, "layers.1.attention.value.lora_a");
        assert_eq!(specs[b].name, "layers.1.attention.value.lora_b");
        let (a, _) = s.layers[0].lora_q.unwrap();
        assert_eq!(specs[a].name, "layers.0.attention.query.lora_a");
    }
}
