//! Forward pass, loss and hand-written backward pass.
//!
//! Each sequence is processed over its first `true_len` positions only.
//! Because [`encode`](crate::text::encode) always produces a prefix mask,
//! this is the same computation as masking padded keys, minus the padding.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{cast, Encoder, LayerSlots, Scalar};
use crate::dataset::{LabelVector, NUM_LABELS};
use crate::text::TokenSequence;
use crate::{Error, Result};

pub(crate) const LN_EPS: f64 = 1e-5;

/// Evaluation runs without dropout; training draws dropout masks from the
/// supplied generator.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Numerically stable per-element binary cross-entropy on a logit.
pub fn bce_loss(logit: f64, target: bool) -> f64 {
    let y = if target { 1.0 } else { 0.0 };
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

const GELU_C: f64 = 0.044715;

fn gelu<F: Scalar>(x: F) -> F {
    let k: F = cast((2.0 / std::f64::consts::PI).sqrt());
    let half: F = cast(0.5);
    half * x * (F::one() + (k * (x + cast::<F>(GELU_C) * x * x * x)).tanh())
}

fn gelu_grad<F: Scalar>(x: F) -> F {
    let k: F = cast((2.0 / std::f64::consts::PI).sqrt());
    let half: F = cast(0.5);
    let c: F = cast(GELU_C);
    let t = (k * (x + c * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * k * (F::one() + cast::<F>(3.0) * c * x * x)
}

struct NormCache<F> {
    xhat: Array2<F>,
    inv_std: Array1<F>,
}

fn layer_norm<F: Scalar>(x: &Array2<F>, gain: &Array2<F>, bias: &Array2<F>) -> (Array2<F>, NormCache<F>) {
    let n: F = cast(x.ncols() as f64);
    let eps: F = cast(LN_EPS);
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<F>() / n;
        *inv = (var + eps).sqrt().recip();
        let s = *inv;
        row.mapv_inplace(|v| v * s);
    }
    let out = &xhat * gain + bias;
    (out, NormCache { xhat, inv_std })
}

fn layer_norm_backward<F: Scalar>(
    dy: &Array2<F>,
    gain: &Array2<F>,
    cache: &NormCache<F>,
    grads: &mut Grads<'_, F>,
    gain_slot: usize,
    bias_slot: usize,
) -> Array2<F> {
    grads.add_rows(bias_slot, dy.view());
    if grads.tracks(gain_slot) {
        let prod = dy * &cache.xhat;
        grads.add_rows(gain_slot, prod.view());
    }
    let n: F = cast(dy.ncols() as f64);
    let mut dx = dy * gain;
    for ((mut row, xhat), &inv) in dx.rows_mut().into_iter().zip(cache.xhat.rows()).zip(&cache.inv_std) {
        let m1 = row.sum() / n;
        let m2 = row.iter().zip(xhat).map(|(&a, &b)| a * b).sum::<F>() / n;
        row.zip_mut_with(&xhat, |d, &xh| *d = inv * (*d - m1 - xh * m2));
    }
    dx
}

fn softmax_rows<F: Scalar>(scores: &mut Array2<F>) {
    for mut row in scores.rows_mut() {
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Inverted dropout. Returns the scaled keep mask, or `None` when the
/// layer is inactive.
fn dropout<F: Scalar>(x: &mut Array2<F>, p: f64, mode: &mut Mode<'_>) -> Option<Array2<F>> {
    let Mode::Train(rng) = mode else { return None };
    if p <= 0.0 {
        return None;
    }
    let keep: F = cast(1.0 / (1.0 - p));
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || if rng.random::<f64>() < p { F::zero() } else { keep });
    *x *= &mask;
    Some(mask)
}

/// Gradient accumulators, one per tensor; frozen tensors get none.
struct Grads<'a, F> {
    frozen: Vec<bool>,
    store: &'a mut [Array2<F>],
}

impl<F: Scalar> Grads<'_, F> {
    fn tracks(&self, slot: usize) -> bool {
        !self.frozen[slot]
    }

    fn add(&mut self, slot: usize, g: ArrayView2<F>) {
        if self.tracks(slot) {
            self.store[slot] += &g;
        }
    }

    /// Add the column sums of `g` to a `1 × n` tensor.
    fn add_rows(&mut self, slot: usize, g: ArrayView2<F>) {
        if self.tracks(slot) {
            self.store[slot] += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
        }
    }
}

struct LayerCache<F> {
    x: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    uq: Option<Array2<F>>,
    uv: Option<Array2<F>>,
    probs: Vec<Array2<F>>,
    ctx: Array2<F>,
    drop_attn: Option<Array2<F>>,
    norm1: NormCache<F>,
    y1: Array2<F>,
    pre_act: Array2<F>,
    act: Array2<F>,
    drop_ffn: Option<Array2<F>>,
    norm2: NormCache<F>,
}

struct Trace<F> {
    layers: Vec<LayerCache<F>>,
    cls: Array2<F>,
}

impl<F: Scalar> Encoder<F> {
    fn check_sequence(&self, seq: &TokenSequence) -> Result<usize> {
        let n = seq.true_len;
        if n == 0 || n > seq.ids.len() {
            return Err(Error::Shape(format!(
                "true_len {n} invalid for a sequence of {} ids",
                seq.ids.len()
            )));
        }
        if n > self.config.max_len {
            return Err(Error::Shape(format!(
                "sequence of {n} tokens exceeds max_len {}",
                self.config.max_len
            )));
        }
        if let Some(&id) = seq.ids[..n].iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(Error::Shape(format!(
                "token id {id} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(n)
    }

    fn adapter_scale(&self) -> F {
        cast(self.lora.as_ref().map_or(1.0, |l| l.scale()))
    }

    /// `x·W + s·(x·A)·Bᵀ + b`, returning the adapter activation `x·A` too.
    fn project(
        &self,
        x: &Array2<F>,
        w: usize,
        b: usize,
        adapter: Option<(usize, usize)>,
    ) -> (Array2<F>, Option<Array2<F>>) {
        let mut y = x.dot(self.value(w));
        let u = adapter.map(|(a, bb)| {
            let u = x.dot(self.value(a));
            y.scaled_add(self.adapter_scale(), &u.dot(&self.value(bb).t()));
            u
        });
        y += self.value(b);
        (y, u)
    }

    #[allow(clippy::too_many_arguments)]
    fn project_backward(
        &self,
        x: &Array2<F>,
        dy: &Array2<F>,
        w: usize,
        b: usize,
        adapter: Option<(usize, usize)>,
        u: Option<&Array2<F>>,
        grads: &mut Grads<'_, F>,
    ) -> Array2<F> {
        if grads.tracks(w) {
            grads.add(w, x.t().dot(dy).view());
        }
        grads.add_rows(b, dy.view());
        let mut dx = dy.dot(&self.value(w).t());
        if let (Some((a, bb)), Some(u)) = (adapter, u) {
            let s = self.adapter_scale();
            if grads.tracks(bb) {
                grads.add(bb, (dy.t().dot(u) * s).view());
            }
            let du = dy.dot(self.value(bb)) * s;
            if grads.tracks(a) {
                grads.add(a, x.t().dot(&du).view());
            }
            dx += &du.dot(&self.value(a).t());
        }
        dx
    }

    fn layer_forward(&self, ls: &LayerSlots, x: Array2<F>, mode: &mut Mode<'_>) -> (Array2<F>, LayerCache<F>) {
        let cfg = &self.config;
        let (n, dh) = (x.nrows(), cfg.head_dim());
        let scale: F = cast(1.0 / (dh as f64).sqrt());
        let (q, uq) = self.project(&x, ls.q_w, ls.q_b, ls.lora_q);
        let (k, _) = self.project(&x, ls.k_w, ls.k_b, None);
        let (v, uv) = self.project(&x, ls.v_w, ls.v_b, ls.lora_v);
        let mut ctx = Array2::zeros((n, cfg.hidden));
        let mut probs = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut p);
            ctx.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            probs.push(p);
        }
        let mut attn = ctx.dot(self.value(ls.o_w)) + self.value(ls.o_b);
        let drop_attn = dropout(&mut attn, cfg.dropout, mode);
        let (y1, norm1) = layer_norm(&(&x + &attn), self.value(ls.ln1_g), self.value(ls.ln1_b));
        let pre_act = y1.dot(self.value(ls.ff1_w)) + self.value(ls.ff1_b);
        let act = pre_act.mapv(gelu);
        let mut ffn = act.dot(self.value(ls.ff2_w)) + self.value(ls.ff2_b);
        let drop_ffn = dropout(&mut ffn, cfg.dropout, mode);
        let (out, norm2) = layer_norm(&(&y1 + &ffn), self.value(ls.ln2_g), self.value(ls.ln2_b));
        let cache = LayerCache {
            x,
            q,
            k,
            v,
            uq,
            uv,
            probs,
            ctx,
            drop_attn,
            norm1,
            y1,
            pre_act,
            act,
            drop_ffn,
            norm2,
        };
        (out, cache)
    }

    fn layer_backward(
        &self,
        ls: &LayerSlots,
        c: &LayerCache<F>,
        dout: &Array2<F>,
        grads: &mut Grads<'_, F>,
    ) -> Array2<F> {
        let cfg = &self.config;
        let dh = cfg.head_dim();
        let scale: F = cast(1.0 / (dh as f64).sqrt());

        let dsum2 = layer_norm_backward(dout, self.value(ls.ln2_g), &c.norm2, grads, ls.ln2_g, ls.ln2_b);
        let mut dffn = dsum2.clone();
        if let Some(mask) = &c.drop_ffn {
            dffn *= mask;
        }
        if grads.tracks(ls.ff2_w) {
            grads.add(ls.ff2_w, c.act.t().dot(&dffn).view());
        }
        grads.add_rows(ls.ff2_b, dffn.view());
        let mut dpre = dffn.dot(&self.value(ls.ff2_w).t());
        dpre.zip_mut_with(&c.pre_act, |d, &x| *d *= gelu_grad(x));
        if grads.tracks(ls.ff1_w) {
            grads.add(ls.ff1_w, c.y1.t().dot(&dpre).view());
        }
        grads.add_rows(ls.ff1_b, dpre.view());
        let dy1 = dsum2 + dpre.dot(&self.value(ls.ff1_w).t());

        let dsum1 = layer_norm_backward(&dy1, self.value(ls.ln1_g), &c.norm1, grads, ls.ln1_g, ls.ln1_b);
        let mut dattn = dsum1.clone();
        if let Some(mask) = &c.drop_attn {
            dattn *= mask;
        }
        if grads.tracks(ls.o_w) {
            grads.add(ls.o_w, c.ctx.t().dot(&dattn).view());
        }
        grads.add_rows(ls.o_b, dattn.view());
        let dctx = dattn.dot(&self.value(ls.o_w).t());

        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for (h, p) in c.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dch = dctx.slice(cols);
            dv.slice_mut(cols).assign(&p.t().dot(&dch));
            let mut ds = dch.dot(&c.v.slice(cols).t());
            for (mut drow, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                let dot = drow.iter().zip(prow).map(|(&a, &b)| a * b).sum::<F>();
                drow.zip_mut_with(&prow, |d, &pv| *d = pv * (*d - dot) * scale);
            }
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let mut dx = dsum1;
        dx += &self.project_backward(&c.x, &dq, ls.q_w, ls.q_b, ls.lora_q, c.uq.as_ref(), grads);
        dx += &self.project_backward(&c.x, &dk, ls.k_w, ls.k_b, None, None, grads);
        dx += &self.project_backward(&c.x, &dv, ls.v_w, ls.v_b, ls.lora_v, c.uv.as_ref(), grads);
        dx
    }

    fn forward_one(
        &self,
        seq: &TokenSequence,
        mode: &mut Mode<'_>,
        keep: bool,
    ) -> Result<(Array1<F>, Option<Trace<F>>)> {
        let n = self.check_sequence(seq)?;
        let tok = self.value(self.slots.token);
        let pos = self.value(self.slots.position);
        let mut x = Array2::zeros((n, self.config.hidden));
        for (i, (mut row, &id)) in x.rows_mut().into_iter().zip(&seq.ids[..n]).enumerate() {
            row.assign(&tok.row(id as usize));
            row += &pos.row(i);
        }
        let mut layers = Vec::new();
        for ls in &self.slots.layers {
            let (out, cache) = self.layer_forward(ls, x, mode);
            if keep {
                layers.push(cache);
            }
            x = out;
        }
        let cls = x.slice(s![0..1, ..]).to_owned();
        let logits = (cls.dot(self.value(self.slots.cls_w)) + self.value(self.slots.cls_b)).remove_axis(Axis(0));
        Ok((logits, keep.then_some(Trace { layers, cls })))
    }

    /// Logits for one sequence.
    pub fn logits(&self, seq: &TokenSequence, mode: &mut Mode<'_>) -> Result<Array1<F>> {
        Ok(self.forward_one(seq, mode, false)?.0)
    }

    /// `B × 7` logits for a batch.
    pub fn forward(&self, batch: &[TokenSequence], mut mode: Mode<'_>) -> Result<Array2<F>> {
        let mut out = Array2::zeros((batch.len(), NUM_LABELS));
        for (seq, mut row) in batch.iter().zip(out.rows_mut()) {
            row.assign(&self.logits(seq, &mut mode)?);
        }
        Ok(out)
    }

    /// Mean binary cross-entropy over all `B × 7` outputs.
    pub fn loss(&self, batch: &[TokenSequence], targets: &[LabelVector], mode: Mode<'_>) -> Result<f64> {
        check_targets(batch, targets)?;
        let logits = self.forward(batch, mode)?;
        Ok(mean_bce(logits.view(), targets))
    }

    /// Loss and its gradient with respect to every tensor. Frozen tensors
    /// receive all-zero gradients.
    pub fn loss_and_gradients(
        &self,
        batch: &[TokenSequence],
        targets: &[LabelVector],
        mut mode: Mode<'_>,
    ) -> Result<(f64, Vec<Array2<F>>)> {
        check_targets(batch, targets)?;
        let mut store: Vec<Array2<F>> = self.tensors.iter().map(|t| Array2::zeros(t.value.raw_dim())).collect();
        let mut grads = Grads {
            frozen: self.tensors.iter().map(|t| t.frozen).collect(),
            store: &mut store,
        };
        let denom: F = cast((batch.len() * NUM_LABELS) as f64);
        let mut total = 0.0;
        for (seq, target) in batch.iter().zip(targets) {
            let (logits, trace) = self.forward_one(seq, &mut mode, true)?;
            let trace = trace.expect("trace requested");
            let bits = target.to_bools();
            let mut dlogits = Array2::zeros((1, NUM_LABELS));
            for (j, (&z, &y)) in logits.iter().zip(&bits).enumerate() {
                total += bce_loss(z.to_f64().unwrap(), y);
                let y: F = if y { F::one() } else { F::zero() };
                dlogits[[0, j]] = (sigmoid(z) - y) / denom;
            }
            if grads.tracks(self.slots.cls_w) {
                grads.add(self.slots.cls_w, trace.cls.t().dot(&dlogits).view());
            }
            grads.add(self.slots.cls_b, dlogits.view());
            let mut dx = Array2::zeros((seq.true_len, self.config.hidden));
            dx.row_mut(0)
                .assign(&dlogits.dot(&self.value(self.slots.cls_w).t()).row(0));
            for (ls, cache) in self.slots.layers.iter().zip(&trace.layers).rev() {
                dx = self.layer_backward(ls, cache, &dx, &mut grads);
            }
            if grads.tracks(self.slots.token) || grads.tracks(self.slots.position) {
                for (i, (row, &id)) in dx.rows().into_iter().zip(&seq.ids[..seq.true_len]).enumerate() {
                    if grads.tracks(self.slots.token) {
                        let mut dst = grads.store[self.slots.token].row_mut(id as usize);
                        dst += &row;
                    }
                    if grads.tracks(self.slots.position) {
                        let mut dst = grads.store[self.slots.position].row_mut(i);
                        dst += &row;
                    }
                }
            }
        }
        Ok((total / (batch.len() * NUM_LABELS) as f64, store))
    }

    /// Per-label sigmoid probabilities for a batch, evaluated without dropout.
    pub fn probabilities(&self, batch: &[TokenSequence]) -> Result<Array2<f64>> {
        Ok(self.forward(batch, Mode::Eval)?.mapv(|z| sigmoid(z.to_f64().unwrap())))
    }
}

fn check_targets(batch: &[TokenSequence], targets: &[LabelVector]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    if batch.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} sequences but {} targets",
            batch.len(),
            targets.len()
        )));
    }
    Ok(())
}

fn mean_bce<F: Scalar>(logits: ArrayView2<F>, targets: &[LabelVector]) -> f64 {
    let mut total = 0.0;
    for (row, target) in logits.rows().into_iter().zip(targets) {
        for (&z, &y) in row.iter().zip(&target.to_bools()) {
            total += bce_loss(z.to_f64().unwrap(), y);
        }
    }
    total / logits.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncoderConfig, LoraConfig};
    use rand::SeedableRng;

    fn config() -> EncoderConfig {
        EncoderConfig {
            vocab_size: 30,
            hidden: 8,
            layers: 2,
            heads: 2,
            ff_dim: 12,
            max_len: 10,
            dropout: 0.0,
            num_labels: NUM_LABELS,
        }
    }

    fn seq(ids: &[u32], max_len: usize) -> TokenSequence {
        let mut full = ids.to_vec();
        full.resize(max_len, 0);
        let mut mask = vec![1; ids.len()];
        mask.resize(max_len, 0);
        TokenSequence {
            ids: full,
            attention_mask: mask,
            true_len: ids.len(),
        }
    }

    #[test]
    fn bce_matches_naive_formula() {
        for z in [-3.0f64, -0.5, 0.0, 0.7, 4.0] {
            let p = 1.0 / (1.0 + (-z).exp());
            assert!((bce_loss(z, true) + p.ln()).abs() < 1e-12);
            assert!((bce_loss(z, false) + (1.0 - p).ln()).abs() < 1e-12);
        }
        assert!(bce_loss(800.0, false).is_finite());
        assert!(bce_loss(-800.0, true).is_finite());
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-2.5f64, -0.3, 0.0, 0.8, 3.1] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn padding_does_not_change_logits() {
        let m = Encoder::<f64>::init(&config(), 3).unwrap();
        let a = m.logits(&seq(&[2, 5, 7], 4), &mut Mode::Eval).unwrap();
        let b = m.logits(&seq(&[2, 5, 7], 10), &mut Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_sequences() {
        let m = Encoder::<f32>::init(&config(), 3).unwrap();
        assert!(m.logits(&seq(&[2, 99], 4), &mut Mode::Eval).is_err());
        assert!(m.logits(&seq(&[2; 11], 11), &mut Mode::Eval).is_err());
        assert!(m.loss(&[], &[], Mode::Eval).is_err());
    }

    #[test]
    fn dropout_consumes_no_randomness_at_zero() {
        let m = Encoder::<f32>::init(&config(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = m.logits(&seq(&[2, 4, 6], 5), &mut Mode::Train(&mut rng)).unwrap();
        assert_eq!(a, m.logits(&seq(&[2, 4, 6], 5), &mut Mode::Eval).unwrap());
        assert_eq!(rng.random::<u64>(), ChaCha8Rng::seed_from_u64(1).random::<u64>());
    }

    fn mode(rng: &mut Option<ChaCha8Rng>) -> Mode<'_> {
        match rng {
            Some(r) => Mode::Train(r),
            None => Mode::Eval,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn numeric_check(model: &mut Encoder<f64>, dropout_seed: Option<u64>) -> f64 {
        let batch = vec![seq(&[2, 3, 9, 11, 4], 10), seq(&[2, 17, 1, 28, 6, 6, 13], 10)];
        let targets = vec![
            LabelVector::from_bools(&[true, false, false, true, false, false, false]),
            LabelVector::from_bools(&[false; 7]),
        ];
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let reset = |rng: &mut Option<ChaCha8Rng>| {
            if let Some(s) = dropout_seed {
                *rng = Some(ChaCha8Rng::seed_from_u64(s));
            }
        };
        let (_, grads) = model.loss_and_gradients(&batch, &targets, mode(&mut rng)).unwrap();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for slot in 0..model.tensors.len() {
            if model.tensors[slot].frozen {
                continue;
            }
            for idx in 0..model.tensors[slot].value.len() {
                let orig = model.tensors[slot].value.as_slice().unwrap()[idx];
                model.tensors[slot].value.as_slice_mut().unwrap()[idx] = orig + h;
                reset(&mut rng);
                let up = model.loss(&batch, &targets, mode(&mut rng)).unwrap();
                model.tensors[slot].value.as_slice_mut().unwrap()[idx] = orig - h;
                reset(&mut rng);
                let down = model.loss(&batch, &targets, mode(&mut rng)).unwrap();
                model.tensors[slot].value.as_slice_mut().unwrap()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads[slot].as_slice().unwrap()[idx];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    fn perturb(model: &mut Encoder<f64>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in model.tensors.iter_mut() {
            t.value.mapv_inplace(|v| v + rng.random_range(-0.5..0.5));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut m = Encoder::<f64>::init(&config(), 11).unwrap();
        perturb(&mut m, 12);
        let worst = numeric_check(&mut m, None);
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn gradients_with_dropout_and_adapters() {
        let cfg = EncoderConfig {
            dropout: 0.2,
            ..config()
        };
        let mut m = Encoder::<f64>::init(&cfg, 11).unwrap();
        m.apply_lora(
            &LoraConfig {
                rank: 2,
                alpha: Some(3.0),
                targets: LoraConfig::new(2).targets,
            },
            4,
        )
        .unwrap();
        perturb(&mut m, 13);
        let worst = numeric_check(&mut m, Some(99));
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn frozen_tensors_get_zero_gradients() {
        let mut m = Encoder::<f64>::init(&config(), 1).unwrap();
        m.apply_lora(&LoraConfig::new(2), 2).unwrap();
        let (_, grads) = m
            .loss_and_gradients(
                &[seq(&[2, 5, 6], 10)],
                &[LabelVector::from_bools(&[true; 7])],
                Mode::Eval,
            )
            .unwrap();
        for ((spec, t), g) in m.specs().iter().zip(m.tensors()).zip(&grads) {
            if t.frozen {
                assert!(g.iter().all(|&v| v == 0.0), "{}", spec.name);
            }
        }
    }
}
