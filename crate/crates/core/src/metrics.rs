//! Multi-label evaluation metrics.
//!
//! Predictions and gold labels are `n × L` indicator matrices. F1 and ROC
//! AUC are computed per label and averaged with weights proportional to
//! gold support. MCC and Cohen's kappa are computed on the flattened
//! indicator vectors (all `n·L` cells treated as one binary problem).
//!
//! Degenerate denominators give 0 for F1, MCC and kappa.

use std::fmt;

use indexmap::IndexMap;
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check_shapes(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    fn from_pairs<'a>(pairs: impl Iterator<Item = (&'a bool, &'a bool)>) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in pairs {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn mcc(&self) -> f64 {
        let [tp, fp, fn_, tn] = [self.tp, self.fp, self.fn_, self.tn].map(|v| v as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / denom.sqrt()
        }
    }

    pub fn kappa(&self) -> f64 {
        let [tp, fp, fn_, tn] = [self.tp, self.fp, self.fn_, self.tn].map(|v| v as f64);
        let n = tp + fp + fn_ + tn;
        if n == 0.0 {
            return 0.0;
        }
        let observed = (tp + tn) / n;
        let expected = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) / (n * n);
        if expected == 1.0 {
            0.0
        } else {
            (observed - expected) / (1.0 - expected)
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn per_label_confusion(pred: ArrayView2<bool>, gold: ArrayView2<bool>) -> Result<Vec<Confusion>> {
    check_shapes(pred.dim(), gold.dim())?;
    Ok(pred
        .columns()
        .into_iter()
        .zip(gold.columns())
        .map(|(p, g)| Confusion::from_pairs(p.iter().zip(g.iter())))
        .collect())
}

/// Support-weighted mean of per-label F1.
pub fn weighted_f1(pred: ArrayView2<bool>, gold: ArrayView2<bool>) -> Result<f64> {
    check_shapes(pred.dim(), gold.dim())?;
    if pred.nrows() == 0 {
        return Err(Error::Input("weighted F1 of an empty prediction set".into()));
    }
    let conf = per_label_confusion(pred, gold)?;
    let total: u64 = conf.iter().map(|c| c.tp + c.fn_).sum();
    if total == 0 {
        return Ok(0.0);
    }
    Ok(conf.iter().map(|c| c.f1() * (c.tp + c.fn_) as f64).sum::<f64>() / total as f64)
}

/// Binary AUC by the Mann-Whitney rank-sum statistic with midranks for
/// ties. `None` when the column lacks positives or negatives.
pub fn auc_rank(scores: ArrayView1<f64>, gold: ArrayView1<bool>) -> Option<f64> {
    let n = scores.len();
    let n_pos = gold.iter().filter(|&&g| g).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives; midranks of tied groups are
    // half-integers, so doubling keeps everything integral.
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, midrank (i + j + 2) / 2
        let midrank2 = (i + j + 2) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| gold[k]).count() as u64;
        pos_rank_sum2 += midrank2 * pos_in_group;
        i = j + 1;
    }
    let (np, nn) = (n_pos as u64, n_neg as u64);
    // U = R - np(np+1)/2, doubled: 2U = 2R - np(np+1)
    let u2 = pos_rank_sum2 - np * (np + 1);
    Some(u2 as f64 / (2 * np * nn) as f64)
}

/// Support-weighted ROC AUC over labels that have both classes present.
pub fn roc_auc_weighted(scores: ArrayView2<f64>, gold: ArrayView2<bool>) -> Result<f64> {
    check_shapes(scores.dim(), gold.dim())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("non-finite score".into()));
    }
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for (s, g) in scores.columns().into_iter().zip(gold.columns()) {
        if let Some(auc) = auc_rank(s, g) {
            let support = g.iter().filter(|&&x| x).count() as f64;
            weighted += auc * support;
            weight += support;
        }
    }
    if weight == 0.0 {
        return Err(Error::Input(
            "ROC AUC undefined: every label lacks positives or negatives".into(),
        ));
    }
    Ok(weighted / weight)
}

fn flat_confusion(pred: ArrayView2<bool>, gold: ArrayView2<bool>) -> Result<Confusion> {
    check_shapes(pred.dim(), gold.dim())?;
    Ok(Confusion::from_pairs(pred.iter().zip(gold.iter())))
}

/// Matthews correlation on the flattened indicator matrices.
pub fn mcc_flat(pred: ArrayView2<bool>, gold: ArrayView2<bool>) -> Result<f64> {
    Ok(flat_confusion(pred, gold)?.mcc())
}

/// Cohen's kappa on the flattened indicator matrices.
pub fn kappa_flat(pred: ArrayView2<bool>, gold: ArrayView2<bool>) -> Result<f64> {
    Ok(flat_confusion(pred, gold)?.kappa())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub weighted_f1: f64,
    pub roc_auc: f64,
    pub mcc: f64,
    pub kappa: f64,
    pub per_label: IndexMap<String, LabelScores>,
}

/// Assemble all four metrics plus the per-label breakdown. `names` labels
/// the matrix columns.
pub fn report<S: AsRef<str>>(
    scores: ArrayView2<f64>,
    pred: ArrayView2<bool>,
    gold: ArrayView2<bool>,
    names: &[S],
) -> Result<MetricsReport> {
    check_shapes(pred.dim(), gold.dim())?;
    check_shapes(scores.dim(), gold.dim())?;
    if names.len() != gold.ncols() {
        return Err(Error::Shape(format!(
            "{} label names for {} columns",
            names.len(),
            gold.ncols()
        )));
    }
    let per_label = names
        .iter()
        .zip(per_label_confusion(pred, gold)?)
        .map(|(name, c)| {
            (
                name.as_ref().to_string(),
                LabelScores {
                    precision: c.precision(),
                    recall: c.recall(),
                    f1: c.f1(),
                    support: c.tp + c.fn_,
                },
            )
        })
        .collect();
    Ok(MetricsReport {
        weighted_f1: weighted_f1(pred, gold)?,
        roc_auc: roc_auc_weighted(scores, gold)?,
        mcc: mcc_flat(pred, gold)?,
        kappa: kappa_flat(pred, gold)?,
        per_label,
    })
}

impl MetricsReport {
    /// One-row table in the column order F1, ROC AUC, MCC, Kappa.
    pub fn table(&self, row_name: &str) -> String {
        let width = row_name.len().max("Model".len());
        format!(
            "{:<width$} | {:>8} | {:>8} | {:>8} | {:>11}\n{:<width$} | {:>8.3} | {:>8.3} | {:>8.3} | {:>11.3}\n",
            "Model",
            "F1 Score",
            "ROC AUC",
            "MCC",
            "Kappa Score",
            row_name,
            self.weighted_f1,
            self.roc_auc,
            self.mcc,
            self.kappa,
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table("model"))?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<14} {:>9} {:>9} {:>9} {:>8}",
            "label", "precision", "recall", "f1", "support"
        )?;
        for (name, s) in &self.per_label {
            writeln!(
                f,
                "{:<14} {:>9.3} {:>9.3} {:>9.3} {:>8}",
                name, s.precision, s.recall, s.f1, s.support
            )?;
        }
        Ok(())
    }
}
