//! Threshold-derived measures: error rate, fairness gaps, calibration gap.

use serde::{Deserialize, Serialize};

use super::EvalContext;
use crate::error::{Error, Result};
use crate::gbt::sigmoid;

/// Hard labels `1{sigmoid(margin) >= thr}`.
pub fn hard_labels(margins: &[f64], thr: f64) -> Vec<u8> {
    margins
        .iter()
        .map(|&m| u8::from(sigmoid(m) >= thr))
        .collect()
}

pub fn mmce(ctx: &EvalContext<'_>) -> Result<f64> {
    mmce_from_margins(ctx.margins_at()?, &ctx.data.labels, ctx.thr)
}

pub fn mmce_from_margins(margins: &[f64], labels: &[u8], thr: f64) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Input("mmce on empty data".into()));
    }
    let wrong = margins
        .iter()
        .zip(labels)
        .filter(|(&m, &y)| u8::from(sigmoid(m) >= thr) != y)
        .count();
    Ok(wrong as f64 / labels.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    fn add(&mut self, pred: u8, truth: u8) {
        match (pred, truth) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Result<f64> {
        let pos = self.tp + self.fn_;
        if pos == 0 {
            return Err(Error::UndefinedRate("group has no actual positives".into()));
        }
        Ok(self.tp as f64 / pos as f64)
    }

    pub fn fnr(&self) -> Result<f64> {
        Ok(1.0 - self.tpr()?)
    }

    pub fn fpr(&self) -> Result<f64> {
        let neg = self.fp + self.tn;
        if neg == 0 {
            return Err(Error::UndefinedRate("group has no actual negatives".into()));
        }
        Ok(self.fp as f64 / neg as f64)
    }

    /// Harmonic mean of precision and recall; 0 when undefined.
    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            log::warn!("F1 undefined (no positives predicted or present); using 0");
            return 0.0;
        }
        (2 * self.tp) as f64 / den as f64
    }
}

/// Per-group confusion tables for hard predictions.
pub fn group_confusions(pred: &[u8], truth: &[u8], groups: &[u8]) -> Result<[Confusion; 2]> {
    if pred.len() != truth.len() || groups.len() != truth.len() {
        return Err(Error::arg("group labels not aligned with data rows"));
    }
    let mut c = [Confusion::default(); 2];
    for ((&p, &y), &g) in pred.iter().zip(truth).zip(groups) {
        if g > 1 {
            return Err(Error::arg("group labels must be 0 or 1"));
        }
        c[g as usize].add(p, y);
    }
    if c[0].total() == 0 || c[1].total() == 0 {
        return Err(Error::GroupCoverage(
            "both protected groups must be present".into(),
        ));
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessKind {
    /// |TPR_0 - TPR_1|
    Independence,
    /// max(|FPR_0 - FPR_1|, |FNR_0 - FNR_1|)
    Sufficiency,
    /// |F1_0 - F1_1|
    F1,
}

pub fn gap_from_confusions(c: &[Confusion; 2], kind: FairnessKind) -> Result<f64> {
    Ok(match kind {
        FairnessKind::Independence => (c[0].tpr()? - c[1].tpr()?).abs(),
        FairnessKind::Sufficiency => {
            let fpr = (c[0].fpr()? - c[1].fpr()?).abs();
            let fnr = (c[0].fnr()? - c[1].fnr()?).abs();
            fpr.max(fnr)
        }
        FairnessKind::F1 => (c[0].f1() - c[1].f1()).abs(),
    })
}

pub fn fairness_gap(ctx: &EvalContext<'_>, groups: &[u8], kind: FairnessKind) -> Result<f64> {
    let pred = hard_labels(ctx.margins_at()?, ctx.thr);
    let c = group_confusions(&pred, &ctx.data.labels, groups)?;
    gap_from_confusions(&c, kind)
}

/// Expected calibration error over `bins` equal-width probability bins.
pub fn expected_calibration_error(probs: &[f64], labels: &[u8], bins: usize) -> f64 {
    let mut count = vec![0usize; bins];
    let mut psum = vec![0.0; bins];
    let mut ysum = vec![0.0; bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = ((p * bins as f64).floor() as usize).min(bins - 1);
        count[b] += 1;
        psum[b] += p;
        ysum[b] += f64::from(y);
    }
    let n = probs.len() as f64;
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (psum[b] / c - ysum[b] / c).abs()
        })
        .sum()
}

pub fn calibration_gap_from_probs(
    probs: &[f64],
    labels: &[u8],
    groups: &[u8],
    bins: usize,
) -> Result<f64> {
    if bins < 2 {
        return Err(Error::arg("calibration needs at least 2 bins"));
    }
    if probs.len() != labels.len() || groups.len() != labels.len() {
        return Err(Error::arg("group labels not aligned with data rows"));
    }
    let mut ece = [0.0; 2];
    for (g, e) in ece.iter_mut().enumerate() {
        let (p, y): (Vec<f64>, Vec<u8>) = probs
            .iter()
            .zip(labels)
            .zip(groups)
            .filter(|(_, &gg)| gg as usize == g)
            .map(|((&p, &y), _)| (p, y))
            .unzip();
        if p.is_empty() {
            return Err(Error::GroupCoverage(format!("group {g} absent")));
        }
        *e = expected_calibration_error(&p, &y, bins);
    }
    Ok((ece[0] - ece[1]).abs())
}

pub fn calibration_gap(ctx: &EvalContext<'_>, groups: &[u8], bins: usize) -> Result<f64> {
    let probs: Vec<f64> = ctx.margins_at()?.iter().map(|&m| sigmoid(m)).collect();
    calibration_gap_from_probs(&probs, &ctx.data.labels, groups, bins)
}
