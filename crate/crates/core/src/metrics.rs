//! Stack-level and alarm-level ratios, the `F_beta` family and the weighted
//! binary cross-entropy used to train the upstream classifier.
//!
//! Ratios with a zero denominator are *undefined* and come back as `None`, never
//! as zero, so that averaging across databases skips them instead of dragging
//! the mean down.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::corpus::{BinaryLabel, StackLabel};
use crate::error::{Error, Result};

/// Stack-level confusion counts with `Fall` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Adds one stack. `Transition` stacks are not counted.
    pub fn record(&mut self, truth: StackLabel, predicted: BinaryLabel) {
        match (truth, predicted) {
            (StackLabel::Fall, BinaryLabel::Fall) => self.tp += 1,
            (StackLabel::Fall, BinaryLabel::NoFall) => self.fn_ += 1,
            (StackLabel::NoFall, BinaryLabel::Fall) => self.fp += 1,
            (StackLabel::NoFall, BinaryLabel::NoFall) => self.tn += 1,
            (StackLabel::Transition, _) => {}
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Alarm-level counts: one `TP_a` per detected fall, one `FP_a` per alarm that
/// touches no fall, one `FN_a` per missed fall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmCounts {
    #[serde(rename = "TP_a")]
    pub tp_a: u64,
    #[serde(rename = "FP_a")]
    pub fp_a: u64,
    #[serde(rename = "FN_a")]
    pub fn_a: u64,
}

impl AlarmCounts {
    pub fn new(tp_a: u64, fp_a: u64, fn_a: u64) -> Self {
        Self { tp_a, fp_a, fn_a }
    }

    /// Ground-truth falls accounted for by these counts.
    pub fn falls(&self) -> u64 {
        self.tp_a + self.fn_a
    }
}

impl Add for AlarmCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp_a: self.tp_a + o.tp_a,
            fp_a: self.fp_a + o.fp_a,
            fn_a: self.fn_a + o.fn_a,
        }
    }
}

impl AddAssign for AlarmCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `TN / (TN + FP)`
pub fn specificity(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tn, c.tn + c.fp)
}

/// `TP / (TP + FN)`
pub fn sensitivity(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

/// `TP / (TP + FP)`
pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fp)
}

/// `TP_a / (TP_a + FP_a)`
pub fn alarm_precision(a: &AlarmCounts) -> Option<f64> {
    ratio(a.tp_a, a.tp_a + a.fp_a)
}

/// `TP_a / (TP_a + FN_a)`
pub fn alarm_sensitivity(a: &AlarmCounts) -> Option<f64> {
    ratio(a.tp_a, a.tp_a + a.fn_a)
}

/// `(1 + beta^2) * p * se / (beta^2 * p + se)`.
///
/// `beta < 1` weighs precision more than sensitivity. Undefined when both
/// arguments are zero.
pub fn f_beta(p_a: f64, se_a: f64, beta: f64) -> Option<f64> {
    let b2 = beta * beta;
    let den = b2 * p_a + se_a;
    if den <= 0.0 {
        return None;
    }
    Some((1.0 + b2) * p_a * se_a / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// Weight of the Fall class (`t = 0`).
    pub w0: f64,
    /// Weight of the No-Fall class (`t = 1`).
    pub w1: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self { w0: 1.0, w1: 1.0 }
    }
}

pub const LOG_EPSILON: f64 = 1e-12;

/// Class-weighted binary cross-entropy of a No-Fall probability `p` against the
/// target class. `p` is clamped to `[1e-12, 1 - 1e-12]`.
pub fn weighted_bce(p: f64, target: BinaryLabel, params: &LossParams) -> f64 {
    let p = p.clamp(LOG_EPSILON, 1.0 - LOG_EPSILON);
    match target {
        BinaryLabel::NoFall => -params.w1 * p.ln(),
        BinaryLabel::Fall => -params.w0 * (1.0 - p).ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FBetaValue {
    pub beta: f64,
    pub value: Option<f64>,
}

/// Stack-level and alarm-level results with the raw counts they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sp: Option<f64>,
    pub se: Option<f64>,
    pub p: Option<f64>,
    pub p_a: Option<f64>,
    pub se_a: Option<f64>,
    pub f_beta: Vec<FBetaValue>,
    pub counts: ConfusionCounts,
    pub alarm_counts: AlarmCounts,
}

impl MetricReport {
    pub fn from_counts(counts: ConfusionCounts, alarm_counts: AlarmCounts, betas: &[f64]) -> Self {
        let p_a = alarm_precision(&alarm_counts);
        let se_a = alarm_sensitivity(&alarm_counts);
        let f_beta = betas
            .iter()
            .map(|&beta| FBetaValue {
                beta,
                value: match (p_a, se_a) {
                    (Some(p), Some(s)) => f_beta(p, s, beta),
                    _ => None,
                },
            })
            .collect();
        Self {
            sp: specificity(&counts),
            se: sensitivity(&counts),
            p: precision(&counts),
            p_a,
            se_a,
            f_beta,
            counts,
            alarm_counts,
        }
    }

    pub fn f_beta_for(&self, beta: f64) -> Option<f64> {
        self.f_beta
            .iter()
            .find(|f| f.beta == beta)
            .and_then(|f| f.value)
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Unweighted per-database mean of every metric, skipping undefined entries.
///
/// `F_beta` is averaged per beta from the input reports, not recomputed from the
/// averaged `p_a` and `se_a`. Counts in the result are pooled sums and are kept
/// for reference only.
pub fn macro_average(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("macro average of zero reports".into()));
    }
    let mut betas: Vec<f64> = Vec::new();
    for r in reports {
        for f in &r.f_beta {
            if !betas.contains(&f.beta) {
                betas.push(f.beta);
            }
        }
    }
    let f_beta = betas
        .into_iter()
        .map(|beta| FBetaValue {
            beta,
            value: mean_defined(reports.iter().map(|r| r.f_beta_for(beta))),
        })
        .collect();
    Ok(MetricReport {
        sp: mean_defined(reports.iter().map(|r| r.sp)),
        se: mean_defined(reports.iter().map(|r| r.se)),
        p: mean_defined(reports.iter().map(|r| r.p)),
        p_a: mean_defined(reports.iter().map(|r| r.p_a)),
        se_a: mean_defined(reports.iter().map(|r| r.se_a)),
        f_beta,
        counts: reports
            .iter()
            .map(|r| r.counts)
            .fold(Default::default(), Add::add),
        alarm_counts: reports
            .iter()
            .map(|r| r.alarm_counts)
            .fold(Default::default(), Add::add),
    })
}
