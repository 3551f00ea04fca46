//! Confusion counts, derived rates and McNemar's paired test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Confusion counts with benign as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub r#fn: u64,
}

impl Confusion {
    pub fn from_predictions(pred: &[Label], truth: &[Label]) -> Self {
        let mut c = Confusion::default();
        for (p, t) in pred.iter().zip(truth) {
            c.add(*p, *t);
        }
        c
    }

    pub fn add(&mut self, predicted: Label, truth: Label) {
        match (truth, predicted) {
            (Label::Benign, Label::Benign) => self.tp += 1,
            (Label::Vandal, Label::Vandal) => self.tn += 1,
            (Label::Vandal, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Vandal) => self.r#fn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.r#fn
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.r#fn += other.r#fn;
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        Metrics {
            accuracy: ratio(self.tp + self.tn, self.total()),
            tpr: ratio(self.tp, self.tp + self.r#fn),
            tnr: ratio(self.tn, self.tn + self.fp),
            fpr: ratio(self.fp, self.tn + self.fp),
            fnr: ratio(self.r#fn, self.tp + self.r#fn),
        }
    }
}

/// Rates derived from a confusion matrix; `None` when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ChiSquareCc,
    ExactBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// A correct, B wrong.
    pub b: u64,
    /// B correct, A wrong.
    pub c: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

/// Discordant pairs at or above which the chi-square approximation is used.
pub const MCNEMAR_EXACT_BELOW: u64 = 25;

/// `(|b − c| − 1)² / (b + c)`, or 0 when there are no discordant pairs.
pub fn mcnemar_statistic(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 0.0;
    }
    let d = b.abs_diff(c) as f64 - 1.0;
    d * d / n as f64
}

/// Chi-square(1) tail with the continuity correction capped at `|b − c|`.
pub fn mcnemar_chi2_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let d = (b.abs_diff(c) as f64 - 1.0).max(0.0);
    chi2_sf(d * d / n as f64)
}

pub fn chi2_sf(x: f64) -> f64 {
    ChiSquared::new(1.0).expect("one degree of freedom").sf(x)
}

/// Two-sided exact binomial p-value, `min(1, 2·P[X ≤ min(b, c)])`, X ~ Bin(b+c, ½).
pub fn mcnemar_exact_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    (2.0 * bin.cdf(b.min(c))).min(1.0)
}

/// Paired comparison of two classifiers on the same users.
pub fn mcnemar(preds_a: &[Label], preds_b: &[Label], truth: &[Label]) -> Result<McNemarResult> {
    if preds_a.len() != truth.len() || preds_b.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: if preds_a.len() != truth.len() { preds_a.len() } else { preds_b.len() },
        });
    }
    let (mut b, mut c) = (0u64, 0u64);
    for ((a, bb), t) in preds_a.iter().zip(preds_b).zip(truth) {
        match (a == t, bb == t) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c))
}

pub fn mcnemar_counts(b: u64, c: u64) -> McNemarResult {
    let (p_value, method) = if b + c < MCNEMAR_EXACT_BELOW {
        (mcnemar_exact_p(b, c), McNemarMethod::ExactBinomial)
    } else {
        (mcnemar_chi2_p(b, c), McNemarMethod::ChiSquareCc)
    };
    McNemarResult {
        b,
        c,
        statistic: mcnemar_statistic(b, c),
        p_value,
        method,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_follow_definitions() {
        let c = Confusion {
            tp: 8,
            tn: 5,
            fp: 1,
            r#fn: 2,
        };
        let m = c.metrics();
        assert_eq!(m.accuracy, Some(13.0 / 16.0));
        assert_eq!(m.tpr, Some(0.8));
        assert_eq!(m.tnr, Some(5.0 / 6.0));
        assert_eq!(m.fpr, Some(1.0 / 6.0));
        assert_eq!(m.fnr, Some(0.2));
        assert_eq!(Confusion::default().metrics().accuracy, None);
    }

    #[test]
    fn positive_class_is_benign() {
        let c = Confusion::from_predictions(
            &[Label::Benign, Label::Vandal, Label::Benign, Label::Vandal],
            &[Label::Benign, Label::Vandal, Label::Vandal, Label::Benign],
        );
        assert_eq!((c.tp, c.tn, c.fp, c.r#fn), (1, 1, 1, 1));
    }

    #[test]
    fn balanced_discordance() {
        let r = mcnemar_counts(7, 7);
        assert!((r.statistic - 1.0 / 14.0).abs() < 1e-12);
        assert!(r.p_value > 0.7);
        assert_eq!(r.method, McNemarMethod::ExactBinomial);
    }

    #[test]
    fn one_sided_discordance() {
        let r = mcnemar_counts(10, 0);
        assert!((r.statistic - 8.1).abs() < 1e-12);
        assert!(r.p_value < 0.01);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-12);
        assert!((chi2_sf(8.1) - 0.0044).abs() < 5e-5);
    }

    #[test]
    fn identical_predictions() {
        let p = [Label::Benign, Label::Vandal];
        let r = mcnemar(&p, &p, &[Label::Vandal, Label::Vandal]).unwrap();
        assert_eq!((r.b, r.c, r.statistic, r.p_value), (0, 0, 0.0, 1.0));
    }

    #[test]
    fn method_switches_at_25() {
        assert_eq!(mcnemar_counts(12, 12).method, McNemarMethod::ExactBinomial);
        assert_eq!(mcnemar_counts(13, 12).method, McNemarMethod::ChiSquareCc);
    }
}
