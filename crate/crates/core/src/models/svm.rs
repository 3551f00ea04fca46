//! Linear SVM trained with Pegasos steps on the primal hinge objective.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
    /// Objective of the model reported after each epoch.
    pub objective_curve: Vec<f64>,
}

fn dot(w: &[f64], x: ArrayView1<f64>) -> f64 {
    w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

/// Unregularized bias minimizing the summed hinge loss for fixed scores.
///
/// The loss is piecewise linear in `b` with breakpoints `y_i − s_i`; its slope
/// is `−P + m` after the `m`-th breakpoint, so the minimizers lie between the
/// `P`-th and `(P+1)`-th, where `P` counts positives.
pub(crate) fn refit_bias(scores: &[f64], y: &[f64]) -> f64 {
    let positives = y.iter().filter(|v| **v > 0.0).count();
    let mut bp: Vec<f64> = scores.iter().zip(y).map(|(s, y)| y - s).collect();
    bp.sort_by(f64::total_cmp);
    if positives == 0 || positives == bp.len() {
        return 0.0;
    }
    0.5 * (bp[positives - 1] + bp[positives])
}

/// `λ/2·‖w‖² + mean hinge loss`.
pub fn svm_objective(x: &Array2<f64>, y: &[Label], w: &[f64], b: f64, lambda: f64) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, l)| (1.0 - l.sign() * (dot(w, row) + b)).max(0.0))
        .sum();
    reg + hinge / y.len() as f64
}

pub(crate) fn train(x: &Array2<f64>, y: &[Label], lambda: f64, epochs: usize, seed: u64) -> Result<LinearSvm> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParam("svm lambda must be positive".into()));
    }
    let (n, d) = x.dim();
    let signs: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    if signs.iter().all(|s| *s > 0.0) || signs.iter().all(|s| *s < 0.0) {
        return Err(Error::SingleClass);
    }
    if epochs == 0 {
        return Err(Error::InvalidParam("svm needs at least one epoch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    // Per-epoch sums of the iterates; the reported model averages the later half.
    let mut epoch_sums: Vec<Vec<f64>> = Vec::with_capacity(epochs);
    let mut avg = vec![0.0; d];
    let mut b = 0.0;
    let mut t = 0u64;
    let mut curve = Vec::with_capacity(epochs);
    let mut scores = vec![0.0; n];
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut sum = vec![0.0; d];
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let margin = signs[i] * dot(&w, row);
            let shrink = 1.0 - 1.0 / t as f64;
            if margin < 1.0 {
                let step = eta * signs[i];
                for (wj, xj) in w.iter_mut().zip(row.iter()) {
                    *wj = shrink * *wj + step * xj;
                }
            } else {
                w.iter_mut().for_each(|wj| *wj *= shrink);
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let scale = radius / norm;
                w.iter_mut().for_each(|wj| *wj *= scale);
            }
            for (s, wj) in sum.iter_mut().zip(&w) {
                *s += wj;
            }
        }
        epoch_sums.push(sum);
        let from = epoch + 1 - (epoch + 2) / 2;
        avg.iter_mut().for_each(|a| *a = 0.0);
        for sum in &epoch_sums[from..] {
            for (a, s) in avg.iter_mut().zip(sum) {
                *a += s;
            }
        }
        let count = ((epoch + 1 - from) * n) as f64;
        avg.iter_mut().for_each(|a| *a /= count);
        for (s, row) in scores.iter_mut().zip(x.rows()) {
            *s = dot(&avg, row);
        }
        b = refit_bias(&scores, &signs);
        curve.push(svm_objective(x, y, &avg, b, lambda));
    }
    Ok(LinearSvm {
        w: avg,
        b,
        objective_curve: curve,
    })
}

impl LinearSvm {
    pub fn margin(&self, x: ArrayView1<f64>) -> f64 {
        dot(&self.w, x) + self.b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_refit_minimizes_hinge() {
        let scores = [0.3, -1.2, 2.0, 0.1, -0.4, 0.9];
        let y = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
        let b = refit_bias(&scores, &y);
        let loss = |b: f64| -> f64 {
            scores.iter().zip(&y).map(|(s, y)| (1.0 - y * (s + b)).max(0.0)).sum()
        };
        for k in -400..=400 {
            let other = k as f64 * 0.01;
            assert!(loss(b) <= loss(other) + 1e-12, "b={b} other={other}");
        }
    }

    #[test]
    fn symmetric_scores_give_zero_bias() {
        let scores = [0.5, 1.5, -0.5, -1.5, 0.2, -0.2];
        let y = [1.0, 1.0, -1.0, -1.0, -1.0, 1.0];
        assert_eq!(refit_bias(&scores, &y), 0.0);
    }
}
