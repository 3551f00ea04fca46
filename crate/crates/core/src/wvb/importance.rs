//! Mean-decrease-in-impurity importance from a forest of totally randomized
//! trees: each split picks a random non-constant feature and a uniform random
//! threshold inside the node's value range.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub index: usize,
    pub name: Option<String>,
    /// Forest importance (mean over trees, normalized to sum to 1).
    pub mean: f64,
    /// Standard deviation of the per-tree importances.
    pub std: f64,
}

/// Features ranked by decreasing importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub n_trees: usize,
    pub seed: u64,
    pub ranked: Vec<FeatureImportance>,
}

impl Importance {
    pub fn with_names(mut self, names: &[&str]) -> Self {
        for f in &mut self.ranked {
            f.name = names.get(f.index).map(|s| s.to_string());
        }
        self
    }

    /// Rank (0-based) of feature `index`.
    pub fn rank_of(&self, index: usize) -> Option<usize> {
        self.ranked.iter().position(|f| f.index == index)
    }

    pub fn mean_of(&self, index: usize) -> Option<f64> {
        self.ranked.iter().find(|f| f.index == index).map(|f| f.mean)
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn grow(x: &Array2<f64>, positive: &[bool], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = x.ncols();
    let mut imp = vec![0.0; d];
    let mut stack: Vec<Vec<usize>> = vec![(0..x.nrows()).collect()];
    let mut candidates = Vec::with_capacity(d);
    while let Some(samples) = stack.pop() {
        let n = samples.len();
        let pos = samples.iter().filter(|&&i| positive[i]).count();
        if n < 2 || pos == 0 || pos == n {
            continue;
        }
        candidates.clear();
        for f in 0..d {
            let col: ArrayView1<f64> = x.column(f);
            let (lo, hi) = samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(col[i]), hi.max(col[i]))
                });
            if hi > lo {
                candidates.push((f, lo, hi));
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (f, lo, hi) = candidates[rng.random_range(0..candidates.len())];
        let mut t = rng.random_range(lo..hi);
        if t >= hi {
            t = lo;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x[[i, f]] <= t);
        let lp = left.iter().filter(|&&i| positive[i]).count();
        let rp = pos - lp;
        imp[f] += n as f64 * gini(pos, n)
            - left.len() as f64 * gini(lp, left.len())
            - right.len() as f64 * gini(rp, right.len());
        stack.push(right);
        stack.push(left);
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    imp
}

/// Ranks features by impurity decrease over `n_trees` totally randomized trees.
pub fn feature_importance(
    x: &Array2<f64>,
    y: &[Label],
    n_trees: usize,
    seed: u64,
) -> Result<Importance> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.len() < 2 || n_trees == 0 {
        return Err(Error::InvalidParam(
            "importance needs at least two samples and one tree".into(),
        ));
    }
    let positive: Vec<bool> = y.iter().map(|l| l.is_positive()).collect();
    if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
        return Err(Error::SingleClass);
    }
    let per_tree: Vec<Vec<f64>> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            grow(x, &positive, &mut rng)
        })
        .collect();
    let d = x.ncols();
    let trees = per_tree.len() as f64;
    let mut mean = vec![0.0; d];
    for tree in &per_tree {
        for (m, v) in mean.iter_mut().zip(tree) {
            *m += v / trees;
        }
    }
    let std: Vec<f64> = (0..d)
        .map(|f| {
            let var = per_tree.iter().map(|t| (t[f] - mean[f]).powi(2)).sum::<f64>() / trees;
            var.sqrt()
        })
        .collect();
    let total: f64 = mean.iter().sum();
    if total > 0.0 {
        mean.iter_mut().for_each(|v| *v /= total);
    }
    let mut ranked: Vec<FeatureImportance> = (0..d)
        .map(|f| FeatureImportance {
            index: f,
            name: None,
            mean: mean[f],
            std: std[f],
        })
        .collect();
    ranked.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.index.cmp(&b.index)));
    Ok(Importance {
        n_trees,
        seed,
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn planted(n: usize, seed: u64, duplicate_signal: bool) -> (Array2<f64>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 4));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let benign = rng.random_bool(0.5);
            let signal = if rng.random_bool(0.9) { benign } else { !benign };
            x[[i, 0]] = f64::from(u8::from(signal));
            x[[i, 1]] = if duplicate_signal {
                x[[i, 0]]
            } else {
                f64::from(u8::from(rng.random_bool(0.5)))
            };
            x[[i, 2]] = rng.random::<f64>();
            x[[i, 3]] = f64::from(rng.random_range(0..5u8));
            y.push(Label::from_positive(benign));
        }
        (x, y)
    }

    #[test]
    fn planted_signal_ranks_first() {
        let (x, y) = planted(600, 1, false);
        let imp = feature_importance(&x, &y, 100, 9).unwrap();
        assert_eq!(imp.ranked[0].index, 0);
        let total: f64 = imp.ranked.iter().map(|f| f.mean).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(imp.ranked.iter().all(|f| f.mean >= 0.0 && f.std >= 0.0));
    }

    #[test]
    fn identical_features_share_importance() {
        let (x, y) = planted(400, 2, true);
        let mut diff = 0.0;
        let seeds = 20;
        for s in 0..seeds {
            let imp = feature_importance(&x, &y, 50, s).unwrap();
            diff += imp.mean_of(0).unwrap() - imp.mean_of(1).unwrap();
        }
        assert!((diff / seeds as f64).abs() < 0.05, "mean gap {}", diff / seeds as f64);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = Array2::zeros((3, 2));
        let y = vec![Label::Benign; 3];
        assert!(matches!(feature_importance(&x, &y, 5, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = planted(200, 3, false);
        assert_eq!(
            feature_importance(&x, &y, 20, 4).unwrap(),
            feature_importance(&x, &y, 20, 4).unwrap()
        );
    }
}
