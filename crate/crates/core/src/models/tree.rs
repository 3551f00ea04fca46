//! CART decision trees on Gini impurity and bagged random forests.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: Label,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Nodes in creation order; the root is node 0.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, x: ArrayView1<f64>) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Growth options shared by single trees and forest members.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grow {
    pub min_split: usize,
    /// Features sampled per split; `None` evaluates every feature.
    pub max_features: Option<usize>,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

fn majority(pos: f64, neg: f64) -> Label {
    Label::from_positive(pos >= neg)
}

/// Best split of `rows` on `feature`, if any value boundary exists.
fn best_on_feature(
    x: &Array2<f64>,
    positive: &[bool],
    weight: &[f64],
    rows: &[usize],
    feature: usize,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<(f64, f64)> {
    scratch.clear();
    scratch.extend(rows.iter().map(|&i| (x[[i, feature]], i)));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut tp, mut tn) = (0.0, 0.0);
    for &(_, i) in scratch.iter() {
        if positive[i] {
            tp += weight[i];
        } else {
            tn += weight[i];
        }
    }
    let (mut lp, mut ln) = (0.0, 0.0);
    let mut best: Option<(f64, f64)> = None;
    for w in 0..scratch.len() - 1 {
        let (a, i) = scratch[w];
        if positive[i] {
            lp += weight[i];
        } else {
            ln += weight[i];
        }
        let b = scratch[w + 1].0;
        if b <= a {
            continue;
        }
        let (rp, rn) = (tp - lp, tn - ln);
        let score = (lp * lp + ln * ln) / (lp + ln) + (rp * rp + rn * rn) / (rp + rn);
        if best.is_none_or(|(s, _)| score > s) {
            let mut thr = a + (b - a) / 2.0;
            if thr <= a {
                thr = b;
            }
            best = Some((score, thr));
        }
    }
    best
}

/// Grows a tree over the rows with positive `weight`.
pub(crate) fn grow_tree(
    x: &Array2<f64>,
    positive: &[bool],
    weight: &[f64],
    opts: Grow,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let d = x.ncols();
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| weight[i] > 0.0).collect();
    let mut nodes = vec![Node::Leaf {
        label: Label::Benign,
    }];
    let mut stack = vec![(0usize, rows)];
    let mut scratch = Vec::new();
    while let Some((at, rows)) = stack.pop() {
        let (mut pos, mut neg) = (0.0, 0.0);
        for &i in &rows {
            if positive[i] {
                pos += weight[i];
            } else {
                neg += weight[i];
            }
        }
        nodes[at] = Node::Leaf {
            label: majority(pos, neg),
        };
        if rows.len() < opts.min_split.max(2) || pos == 0.0 || neg == 0.0 {
            continue;
        }
        let candidates: Vec<usize> = match opts.max_features {
            Some(m) if m < d => {
                let mut c = sample(rng, d, m).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..d).collect(),
        };
        let mut best: Option<Best> = None;
        let mut search = |features: &[usize], best: &mut Option<Best>| {
            for &f in features {
                if let Some((score, threshold)) =
                    best_on_feature(x, positive, weight, &rows, f, &mut scratch)
                {
                    if best.as_ref().is_none_or(|b| score > b.score) {
                        *best = Some(Best {
                            score,
                            feature: f,
                            threshold,
                        });
                    }
                }
            }
        };
        search(&candidates, &mut best);
        if best.is_none() && candidates.len() < d {
            let rest: Vec<usize> = (0..d).filter(|f| candidates.binary_search(f).is_err()).collect();
            search(&rest, &mut best);
        }
        let Some(best) = best else { continue };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x[[i, best.feature]] < best.threshold);
        let l = nodes.len();
        nodes.push(Node::Leaf {
            label: Label::Benign,
        });
        nodes.push(Node::Leaf {
            label: Label::Benign,
        });
        nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: l + 1,
        };
        stack.push((l + 1, right));
        stack.push((l, left));
    }
    DecisionTree { nodes }
}

pub(crate) fn train_tree(x: &Array2<f64>, positive: &[bool], min_split: usize) -> DecisionTree {
    let weight = vec![1.0; x.nrows()];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    grow_tree(
        x,
        positive,
        &weight,
        Grow {
            min_split,
            max_features: None,
        },
        &mut rng,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Features sampled per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_split: usize,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            n_trees: 10,
            bootstrap: true,
            max_features: None,
            min_split: 2,
        }
    }
}

pub(crate) fn train_forest(
    x: &Array2<f64>,
    positive: &[bool],
    opts: ForestOptions,
    seed: u64,
) -> RandomForest {
    let (n, d) = x.dim();
    let m = opts
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
    let trees = (0..opts.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut weight = vec![0.0; n];
            if opts.bootstrap {
                for _ in 0..n {
                    weight[rng.random_range(0..n)] += 1.0;
                }
            } else {
                weight.iter_mut().for_each(|w| *w = 1.0);
            }
            grow_tree(
                x,
                positive,
                &weight,
                Grow {
                    min_split: opts.min_split,
                    max_features: Some(m),
                },
                &mut rng,
            )
        })
        .collect();
    RandomForest { trees }
}

impl RandomForest {
    /// Majority vote; ties go to benign.
    pub fn predict_row(&self, x: ArrayView1<f64>) -> Label {
        let benign = self
            .trees
            .iter()
            .filter(|t| t.predict_row(x) == Label::Benign)
            .count();
        Label::from_positive(2 * benign >= self.trees.len())
    }
}
