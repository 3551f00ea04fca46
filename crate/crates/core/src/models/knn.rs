//! Brute-force k-nearest-neighbor classification.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub dim: usize,
    /// Training rows, row-major.
    pub x: Vec<f64>,
    pub y: Vec<Label>,
}

fn sq_dist(a: &[f64], b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl Knn {
    pub fn new(x: &Array2<f64>, y: &[Label], k: usize) -> Self {
        Knn {
            k,
            dim: x.ncols(),
            x: x.iter().copied().collect(),
            y: y.to_vec(),
        }
    }

    /// Indices of the `k` nearest training rows, nearest first; distance ties
    /// go to the lower index.
    pub fn neighbors(&self, q: ArrayView1<f64>) -> Vec<usize> {
        let k = self.k.min(self.y.len());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, row) in self.x.chunks_exact(self.dim.max(1)).enumerate().take(self.y.len()) {
            let d = sq_dist(row, q);
            if best.len() == k && best.last().is_some_and(|&(worst, _)| d >= worst) {
                continue;
            }
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
            best.truncate(k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority label of the neighbors; a tied vote takes the nearest one's label.
    pub fn predict_row(&self, q: ArrayView1<f64>) -> Label {
        let nn = self.neighbors(q);
        let benign = nn.iter().filter(|&&i| self.y[i] == Label::Benign).count();
        let vandal = nn.len() - benign;
        match benign.cmp(&vandal) {
            std::cmp::Ordering::Greater => Label::Benign,
            std::cmp::Ordering::Less => Label::Vandal,
            std::cmp::Ordering::Equal => nn.first().map_or(Label::Benign, |&i| self.y[i]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_match_with_k1() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]];
        let knn = Knn::new(&x, &[Label::Vandal, Label::Benign, Label::Vandal], 1);
        assert_eq!(knn.predict_row(array![1.0, 1.0].view()), Label::Benign);
    }

    #[test]
    fn two_vandals_one_benign_votes_vandal() {
        let x = array![[0.0], [0.1], [0.2], [9.0]];
        let knn = Knn::new(&x, &[Label::Benign, Label::Vandal, Label::Vandal, Label::Benign], 3);
        assert_eq!(knn.predict_row(array![0.0].view()), Label::Vandal);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let x = array![[1.0], [-1.0], [1.0], [-1.0]];
        let knn = Knn::new(&x, &[Label::Benign; 4], 2);
        assert_eq!(knn.neighbors(array![0.0].view()), vec![0, 1]);
    }

    #[test]
    fn tied_vote_uses_nearest() {
        let x = array![[0.0], [0.5], [3.0], [4.0]];
        let knn = Knn::new(&x, &[Label::Vandal, Label::Benign, Label::Benign, Label::Vandal], 2);
        assert_eq!(knn.predict_row(array![0.1].view()), Label::Vandal);
    }
}
