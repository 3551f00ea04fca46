//! Classifiers behind one train/predict contract: linear SVM, decision tree,
//! random forest and k-nearest neighbors. Benign is the positive class.

mod knn;
mod svm;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

pub use self::knn::Knn;
pub use self::svm::{svm_objective, LinearSvm};
pub use self::tree::{DecisionTree, ForestOptions, Node, RandomForest};

const FORMAT: &str = "vews-model/1";

/// Per-feature centering and scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let (n, d) = x.dim();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        if n > 0 {
            for row in x.rows() {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            for row in x.rows() {
                for ((s, m), v) in std.iter_mut().zip(&mean).zip(row) {
                    *s += (v - m) * (v - m);
                }
            }
            std.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
        }
        Standardizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardized copy of `x`; zero-variance columns pass through unchanged.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                if *s > 0.0 {
                    *v = (*v - m) / s;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    Dtree,
    Rforest,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Svm, ModelKind::Dtree, ModelKind::Rforest, ModelKind::Knn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Dtree => "dtree",
            ModelKind::Rforest => "rforest",
            ModelKind::Knn => "knn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown model kind {s:?} (svm, dtree, rforest, knn)")))
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub min_split: usize,
    pub forest: ForestOptions,
    pub knn_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            svm_lambda: 1e-4,
            svm_epochs: 20,
            min_split: 2,
            forest: ForestOptions::default(),
            knn_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Svm(LinearSvm),
    Dtree(DecisionTree),
    Rforest(RandomForest),
    Knn(Knn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub kind: ModelKind,
    pub seed: u64,
    pub config: ModelConfig,
    pub standardizer: Standardizer,
    pub params: ModelParams,
}

fn check_training(x: &Array2<f64>, y: &[Label]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidParam("no training rows".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("training features must be finite".into()));
    }
    Ok(())
}

/// Trains a model of `kind` on raw features `x`; standardization is fitted here.
pub fn train(kind: ModelKind, x: &Array2<f64>, y: &[Label], config: &ModelConfig, seed: u64) -> Result<TrainedModel> {
    check_training(x, y)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x)?;
    let positive: Vec<bool> = y.iter().map(|l| l.is_positive()).collect();
    let params = match kind {
        ModelKind::Svm => ModelParams::Svm(svm::train(&xs, y, config.svm_lambda, config.svm_epochs, seed)?),
        ModelKind::Dtree => ModelParams::Dtree(tree::train_tree(&xs, &positive, config.min_split)),
        ModelKind::Rforest => {
            if config.forest.n_trees == 0 {
                return Err(Error::InvalidParam("forest needs at least one tree".into()));
            }
            ModelParams::Rforest(tree::train_forest(&xs, &positive, config.forest, seed))
        }
        ModelKind::Knn => {
            if config.knn_k == 0 {
                return Err(Error::InvalidParam("knn k must be positive".into()));
            }
            ModelParams::Knn(Knn::new(&xs, y, config.knn_k))
        }
    };
    Ok(TrainedModel {
        format: FORMAT.to_owned(),
        kind,
        seed,
        config: *config,
        standardizer,
        params,
    })
}

pub fn train_svm(x: &Array2<f64>, y: &[Label], lambda: f64, epochs: usize, seed: u64) -> Result<TrainedModel> {
    let config = ModelConfig {
        svm_lambda: lambda,
        svm_epochs: epochs,
        ..ModelConfig::default()
    };
    train(ModelKind::Svm, x, y, &config, seed)
}

pub fn train_tree(x: &Array2<f64>, y: &[Label], min_split: usize, seed: u64) -> Result<TrainedModel> {
    let config = ModelConfig {
        min_split,
        ..ModelConfig::default()
    };
    train(ModelKind::Dtree, x, y, &config, seed)
}

pub fn train_forest(x: &Array2<f64>, y: &[Label], options: ForestOptions, seed: u64) -> Result<TrainedModel> {
    let config = ModelConfig {
        forest: options,
        ..ModelConfig::default()
    };
    train(ModelKind::Rforest, x, y, &config, seed)
}

/// Single-query kNN on raw features, standardizing with the training rows.
pub fn knn_predict(train_x: &Array2<f64>, train_y: &[Label], x: &[f64], k: usize) -> Result<Label> {
    let config = ModelConfig {
        knn_k: k,
        ..ModelConfig::default()
    };
    let model = train(ModelKind::Knn, train_x, train_y, &config, 0)?;
    let q = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
    Ok(model.predict(&q)?[0])
}

impl TrainedModel {
    fn predict_row(&self, row: ArrayView1<f64>) -> Label {
        match &self.params {
            ModelParams::Svm(m) => Label::from_positive(m.margin(row) >= 0.0),
            ModelParams::Dtree(t) => t.predict_row(row),
            ModelParams::Rforest(f) => f.predict_row(row),
            ModelParams::Knn(k) => k.predict_row(row),
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<Label>> {
        let xs = self.standardizer.transform(x)?;
        Ok((0..xs.nrows())
            .into_par_iter()
            .map(|i| self.predict_row(xs.row(i)))
            .collect())
    }

    /// Signed SVM scores `w·x + b`; positive means benign.
    pub fn predict_margin(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let ModelParams::Svm(m) = &self.params else {
            return Err(Error::InvalidParam(format!("margins are only defined for svm, not {}", self.kind)));
        };
        let xs = self.standardizer.transform(x)?;
        Ok(xs.rows().into_iter().map(|r| m.margin(r)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        if model.format != FORMAT {
            return Err(Error::ModelFormat(format!("unknown model format {:?}", model.format)));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Fraction of predictions equal to the truth.
pub fn accuracy(pred: &[Label], truth: &[Label]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_pair_svm() {
        let x = array![[-2.0], [2.0]];
        let y = [Label::Vandal, Label::Benign];
        let m = train_svm(&x, &y, 1e-4, 20, 0).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
        assert!(m.predict_margin(&x).unwrap()[1] > 0.0);
    }

    #[test]
    fn svm_rejects_single_class() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(
            train_svm(&x, &[Label::Benign; 2], 1e-4, 5, 0),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn mirror_symmetric_data_gives_zero_bias() {
        let mut total = 0.0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for _ in 0..50 {
                let a: f64 = rng.random_range(-1.0..3.0);
                let b: f64 = rng.random_range(-2.0..2.0);
                rows.extend([a, b, -a, -b]);
                y.extend([Label::Benign, Label::Vandal]);
            }
            let x = Array2::from_shape_vec((100, 2), rows).unwrap();
            let m = train_svm(&x, &y, 1e-4, 20, seed).unwrap();
            let ModelParams::Svm(svm) = &m.params else { unreachable!() };
            total += svm.b;
        }
        assert!((total / 10.0).abs() < 1e-6);
    }

    #[test]
    fn standardizer_passes_constant_columns() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(&x);
        let t = s.transform(&x).unwrap();
        assert_eq!(t, array![[-1.0, 5.0], [1.0, 5.0]]);
        assert!(s.transform(&array![[1.0]]).is_err());
    }

    #[test]
    fn tree_fits_consistent_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_simple_fn((200, 3), || rng.random_range(0..4) as f64);
        let y: Vec<Label> = x
            .rows()
            .into_iter()
            .map(|r| Label::from_positive(((r[0] * 7.0 + r[1] * 3.0 + r[2]) as u32).is_multiple_of(3)))
            .collect();
        let m = train_tree(&x, &y, 2, 0).unwrap();
        assert_eq!(accuracy(&m.predict(&x).unwrap(), &y), 1.0);
    }

    #[test]
    fn constant_label_tree_is_one_leaf() {
        let x = array![[1.0], [2.0]];
        let m = train_tree(&x, &[Label::Vandal; 2], 2, 0).unwrap();
        let ModelParams::Dtree(t) = &m.params else { unreachable!() };
        assert_eq!(t.leaves(), 1);
    }

    #[test]
    fn model_json_round_trip() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.9, 0.1]];
        let y = [Label::Vandal, Label::Benign, Label::Vandal, Label::Benign];
        for kind in ModelKind::ALL {
            let m = train(kind, &x, &y, &ModelConfig::default(), 4).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(m, back);
            assert_eq!(m.predict(&x).unwrap(), back.predict(&x).unwrap());
        }
    }

    #[test]
    fn margins_only_for_svm() {
        let x = array![[0.0], [1.0]];
        let m = train_tree(&x, &[Label::Vandal, Label::Benign], 2, 0).unwrap();
        assert!(m.predict_margin(&x).is_err());
    }

    #[test]
    fn knn_predict_standardizes_query() {
        let x = array![[0.0, 100.0], [1.0, 300.0], [0.0, 300.0]];
        let y = [Label::Vandal, Label::Benign, Label::Benign];
        assert_eq!(knn_predict(&x, &y, &[1.0, 300.0], 1).unwrap(), Label::Benign);
    }
}
