//! Single-hidden-layer autoencoder with logistic units, squared-error loss and
//! mini-batch momentum SGD.

use std::collections::HashMap;
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::error::{Error, Result};

const FORMAT: &str = "vews-autoencoder/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub rate: f64,
    pub momentum: f64,
    pub batch: usize,
    /// Learning rate at epoch `e` is `rate / (1 + rate_decay·e)`.
    #[serde(default)]
    pub rate_decay: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            hidden: 400,
            epochs: 50,
            rate: 0.1,
            momentum: 0.9,
            batch: 32,
            rate_decay: 0.0,
        }
    }
}

impl AutoencoderConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(format!("autoencoder: {m}")));
        if self.hidden == 0 || self.batch == 0 {
            return bad("hidden and batch must be positive");
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.rate_decay >= 0.0 && self.rate_decay.is_finite()) {
            return bad("rate_decay must be non-negative");
        }
        Ok(())
    }
}

/// Trained encoder/decoder weights.
///
/// `w1` is `input × hidden`, `w2` is `hidden × input`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub seed: u64,
    pub config: AutoencoderConfig,
    /// Mean per-element squared reconstruction error for each epoch.
    pub loss_curve: Vec<f64>,
}

/// Gradients of the batch objective `(1/B)·Σ ½‖o − x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradient buffers reused across mini-batches.
struct Workspace {
    hid: Array2<f64>,
    delta: Array2<f64>,
    dh: Array2<f64>,
    gw1: Array2<f64>,
    gb1: Array1<f64>,
    gw2: Array2<f64>,
    gb2: Array1<f64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
    /// When false, batches of at most `FUSED_MAX_ROWS` distinct vectors leave
    /// `gw2` stale and the caller folds it into the weight update.
    dense_gw2: bool,
}

/// Batches with this many distinct vectors or fewer update `w2` without
/// materializing its gradient.
const FUSED_MAX_ROWS: usize = 4;

impl Workspace {
    fn new(d: usize, h: usize, batch: usize) -> Self {
        Workspace {
            hid: Array2::zeros((batch, h)),
            delta: Array2::zeros((batch, d)),
            dh: Array2::zeros((batch, h)),
            gw1: Array2::zeros((d, h)),
            gb1: Array1::zeros(h),
            gw2: Array2::zeros((h, d)),
            gb2: Array1::zeros(d),
            touched: Vec::new(),
            marked: vec![false; d],
            dense_gw2: true,
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl AutoencoderModel {
    /// Freshly initialized model: uniform weights in ±sqrt(6/(D+H)), zero biases.
    pub fn init(input_dim: usize, config: AutoencoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let bound = (6.0 / (input_dim + h) as f64).sqrt();
        let w1 = Array2::from_shape_simple_fn((input_dim, h), || rng.random_range(-bound..bound));
        let w2 = Array2::from_shape_simple_fn((h, input_dim), || rng.random_range(-bound..bound));
        AutoencoderModel {
            w1,
            b1: Array1::zeros(h),
            w2,
            b2: Array1::zeros(input_dim),
            seed,
            config,
            loss_curve: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    fn check_dim(&self, v: &SparseVector) -> Result<()> {
        if v.dim != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: v.dim,
            });
        }
        Ok(())
    }

    fn hidden_into(&self, v: &SparseVector, out: &mut [f64]) {
        out.copy_from_slice(self.b1.as_slice().expect("contiguous"));
        for &(i, x) in &v.entries {
            let row = self.w1.row(i as usize);
            for (o, w) in out.iter_mut().zip(row.iter()) {
                *o += x * w;
            }
        }
        out.iter_mut().for_each(|z| *z = logistic(*z));
    }

    /// Hidden-layer activation of `v`.
    pub fn encode(&self, v: &SparseVector) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        let mut out = vec![0.0; self.hidden()];
        self.hidden_into(v, &mut out);
        Ok(out)
    }

    pub fn encode_dense(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.encode(&SparseVector::from_dense(v))
    }

    /// Reconstruction of `v` through both layers.
    pub fn reconstruct(&self, v: &SparseVector) -> Result<Vec<f64>> {
        let h = Array1::from(self.encode(v)?);
        let o = h.dot(&self.w2) + &self.b2;
        Ok(o.iter().map(|z| logistic(*z)).collect())
    }

    /// Mean per-element squared reconstruction error over `data`.
    pub fn reconstruction_error(&self, data: &[SparseVector]) -> Result<f64> {
        let mut total = 0.0;
        for v in data {
            let o = self.reconstruct(v)?;
            let x = v.to_dense();
            total += o.iter().zip(&x).map(|(o, x)| (o - x).powi(2)).sum::<f64>();
        }
        Ok(total / (data.len() * self.input_dim()).max(1) as f64)
    }

    /// Batch objective and its gradient. `weights[i]` is the multiplicity of
    /// `batch[i]`; the objective averages over the total multiplicity.
    pub fn backprop(&self, batch: &[&SparseVector], weights: &[f64]) -> (f64, Gradients) {
        let mut ws = Workspace::new(self.input_dim(), self.hidden(), batch.len());
        let objective = self.backprop_into(batch, weights, &mut ws);
        (
            objective,
            Gradients {
                w1: ws.gw1,
                b1: ws.gb1,
                w2: ws.gw2,
                b2: ws.gb2,
            },
        )
    }

    /// `backprop` into reusable buffers. Only the rows of `ws.gw1` listed in
    /// `ws.touched` are meaningful afterwards.
    fn backprop_into(&self, batch: &[&SparseVector], weights: &[f64], ws: &mut Workspace) -> f64 {
        let u = batch.len();
        let total: f64 = weights.iter().sum();
        let mut hid = ws.hid.slice_mut(s![..u, ..]);
        for (r, v) in batch.iter().enumerate() {
            self.hidden_into(v, hid.row_mut(r).into_slice().expect("contiguous"));
        }
        let hid = ws.hid.slice(s![..u, ..]);
        let mut delta = ws.delta.slice_mut(s![..u, ..]);
        general_mat_mul(1.0, &hid, &self.w2, 0.0, &mut delta);
        let mut objective = 0.0;
        for (r, v) in batch.iter().enumerate() {
            let mut row = delta.row_mut(r);
            let row = row.as_slice_mut().expect("contiguous");
            for (z, b) in row.iter_mut().zip(self.b2.iter()) {
                *z = logistic(*z + b);
            }
            let scale = weights[r] / total;
            let mut sq = 0.0;
            let mut next = v.entries.iter().peekable();
            for (j, o) in row.iter_mut().enumerate() {
                let x = match next.peek() {
                    Some(&&(i, x)) if i as usize == j => {
                        next.next();
                        x
                    }
                    _ => 0.0,
                };
                let e = *o - x;
                sq += e * e;
                *o = scale * e * *o * (1.0 - *o);
            }
            objective += 0.5 * scale * sq;
        }
        let delta = ws.delta.slice(s![..u, ..]);
        if ws.dense_gw2 || u > FUSED_MAX_ROWS {
            general_mat_mul(1.0, &hid.t(), &delta, 0.0, &mut ws.gw2);
        }
        ws.gb2.assign(&delta.sum_axis(Axis(0)));
        let mut dh = ws.dh.slice_mut(s![..u, ..]);
        general_mat_mul(1.0, &delta, &self.w2.t(), 0.0, &mut dh);
        dh.zip_mut_with(&hid, |g, a| *g *= a * (1.0 - a));
        for &i in &ws.touched {
            ws.gw1.row_mut(i).fill(0.0);
            ws.marked[i] = false;
        }
        ws.touched.clear();
        for (r, v) in batch.iter().enumerate() {
            let g = dh.row(r);
            for &(i, x) in &v.entries {
                let i = i as usize;
                if !ws.marked[i] {
                    ws.marked[i] = true;
                    ws.touched.push(i);
                }
                ws.gw1.row_mut(i).scaled_add(x, &g);
            }
        }
        ws.gb1.assign(&dh.sum_axis(Axis(0)));
        objective
    }

    /// Batch objective alone, computed densely.
    pub fn objective(&self, batch: &[&SparseVector], weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        batch
            .iter()
            .zip(weights)
            .map(|(v, w)| {
                let o = self.reconstruct(v).expect("dimension checked by caller");
                let x = v.to_dense();
                let sq: f64 = o.iter().zip(&x).map(|(o, x)| (o - x).powi(2)).sum();
                0.5 * w / total * sq
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &ModelFile::from(self))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        raw.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(s)?.try_into()
    }

    /// Every parameter's raw bits, in a fixed order.
    pub fn parameter_bits(&self) -> impl Iterator<Item = u64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .map(|v| v.to_bits())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    input_dim: usize,
    hidden: usize,
    seed: u64,
    config: AutoencoderConfig,
    loss_curve: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl From<&AutoencoderModel> for ModelFile {
    fn from(m: &AutoencoderModel) -> Self {
        ModelFile {
            format: FORMAT.to_owned(),
            input_dim: m.input_dim(),
            hidden: m.hidden(),
            seed: m.seed,
            config: m.config,
            loss_curve: m.loss_curve.clone(),
            w1: m.w1.iter().copied().collect(),
            b1: m.b1.to_vec(),
            w2: m.w2.iter().copied().collect(),
            b2: m.b2.to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for AutoencoderModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format != FORMAT {
            return Err(Error::ModelFormat(format!("unknown autoencoder format {:?}", f.format)));
        }
        let shape = |what: &str| Error::ModelFormat(format!("autoencoder {what} has the wrong size"));
        let (d, h) = (f.input_dim, f.hidden);
        let model = AutoencoderModel {
            w1: Array2::from_shape_vec((d, h), f.w1).map_err(|_| shape("w1"))?,
            b1: Array1::from(f.b1),
            w2: Array2::from_shape_vec((h, d), f.w2).map_err(|_| shape("w2"))?,
            b2: Array1::from(f.b2),
            seed: f.seed,
            config: f.config,
            loss_curve: f.loss_curve,
        };
        if model.b1.len() != h {
            return Err(shape("b1"));
        }
        if model.b2.len() != d {
            return Err(shape("b2"));
        }
        Ok(model)
    }
}

/// Momentum step on `w2` with its gradient `hidᵀ·delta` formed on the fly.
fn fused_w2_update(v_w2: &mut Array2<f64>, w2: &mut Array2<f64>, ws: &Workspace, u: usize, mu: f64, rate: f64) {
    let rows: Vec<&[f64]> = (0..u)
        .map(|r| ws.delta.row(r).to_slice().expect("contiguous"))
        .collect();
    for j in 0..w2.nrows() {
        let mut vrow = v_w2.row_mut(j);
        let mut wrow = w2.row_mut(j);
        let vs = vrow.as_slice_mut().expect("contiguous");
        let wsl = wrow.as_slice_mut().expect("contiguous");
        if u == 1 {
            let a = ws.hid[[0, j]];
            for ((v, w), d) in vs.iter_mut().zip(wsl.iter_mut()).zip(rows[0]) {
                *v = mu * *v - rate * (a * d);
                *w += *v;
            }
        } else {
            let coef: Vec<f64> = (0..u).map(|r| ws.hid[[r, j]]).collect();
            for (i, (v, w)) in vs.iter_mut().zip(wsl.iter_mut()).enumerate() {
                let g: f64 = coef.iter().zip(&rows).map(|(c, row)| c * row[i]).sum();
                *v = mu * *v - rate * g;
                *w += *v;
            }
        }
    }
}

/// Trains an autoencoder on `data`. Deterministic given `seed`.
pub fn train_autoencoder(
    data: &[SparseVector],
    config: AutoencoderConfig,
    seed: u64,
) -> Result<AutoencoderModel> {
    config.validate()?;
    let dim = match data.first() {
        Some(v) => v.dim,
        None => return Err(Error::InvalidParam("autoencoder: no training vectors".into())),
    };
    for v in data {
        if v.dim != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: v.dim,
            });
        }
        if v.entries.iter().any(|&(i, x)| i as usize >= dim || !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParam(
                "autoencoder: inputs must lie in [0, 1]".into(),
            ));
        }
    }
    let mut model = AutoencoderModel::init(dim, config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fae);

    // Identical vectors inside a batch are evaluated once and weighted.
    let mut canon: HashMap<Vec<(u32, u64)>, usize> = HashMap::new();
    let canonical: Vec<usize> = data
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let key = v.entries.iter().map(|&(j, x)| (j, x.to_bits())).collect();
            *canon.entry(key).or_insert(i)
        })
        .collect();
    drop(canon);

    let h = config.hidden;
    let mut v_w1 = Array2::<f64>::zeros((dim, h));
    let mut v_b1 = Array1::<f64>::zeros(h);
    let mut v_w2 = Array2::<f64>::zeros((h, dim));
    let mut v_b2 = Array1::<f64>::zeros(dim);
    let mut w1_active = vec![false; dim];
    let mut active_rows: Vec<usize> = Vec::new();
    let mut ws = Workspace::new(dim, h, config.batch);
    ws.dense_gw2 = false;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut members: Vec<&SparseVector> = Vec::with_capacity(config.batch);
    let mut weights: Vec<f64> = Vec::with_capacity(config.batch);
    let mut slot: HashMap<usize, usize> = HashMap::new();

    for epoch in 0..config.epochs {
        let rate = config.rate / (1.0 + config.rate_decay * epoch as f64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch) {
            members.clear();
            weights.clear();
            slot.clear();
            for &i in chunk {
                let c = canonical[i];
                match slot.get(&c) {
                    Some(&s) => weights[s] += 1.0,
                    None => {
                        slot.insert(c, members.len());
                        members.push(&data[c]);
                        weights.push(1.0);
                    }
                }
            }
            let objective = model.backprop_into(&members, &weights, &mut ws);
            let loss = 2.0 * objective / dim as f64;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss, rate });
            }
            epoch_loss += loss;
            batches += 1;

            let mu = config.momentum;
            for &i in &ws.touched {
                if !w1_active[i] {
                    w1_active[i] = true;
                    active_rows.push(i);
                }
            }
            // Rows outside this batch have zero gradient but keep their momentum.
            for &r in &active_rows {
                let mut vel = v_w1.row_mut(r);
                if ws.marked[r] {
                    vel.zip_mut_with(&ws.gw1.row(r), |v, g| *v = mu * *v - rate * g);
                } else {
                    vel.map_inplace(|v| *v *= mu);
                }
                model.w1.row_mut(r).scaled_add(1.0, &vel);
            }
            v_b1.zip_mut_with(&ws.gb1, |v, g| *v = mu * *v - rate * g);
            model.b1 += &v_b1;
            if members.len() > FUSED_MAX_ROWS {
                Zip::from(&mut v_w2).and(&mut model.w2).and(&ws.gw2).for_each(|v, w, g| {
                    *v = mu * *v - rate * g;
                    *w += *v;
                });
            } else {
                fused_w2_update(&mut v_w2, &mut model.w2, &ws, members.len(), mu, rate);
            }
            v_b2.zip_mut_with(&ws.gb2, |v, g| *v = mu * *v - rate * g);
            model.b2 += &v_b2;
        }
        let mean = epoch_loss / batches as f64;
        log::debug!("autoencoder epoch {epoch}: loss {mean:.6e}");
        if !model.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: mean,
                rate,
            });
        }
        model.loss_curve.push(mean);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<SparseVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let dense: Vec<f64> = (0..dim)
                    .map(|_| if rng.random_bool(0.4) { rng.random::<f64>() } else { 0.0 })
                    .collect();
                SparseVector::from_dense(&dense)
            })
            .collect()
    }

    fn small(hidden: usize, epochs: usize) -> AutoencoderConfig {
        AutoencoderConfig {
            hidden,
            epochs,
            ..AutoencoderConfig::default()
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = random_vectors(5, 6, 1);
        let model = AutoencoderModel::init(6, small(4, 0), 3);
        let batch: Vec<&SparseVector> = data.iter().collect();
        let weights = [1.0, 2.0, 1.0, 1.0, 3.0];
        let (_, g) = model.backprop(&batch, &weights);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, perturb: &dyn Fn(&mut AutoencoderModel, f64)| {
            let mut plus = model.clone();
            perturb(&mut plus, eps);
            let mut minus = model.clone();
            perturb(&mut minus, -eps);
            let numeric =
                (plus.objective(&batch, &weights) - minus.objective(&batch, &weights)) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        };
        for i in 0..6 {
            for j in 0..4 {
                check(g.w1[[i, j]], &|m, e| m.w1[[i, j]] += e);
                check(g.w2[[j, i]], &|m, e| m.w2[[j, i]] += e);
            }
            check(g.b2[i], &|m, e| m.b2[i] += e);
        }
        for j in 0..4 {
            check(g.b1[j], &|m, e| m.b1[j] += e);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn fused_decoder_update_matches_explicit_gradient() {
        let data = random_vectors(4, 12, 9);
        let model = AutoencoderModel::init(12, small(5, 0), 4);
        for u in 1..=FUSED_MAX_ROWS {
            let batch: Vec<&SparseVector> = data.iter().take(u).collect();
            let weights = vec![2.0; u];
            let (_, g) = model.backprop(&batch, &weights);
            let mut ws = Workspace::new(12, 5, u);
            ws.dense_gw2 = false;
            model.backprop_into(&batch, &weights, &mut ws);
            let v0 = Array2::from_shape_fn((5, 12), |(j, i)| 0.01 * (j as f64 - i as f64));
            let (mut v_a, mut w_a) = (v0.clone(), model.w2.clone());
            Zip::from(&mut v_a).and(&mut w_a).and(&g.w2).for_each(|v, w, g| {
                *v = 0.9 * *v - 0.1 * g;
                *w += *v;
            });
            let (mut v_b, mut w_b) = (v0, model.w2.clone());
            fused_w2_update(&mut v_b, &mut w_b, &ws, u, 0.9, 0.1);
            let diff = (&w_a - &w_b).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(diff < 1e-15, "u={u}: {diff}");
        }
    }

    #[test]
    fn backprop_objective_matches_dense_objective() {
        let data = random_vectors(4, 10, 2);
        let model = AutoencoderModel::init(10, small(3, 0), 1);
        let batch: Vec<&SparseVector> = data.iter().collect();
        let w = [1.0; 4];
        let (obj, _) = model.backprop(&batch, &w);
        assert!((obj - model.objective(&batch, &w)).abs() < 1e-12);
    }

    #[test]
    fn memorizes_a_repeated_vector() {
        let v = SparseVector::from_dense(&[0.9, 0.0, 0.1, 0.5, 0.0, 1.0, 0.3, 0.0]);
        let data = vec![v.clone(); 64];
        let model = train_autoencoder(&data, small(4, 50), 5).unwrap();
        assert!(model.reconstruction_error(&[v]).unwrap() < 1e-3);
    }

    #[test]
    fn training_is_deterministic() {
        let data = random_vectors(50, 12, 4);
        let a = train_autoencoder(&data, small(5, 3), 9).unwrap();
        let b = train_autoencoder(&data, small(5, 3), 9).unwrap();
        assert!(a.parameter_bits().eq(b.parameter_bits()));
        assert_eq!(a.loss_curve, b.loss_curve);
        let c = train_autoencoder(&data, small(5, 3), 10).unwrap();
        assert!(!a.parameter_bits().eq(c.parameter_bits()));
    }

    #[test]
    fn zero_vector_encodes_to_logistic_of_bias() {
        let data = random_vectors(20, 8, 6);
        let model = train_autoencoder(&data, small(3, 2), 1).unwrap();
        let code = model.encode(&SparseVector::from_dense(&[0.0; 8])).unwrap();
        for (c, b) in code.iter().zip(model.b1.iter()) {
            assert_eq!(*c, logistic(*b));
        }
    }

    #[test]
    fn encode_rejects_wrong_dimension() {
        let model = AutoencoderModel::init(8, small(3, 0), 0);
        let err = model.encode(&SparseVector::from_dense(&[0.0; 7])).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 8, got: 7 }));
    }

    #[test]
    fn huge_rate_never_yields_non_finite_model() {
        let data = random_vectors(40, 8, 7);
        let cfg = AutoencoderConfig {
            rate: f64::MAX,
            ..small(4, 20)
        };
        match train_autoencoder(&data, cfg, 1) {
            Err(Error::Diverged { .. }) => {}
            Ok(model) => assert!(model.is_finite() && model.loss_curve.iter().all(|l| l.is_finite())),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let data = random_vectors(30, 9, 8);
        let model = train_autoencoder(&data, small(4, 2), 2).unwrap();
        let back = AutoencoderModel::from_json(&model.to_json().unwrap()).unwrap();
        assert!(model.parameter_bits().eq(back.parameter_bits()));
        for v in &data {
            assert_eq!(model.encode(v).unwrap(), back.encode(v).unwrap());
        }
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let data = vec![SparseVector::from_dense(&[0.5, 1.5])];
        assert!(matches!(
            train_autoencoder(&data, small(2, 1), 0),
            Err(Error::InvalidParam(_))
        ));
    }
}
