//! Evaluation protocols: stratified cross-validation, temporal recency,
//! training-window sweep and first-k sweep.

mod metrics;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::models::{self, ModelConfig, ModelKind, TrainedModel};
use crate::pairfeat::{corpus_logs, UserLog};
use crate::timefmt::{month_index, month_label};
use crate::wtpm::{transition_matrix, train_autoencoder, AutoencoderConfig, AutoencoderModel, SparseVector};
use crate::wvb::{wvb_features, wvb_features_wr, WvbVector, WvbVectorWR, REVERT_DRIVEN_NAMES};

pub use self::metrics::{
    chi2_sf, mcnemar, mcnemar_chi2_p, mcnemar_counts, mcnemar_exact_p, mcnemar_statistic, Confusion,
    McNemarMethod, McNemarResult, Metrics, MCNEMAR_EXACT_BELOW,
};
pub use self::report::{summary_table, write_report_csv, write_report_json, REPORT_CSV_COLUMNS};

/// Default first-k sweep.
pub const DEFAULT_KS: [usize; 24] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 50, 100, 200, 500,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Wvb,
    Wtpm,
    Vews,
    WvbWr,
    WtpmWr,
    VewsWr,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 6] = [
        FeatureMode::Wvb,
        FeatureMode::Wtpm,
        FeatureMode::Vews,
        FeatureMode::WvbWr,
        FeatureMode::WtpmWr,
        FeatureMode::VewsWr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Wvb => "wvb",
            FeatureMode::Wtpm => "wtpm",
            FeatureMode::Vews => "vews",
            FeatureMode::WvbWr => "wvb_wr",
            FeatureMode::WtpmWr => "wtpm_wr",
            FeatureMode::VewsWr => "vews_wr",
        }
    }

    pub fn uses_wtpm(self) -> bool {
        !matches!(self, FeatureMode::Wvb | FeatureMode::WvbWr)
    }

    pub fn needs_reverts(self) -> bool {
        matches!(self, FeatureMode::WvbWr | FeatureMode::WtpmWr | FeatureMode::VewsWr)
    }

    /// Names of the hand-crafted columns preceding any autoencoder code.
    pub fn wvb_names(self) -> Vec<&'static str> {
        match self {
            FeatureMode::Wvb | FeatureMode::Vews => WvbVector::NAMES.to_vec(),
            FeatureMode::WvbWr | FeatureMode::VewsWr => WvbVectorWR::NAMES.to_vec(),
            FeatureMode::Wtpm => Vec::new(),
            FeatureMode::WtpmWr => REVERT_DRIVEN_NAMES.to_vec(),
        }
    }

    /// Column names of the full feature vector for an autoencoder with `hidden` units.
    pub fn feature_names(self, hidden: usize) -> Vec<String> {
        let mut names: Vec<String> = self.wvb_names().into_iter().map(str::to_owned).collect();
        if self.uses_wtpm() {
            names.extend((0..hidden).map(|h| format!("h{h}")));
        }
        names
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "unknown feature mode {s:?} (wvb, wtpm, vews, wvb_wr, wtpm_wr, vews_wr)"
                ))
            })
    }
}

/// Hand-crafted feature columns of one user under `mode`.
pub fn wvb_part(log: &UserLog, k: Option<usize>, mode: FeatureMode) -> Result<Vec<f64>> {
    Ok(match mode {
        FeatureMode::Wvb | FeatureMode::Vews => wvb_features(log, k).to_vec(),
        FeatureMode::WvbWr | FeatureMode::VewsWr => wvb_features_wr(log, k)?.to_vec(),
        FeatureMode::WtpmWr => wvb_features_wr(log, k)?.revert_driven_vec(),
        FeatureMode::Wtpm => Vec::new(),
    })
}

/// Full feature vector of one user: hand-crafted columns followed by the
/// autoencoder code of the user's transition matrix.
pub fn vews_features(
    log: &UserLog,
    model: &AutoencoderModel,
    k: Option<usize>,
    mode: FeatureMode,
) -> Result<Vec<f64>> {
    let mut out = wvb_part(log, k, mode)?;
    if mode.uses_wtpm() {
        out.extend(model.encode(&transition_matrix(log, k).sparse())?);
    }
    Ok(out)
}

/// Labeled users with at least one edit, ready for evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub user_ids: Vec<String>,
    pub labels: Vec<Label>,
    /// Calendar month (UTC) of each user's first edit, as `year·12 + month0`.
    pub first_month: Vec<i32>,
    pub logs: Vec<UserLog>,
    pub reverts_loaded: bool,
    /// Labeled users dropped for having no edits.
    pub dropped_without_edits: usize,
}

impl Dataset {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let logs = corpus_logs(corpus);
        let mut ds = Dataset {
            user_ids: Vec::new(),
            labels: Vec::new(),
            first_month: Vec::new(),
            logs: Vec::new(),
            reverts_loaded: corpus.reverts_loaded(),
            dropped_without_edits: 0,
        };
        for (i, log) in logs.into_iter().enumerate() {
            let Some(label) = corpus.label(i) else { continue };
            let Some(first) = log.rows.first() else {
                ds.dropped_without_edits += 1;
                continue;
            };
            ds.first_month.push(month_index(&first.ts2));
            ds.user_ids.push(log.user_id.clone());
            ds.labels.push(label);
            ds.logs.push(log);
        }
        ds
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let benign = self.labels.iter().filter(|l| l.is_positive()).count();
        (self.len() - benign, benign)
    }
}

/// Per-user features for one cutoff `k`, before any autoencoder is fitted.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub mode: FeatureMode,
    pub k: Option<usize>,
    pub wvb: Array2<f64>,
    pub tpm: Option<Vec<SparseVector>>,
}

impl FeatureTable {
    pub fn build(ds: &Dataset, mode: FeatureMode, k: Option<usize>) -> Result<Self> {
        if mode.needs_reverts() && !ds.reverts_loaded {
            return Err(Error::RevertsUnavailable);
        }
        let rows: Vec<Vec<f64>> = ds
            .logs
            .par_iter()
            .map(|log| wvb_part(log, k, mode))
            .collect::<Result<_>>()?;
        let d = mode.wvb_names().len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let wvb = Array2::from_shape_vec((ds.len(), d), flat).expect("rows share the mode's width");
        let tpm = mode.uses_wtpm().then(|| {
            ds.logs
                .par_iter()
                .map(|log| transition_matrix(log, k).sparse())
                .collect()
        });
        Ok(FeatureTable { mode, k, wvb, tpm })
    }
}

/// Everything that determines one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub features: FeatureMode,
    pub model: ModelKind,
    pub model_config: ModelConfig,
    pub autoencoder: AutoencoderConfig,
    pub seed: u64,
    pub folds: usize,
}

impl EvalConfig {
    pub fn new(features: FeatureMode, model: ModelKind, seed: u64) -> Self {
        EvalConfig {
            features,
            model,
            model_config: ModelConfig::default(),
            autoencoder: AutoencoderConfig::default(),
            seed,
            folds: 10,
        }
    }
}

/// Result of training on one split and predicting its test users.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub confusion: Confusion,
    pub predictions: Vec<Label>,
    /// SHA-256 over every trained artifact (autoencoder bits and model).
    pub artifact_digest: String,
    pub model: TrainedModel,
}

fn rows_of(table: &FeatureTable, idx: &[usize], codes: Option<&[Vec<f64>]>) -> Array2<f64> {
    let d = table.wvb.ncols() + codes.and_then(|c| c.first()).map_or(0, Vec::len);
    let mut out = Array2::zeros((idx.len(), d));
    for (r, &i) in idx.iter().enumerate() {
        let mut row = out.row_mut(r);
        let wvb = table.wvb.row(i);
        for (j, v) in wvb.iter().enumerate() {
            row[j] = *v;
        }
        if let Some(codes) = codes {
            for (j, v) in codes[r].iter().enumerate() {
                row[wvb.len() + j] = *v;
            }
        }
    }
    out
}

/// Trains the autoencoder (if any) and the classifier on `train`, then
/// predicts `test`. Test labels are read only to score predictions.
pub fn run_split(
    table: &FeatureTable,
    labels: &[Label],
    train: &[usize],
    test: &[usize],
    cfg: &EvalConfig,
    job_seed: u64,
) -> Result<SplitOutcome> {
    let mut hasher = Sha256::new();
    let (x_train, x_test) = match &table.tpm {
        Some(tpm) => {
            let data: Vec<SparseVector> = train.iter().map(|&i| tpm[i].clone()).collect();
            let ae = train_autoencoder(&data, cfg.autoencoder, job_seed)?;
            for bits in ae.parameter_bits() {
                hasher.update(bits.to_le_bytes());
            }
            let encode = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
                idx.iter().map(|&i| ae.encode(&tpm[i])).collect()
            };
            let (ctr, cte) = (encode(train)?, encode(test)?);
            (rows_of(table, train, Some(&ctr)), rows_of(table, test, Some(&cte)))
        }
        None => (rows_of(table, train, None), rows_of(table, test, None)),
    };
    let y_train: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
    let model = models::train(cfg.model, &x_train, &y_train, &cfg.model_config, job_seed)?;
    hasher.update(model.to_json()?.as_bytes());
    let predictions = model.predict(&x_test)?;
    let truth: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
    Ok(SplitOutcome {
        confusion: Confusion::from_predictions(&predictions, &truth),
        predictions,
        artifact_digest: hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
        model,
    })
}

/// Autoencoder and classifier fitted on every user of a dataset.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub features: FeatureMode,
    pub k: Option<usize>,
    pub feature_names: Vec<String>,
    pub autoencoder: Option<AutoencoderModel>,
    pub model: TrainedModel,
}

/// Feature matrix of every user in `table`, encoding transition matrices
/// with `ae` when the mode has an autoencoder part.
pub fn feature_matrix(table: &FeatureTable, ae: Option<&AutoencoderModel>) -> Result<Array2<f64>> {
    let all: Vec<usize> = (0..table.wvb.nrows()).collect();
    match (&table.tpm, ae) {
        (Some(tpm), Some(ae)) => {
            let codes: Vec<Vec<f64>> = tpm.par_iter().map(|v| ae.encode(v)).collect::<Result<_>>()?;
            Ok(rows_of(table, &all, Some(&codes)))
        }
        (Some(_), None) => Err(Error::InvalidParam(format!(
            "feature mode {} needs an autoencoder",
            table.mode
        ))),
        (None, _) => Ok(rows_of(table, &all, None)),
    }
}

/// Fits the autoencoder (if any) and the classifier on all users.
pub fn fit_pipeline(ds: &Dataset, cfg: &EvalConfig, k: Option<usize>) -> Result<FittedPipeline> {
    let table = FeatureTable::build(ds, cfg.features, k)?;
    let autoencoder = match &table.tpm {
        Some(tpm) => Some(train_autoencoder(tpm, cfg.autoencoder, cfg.seed)?),
        None => None,
    };
    let x = feature_matrix(&table, autoencoder.as_ref())?;
    let model = models::train(cfg.model, &x, &ds.labels, &cfg.model_config, cfg.seed)?;
    Ok(FittedPipeline {
        features: cfg.features,
        k,
        feature_names: cfg.features.feature_names(cfg.autoencoder.hidden),
        autoencoder,
        model,
    })
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
/// Returns the test indices of every fold.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParam("need at least two folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    for class in [Label::Vandal, Label::Benign] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::TooFewForFolds {
                label: class.as_str(),
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut rng);
        for (pos, i) in members.into_iter().enumerate() {
            out[pos % folds].push(i);
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    Cv10,
    Temporal { window: u32 },
    Window { test_month: Option<i32>, n_max: u32 },
    FirstK { ks: Vec<usize> },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Cv10 => "cv10",
            Protocol::Temporal { .. } => "temporal",
            Protocol::Window { .. } => "window",
            Protocol::FirstK { .. } => "first_k",
        }
    }
}

/// Identifies one evaluated point of a protocol.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointKey {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_month: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl fmt::Display for PointKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(m) = &self.test_month {
            parts.push(format!("month={m}"));
        }
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={k}"));
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub job_seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub artifact_digest: String,
}

/// Per-user prediction, kept in memory for paired tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserPrediction {
    pub user: usize,
    pub truth: Label,
    pub predicted: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub key: PointKey,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
    pub confusion: Option<Confusion>,
    pub metrics: Option<Metrics>,
    pub splits: Vec<SplitRow>,
    #[serde(skip)]
    pub predictions: Vec<UserPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub feature_mode: FeatureMode,
    pub model: ModelKind,
    pub seed: u64,
    pub config: EvalConfig,
    pub users: usize,
    pub points: Vec<PointReport>,
    pub notices: Vec<String>,
}

impl EvalReport {
    pub fn point(&self, key: &PointKey) -> Option<&PointReport> {
        self.points.iter().find(|p| &p.key == key)
    }

    /// Accuracy of the first evaluated point (the only one for cv10).
    pub fn accuracy(&self) -> Option<f64> {
        self.points.iter().find_map(|p| p.metrics.and_then(|m| m.accuracy))
    }

    /// Predictions of every evaluated point, ordered by user index.
    pub fn predictions_of(&self, key: &PointKey) -> Option<Vec<UserPrediction>> {
        let mut p = self.point(key)?.predictions.clone();
        p.sort_by_key(|u| u.user);
        Some(p)
    }
}

struct Job {
    point: usize,
    fold: Option<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
}

struct Group {
    k: Option<usize>,
    jobs: Vec<Job>,
}

struct Plan {
    points: Vec<PointReport>,
    groups: Vec<Group>,
}

fn empty_point(key: PointKey, notice: Option<String>) -> PointReport {
    PointReport {
        key,
        notice,
        confusion: None,
        metrics: None,
        splits: Vec::new(),
        predictions: Vec::new(),
    }
}

fn fold_jobs(point: usize, folds: &[Vec<usize>], n: usize) -> Vec<Job> {
    folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            Job {
                point,
                fold: Some(f),
                train: (0..n).filter(|&i| !in_test[i]).collect(),
                test: test.clone(),
            }
        })
        .collect()
}

/// Train/test users for a month range, or a reason to skip.
fn month_split(ds: &Dataset, train_from: i32, train_to: i32, test_month: i32) -> std::result::Result<(Vec<usize>, Vec<usize>), String> {
    let train: Vec<usize> = (0..ds.len())
        .filter(|&i| (train_from..=train_to).contains(&ds.first_month[i]))
        .collect();
    let test: Vec<usize> = (0..ds.len()).filter(|&i| ds.first_month[i] == test_month).collect();
    if train.is_empty() {
        return Err(format!(
            "no training users first editing in {}..{}",
            month_label(train_from),
            month_label(train_to)
        ));
    }
    if test.is_empty() {
        return Err(format!("no test users first editing in {}", month_label(test_month)));
    }
    let benign = train.iter().filter(|&&i| ds.labels[i].is_positive()).count();
    if benign == 0 || benign == train.len() {
        return Err(format!(
            "training users first editing in {}..{} are all one class",
            month_label(train_from),
            month_label(train_to)
        ));
    }
    Ok((train, test))
}

fn plan(ds: &Dataset, cfg: &EvalConfig, protocol: &Protocol) -> Result<Plan> {
    let mut points = Vec::new();
    let mut groups = Vec::new();
    let month_span = || -> Result<(i32, i32)> {
        let lo = ds.first_month.iter().min().copied();
        let hi = ds.first_month.iter().max().copied();
        lo.zip(hi).ok_or_else(|| Error::InvalidParam("no labeled users with edits".into()))
    };
    match protocol {
        Protocol::Cv10 => {
            let folds = stratified_folds(&ds.labels, cfg.folds, cfg.seed)?;
            points.push(empty_point(PointKey::default(), None));
            groups.push(Group {
                k: None,
                jobs: fold_jobs(0, &folds, ds.len()),
            });
        }
        Protocol::FirstK { ks } => {
            if ks.is_empty() || ks.contains(&0) {
                return Err(Error::InvalidParam("first-k cutoffs must be positive".into()));
            }
            let folds = stratified_folds(&ds.labels, cfg.folds, cfg.seed)?;
            for (p, &k) in ks.iter().enumerate() {
                points.push(empty_point(
                    PointKey {
                        k: Some(k),
                        ..PointKey::default()
                    },
                    None,
                ));
                groups.push(Group {
                    k: Some(k),
                    jobs: fold_jobs(p, &folds, ds.len()),
                });
            }
        }
        Protocol::Temporal { window } => {
            if *window == 0 {
                return Err(Error::InvalidParam("temporal window must be positive".into()));
            }
            let (lo, hi) = month_span()?;
            let w = *window as i32;
            let mut jobs = Vec::new();
            for m in (lo + w)..=hi {
                let key = PointKey {
                    test_month: Some(month_label(m)),
                    ..PointKey::default()
                };
                match month_split(ds, m - w, m - 1, m) {
                    Ok((train, test)) => {
                        jobs.push(Job {
                            point: points.len(),
                            fold: None,
                            train,
                            test,
                        });
                        points.push(empty_point(key, None));
                    }
                    Err(why) => points.push(empty_point(key, Some(why))),
                }
            }
            groups.push(Group { k: None, jobs });
        }
        Protocol::Window { test_month, n_max } => {
            let (_, hi) = month_span()?;
            let m = test_month.unwrap_or(hi);
            let mut jobs = Vec::new();
            for n in 1..=*n_max {
                let key = PointKey {
                    test_month: Some(month_label(m)),
                    n: Some(n),
                    ..PointKey::default()
                };
                match month_split(ds, m - n as i32, m - 1, m) {
                    Ok((train, test)) => {
                        jobs.push(Job {
                            point: points.len(),
                            fold: None,
                            train,
                            test,
                        });
                        points.push(empty_point(key, None));
                    }
                    Err(why) => points.push(empty_point(key, Some(why))),
                }
            }
            groups.push(Group { k: None, jobs });
        }
    }
    Ok(Plan { points, groups })
}

/// Runs `protocol` and reports per-split and pooled confusion counts.
pub fn evaluate(ds: &Dataset, cfg: &EvalConfig, protocol: &Protocol) -> Result<EvalReport> {
    let Plan { mut points, groups } = plan(ds, cfg, protocol)?;
    let mut job_index = 0u64;
    for group in &groups {
        let table = FeatureTable::build(ds, cfg.features, group.k)?;
        let base = job_index;
        let outcomes: Vec<SplitOutcome> = group
            .jobs
            .par_iter()
            .enumerate()
            .map(|(j, job)| run_split(&table, &ds.labels, &job.train, &job.test, cfg, cfg.seed ^ (base + j as u64)))
            .collect::<Result<_>>()?;
        for (j, (job, out)) in group.jobs.iter().zip(outcomes).enumerate() {
            let point = &mut points[job.point];
            point.splits.push(SplitRow {
                fold: job.fold,
                job_seed: cfg.seed ^ (base + j as u64),
                train_size: job.train.len(),
                test_size: job.test.len(),
                confusion: out.confusion,
                metrics: out.confusion.metrics(),
                artifact_digest: out.artifact_digest,
            });
            point.confusion.get_or_insert_with(Confusion::default).merge(&out.confusion);
            point.predictions.extend(job.test.iter().zip(&out.predictions).map(|(&u, &p)| UserPrediction {
                user: u,
                truth: ds.labels[u],
                predicted: p,
            }));
        }
        job_index += group.jobs.len() as u64;
    }
    let mut notices = Vec::new();
    if ds.dropped_without_edits > 0 {
        notices.push(format!("{} labeled users without edits were excluded", ds.dropped_without_edits));
    }
    for p in &mut points {
        p.metrics = p.confusion.map(|c| c.metrics());
        if let Some(why) = &p.notice {
            log::warn!("skipped {}: {why}", p.key);
            notices.push(format!("skipped {}: {why}", p.key));
        }
    }
    Ok(EvalReport {
        protocol: protocol.clone(),
        feature_mode: cfg.features,
        model: cfg.model,
        seed: cfg.seed,
        config: *cfg,
        users: ds.len(),
        points,
        notices,
    })
}

/// Outcome of retraining every split with the test labels permuted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub protocol: String,
    pub splits_checked: usize,
    /// Splits whose permutation actually changed at least one test label.
    pub splits_permuted: usize,
    pub mismatches: Vec<String>,
}

impl LeakageAudit {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.splits_checked > 0
    }
}

/// Retrains every split of `protocol` with test labels shuffled among the test
/// users and compares trained-artifact digests with the unshuffled run.
pub fn audit_leakage(ds: &Dataset, cfg: &EvalConfig, protocol: &Protocol) -> Result<LeakageAudit> {
    let Plan { points, groups } = plan(ds, cfg, protocol)?;
    let mut audit = LeakageAudit {
        protocol: protocol.name().to_owned(),
        splits_checked: 0,
        splits_permuted: 0,
        mismatches: Vec::new(),
    };
    let mut job_index = 0u64;
    for group in &groups {
        let table = FeatureTable::build(ds, cfg.features, group.k)?;
        let base = job_index;
        let results: Vec<(bool, bool)> = group
            .jobs
            .par_iter()
            .enumerate()
            .map(|(j, job)| -> Result<(bool, bool)> {
                let seed = cfg.seed ^ (base + j as u64);
                let original = run_split(&table, &ds.labels, &job.train, &job.test, cfg, seed)?;
                let mut labels = ds.labels.clone();
                let mut shuffled: Vec<Label> = job.test.iter().map(|&i| labels[i]).collect();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
                let changed = job.test.iter().zip(&shuffled).any(|(&i, l)| labels[i] != *l);
                for (&i, l) in job.test.iter().zip(shuffled) {
                    labels[i] = l;
                }
                let permuted = run_split(&table, &labels, &job.train, &job.test, cfg, seed)?;
                Ok((original.artifact_digest == permuted.artifact_digest, changed))
            })
            .collect::<Result<_>>()?;
        for (job, (same, changed)) in group.jobs.iter().zip(results) {
            audit.splits_checked += 1;
            audit.splits_permuted += usize::from(changed);
            if !same {
                let fold = job.fold.map(|f| format!(" fold {f}")).unwrap_or_default();
                audit
                    .mismatches
                    .push(format!("{}{fold}: artifacts differ", points[job.point].key));
            }
        }
        job_index += group.jobs.len() as u64;
    }
    Ok(audit)
}

/// Paired McNemar tests between reports of the same protocol, matched by point.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<BTreeMap<String, McNemarResult>> {
    let mut out = BTreeMap::new();
    for pa in &a.points {
        let Some(pb) = b.point(&pa.key) else { continue };
        if pa.predictions.is_empty() || pb.predictions.is_empty() {
            continue;
        }
        let (Some(xa), Some(xb)) = (a.predictions_of(&pa.key), b.predictions_of(&pb.key)) else {
            continue;
        };
        if xa.iter().map(|u| u.user).ne(xb.iter().map(|u| u.user)) {
            return Err(Error::InvalidParam(format!(
                "reports evaluate different users at {}",
                pa.key
            )));
        }
        let truth: Vec<Label> = xa.iter().map(|u| u.truth).collect();
        let pa_: Vec<Label> = xa.iter().map(|u| u.predicted).collect();
        let pb_: Vec<Label> = xb.iter().map(|u| u.predicted).collect();
        out.insert(pa.key.to_string(), mcnemar(&pa_, &pb_, &truth)?);
    }
    Ok(out)
}
