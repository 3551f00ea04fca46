//! Edit-log ingestion: the edits, labels, links and reverts inputs.
//!
//! File formats:
//!
//! * edits: JSON lines with `user`, `page`, `title`, `ts` (ISO-8601 UTC),
//!   `categories` (array or null), `meta`, and optional `reverted` /
//!   `reverted_by_bot` flags.
//! * labels: CSV with header `user,label,registration_ts`.
//! * links: TSV of directed `src_page` / `dst_page` edges.
//! * reverts: CSV with header `user,page,ts,reverted_by_bot`; each row marks
//!   the matching edit as reverted.

mod graph;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use log::warn;
use serde::{Deserialize, Serialize};

pub use self::graph::{HopBucket, HopGraph, HopQuery, DEFAULT_EXPANSION_CAP};
pub use self::stats::{behavior_stats, ClassStats, StatsReport};
use crate::error::{Error, Result};
use crate::timefmt;

/// One timestamped edit of a page by a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    #[serde(rename = "user")]
    pub user_id: String,
    #[serde(rename = "page")]
    pub page_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(with = "timefmt::serde_utc")]
    pub ts: DateTime<Utc>,
    /// `None` when category information is unavailable for the page.
    pub categories: Option<BTreeSet<String>>,
    #[serde(rename = "meta")]
    pub is_meta: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverted_by_bot: Option<bool>,
}

/// Ground-truth class of a user. Benign is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Vandal,
    Benign,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Vandal => "vandal",
            Label::Benign => "benign",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Benign
    }

    /// `+1.0` for benign, `-1.0` for vandal.
    pub fn sign(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Benign
        } else {
            Label::Vandal
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "vandal" => Ok(Label::Vandal),
            "benign" => Ok(Label::Benign),
            other => Err(format!("unknown label {other:?} (expected vandal or benign)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserLabel {
    pub user_id: String,
    pub label: Label,
    #[serde(with = "timefmt::serde_utc_opt", default)]
    pub registration_ts: Option<DateTime<Utc>>,
}

/// A precomputed reversion marker for one edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevertRecord {
    #[serde(rename = "user")]
    pub user_id: String,
    #[serde(rename = "page")]
    pub page_id: String,
    #[serde(with = "timefmt::serde_utc")]
    pub ts: DateTime<Utc>,
    #[serde(default)]
    pub reverted_by_bot: bool,
}

/// One user's edits in chronological order (stable with respect to input order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTimeline {
    pub user_id: String,
    pub edits: Vec<EditRecord>,
}

impl UserTimeline {
    pub fn first_edit(&self) -> Option<&EditRecord> {
        self.edits.first()
    }
}

/// Counts reported after loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub users: usize,
    pub edits: usize,
    pub vandals: usize,
    pub benign: usize,
    pub unlabeled: usize,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub reverts_loaded: bool,
    pub warnings: Vec<String>,
}

/// Indexed, immutable corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    timelines: Vec<UserTimeline>,
    labels: Vec<Option<UserLabel>>,
    index: HashMap<String, usize>,
    graph: Option<HopGraph>,
    reverts_loaded: bool,
    summary: LoadSummary,
}

impl Corpus {
    /// Builds a corpus from in-memory records.
    ///
    /// Revert data counts as loaded when `reverts` is given or any edit
    /// carries an inline `reverted` flag; in that case unflagged edits are
    /// treated as not reverted.
    pub fn from_parts(
        edits: Vec<EditRecord>,
        labels: Vec<UserLabel>,
        graph: Option<HopGraph>,
        reverts: Option<Vec<RevertRecord>>,
    ) -> Result<Self> {
        let mut warnings = Vec::new();
        let inline_reverts = edits.iter().any(|e| e.reverted.is_some());
        let reverts_loaded = reverts.is_some() || inline_reverts;

        let mut by_user: BTreeMap<String, Vec<EditRecord>> = BTreeMap::new();
        for edit in edits {
            by_user.entry(edit.user_id.clone()).or_default().push(edit);
        }

        let mut label_map: BTreeMap<String, UserLabel> = BTreeMap::new();
        for label in labels {
            if label_map.contains_key(&label.user_id) {
                return Err(Error::InvalidParam(format!(
                    "user {} has more than one label",
                    label.user_id
                )));
            }
            if !by_user.contains_key(&label.user_id) {
                warnings.push(format!("labeled user {} has no edits", label.user_id));
                by_user.insert(label.user_id.clone(), Vec::new());
            }
            label_map.insert(label.user_id.clone(), label);
        }

        let mut timelines = Vec::with_capacity(by_user.len());
        let mut label_vec = Vec::with_capacity(by_user.len());
        let mut index = HashMap::with_capacity(by_user.len());
        for (user_id, mut edits) in by_user {
            // stable: ties keep input order
            edits.sort_by_key(|e| e.ts);
            let mut seen: BTreeSet<(&str, DateTime<Utc>)> = BTreeSet::new();
            let mut dupes = Vec::new();
            for e in &edits {
                if !seen.insert((e.page_id.as_str(), e.ts)) {
                    dupes.push(format!(
                        "duplicate edit ({}, {}, {}) kept twice",
                        user_id,
                        e.page_id,
                        timefmt::format_utc(&e.ts)
                    ));
                }
            }
            warnings.extend(dupes);
            if reverts_loaded {
                for e in &mut edits {
                    e.reverted.get_or_insert(false);
                }
            }
            let label = label_map.remove(&user_id);
            index.insert(user_id.clone(), timelines.len());
            timelines.push(UserTimeline { user_id, edits });
            label_vec.push(label);
        }

        let mut corpus = Corpus {
            timelines,
            labels: label_vec,
            index,
            graph,
            reverts_loaded,
            summary: LoadSummary::default(),
        };

        if let Some(reverts) = reverts {
            corpus.join_reverts(reverts, &mut warnings);
        }

        let unlabeled = corpus.labels.iter().filter(|l| l.is_none()).count();
        if unlabeled > 0 {
            warnings.push(format!("{unlabeled} users with edits have no label"));
        }
        corpus.summary = LoadSummary {
            users: corpus.timelines.len(),
            edits: corpus.timelines.iter().map(|t| t.edits.len()).sum(),
            vandals: corpus.count_label(Label::Vandal),
            benign: corpus.count_label(Label::Benign),
            unlabeled,
            graph_nodes: corpus.graph.as_ref().map_or(0, HopGraph::node_count),
            graph_edges: corpus.graph.as_ref().map_or(0, HopGraph::edge_count),
            reverts_loaded,
            warnings,
        };
        for w in &corpus.summary.warnings {
            warn!("{w}");
        }
        Ok(corpus)
    }

    fn join_reverts(&mut self, reverts: Vec<RevertRecord>, warnings: &mut Vec<String>) {
        for r in reverts {
            let matched = self.index.get(&r.user_id).map_or(0, |&u| {
                let mut n = 0;
                for e in &mut self.timelines[u].edits {
                    if e.page_id == r.page_id && e.ts == r.ts {
                        e.reverted = Some(true);
                        e.reverted_by_bot = Some(r.reverted_by_bot);
                        n += 1;
                    }
                }
                n
            });
            if matched == 0 {
                warnings.push(format!(
                    "revert ({}, {}, {}) matches no edit",
                    r.user_id,
                    r.page_id,
                    timefmt::format_utc(&r.ts)
                ));
            }
        }
    }

    fn count_label(&self, label: Label) -> usize {
        self.labels
            .iter()
            .filter(|l| l.as_ref().map(|l| l.label) == Some(label))
            .count()
    }

    pub fn timelines(&self) -> &[UserTimeline] {
        &self.timelines
    }

    pub fn len(&self) -> usize {
        self.timelines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timelines.is_empty()
    }

    pub fn label(&self, user: usize) -> Option<Label> {
        self.labels[user].as_ref().map(|l| l.label)
    }

    pub fn user_label(&self, user: usize) -> Option<&UserLabel> {
        self.labels[user].as_ref()
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.index.get(user_id).copied()
    }

    pub fn timeline(&self, user_id: &str) -> Option<&UserTimeline> {
        self.user_index(user_id).map(|i| &self.timelines[i])
    }

    pub fn graph(&self) -> Option<&HopGraph> {
        self.graph.as_ref()
    }

    pub fn reverts_loaded(&self) -> bool {
        self.reverts_loaded
    }

    pub fn summary(&self) -> &LoadSummary {
        &self.summary
    }

    /// A copy of this corpus with all revert information removed.
    pub fn without_reverts(&self) -> Corpus {
        let mut out = self.clone();
        out.reverts_loaded = false;
        out.summary.reverts_loaded = false;
        for t in &mut out.timelines {
            for e in &mut t.edits {
                e.reverted = None;
                e.reverted_by_bot = None;
            }
        }
        out
    }
}

/// Loads and indexes the input datasets.
pub fn load_corpus(
    edits_path: &Path,
    labels_path: &Path,
    links_path: Option<&Path>,
    reverts_path: Option<&Path>,
) -> Result<Corpus> {
    let edits = read_edits(edits_path)?;
    let labels = read_labels(labels_path)?;
    let graph = links_path.map(read_links).transpose()?;
    let reverts = reverts_path.map(read_reverts).transpose()?;
    Corpus::from_parts(edits, labels, graph, reverts)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn read_edits(path: &Path) -> Result<Vec<EditRecord>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let edit: EditRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(edit);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct LabelRow {
    user: String,
    label: String,
    #[serde(default)]
    registration_ts: Option<String>,
}

pub fn read_labels(path: &Path) -> Result<Vec<UserLabel>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: LabelRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        let label = row
            .label
            .parse::<Label>()
            .map_err(|msg| Error::parse(path, line, msg))?;
        let registration_ts = match row.registration_ts.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(timefmt::parse_utc(s).map_err(|msg| Error::parse(path, line, msg))?),
        };
        out.push(UserLabel {
            user_id: row.user,
            label,
            registration_ts,
        });
    }
    Ok(out)
}

pub fn read_links(path: &Path) -> Result<HopGraph> {
    let mut edges = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (i == 0 && line == "src_page\tdst_page") {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(src), Some(dst), None) if !src.is_empty() && !dst.is_empty() => {
                edges.push((src.to_owned(), dst.to_owned()));
            }
            _ => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    "expected two tab-separated columns src_page, dst_page",
                ))
            }
        }
    }
    Ok(HopGraph::from_edges(edges))
}

pub fn read_reverts(path: &Path) -> Result<Vec<RevertRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for row in reader.deserialize::<RevertRecord>() {
        out.push(row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?);
    }
    Ok(out)
}
