//! Consecutive edit-pair featureization (`edit_pair` / `user_log` datasets).
//!
//! Every edit yields one row. The first edit is paired with a registration
//! sentinel, so a user log always has as many rows as the user has edits.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EditRecord, HopBucket, HopGraph, HopQuery, UserTimeline};
use crate::error::Result;
use crate::timefmt;

/// Gap below which an edit counts as very fast (3 minutes).
pub const VERY_FAST_SECS: i64 = 180;
/// Gap below which an edit counts as fast (15 minutes).
pub const FAST_SECS: i64 = 900;

/// Page id written for the sentinel predecessor of a user's first edit.
pub const REGISTRATION: &str = "REGISTRATION";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBucket {
    VeryFast,
    Fast,
    Slow,
}

impl TimeBucket {
    pub const ALL: [TimeBucket; 3] = [TimeBucket::VeryFast, TimeBucket::Fast, TimeBucket::Slow];

    pub fn from_gap_secs(gap: i64) -> Self {
        if gap < VERY_FAST_SECS {
            TimeBucket::VeryFast
        } else if gap < FAST_SECS {
            TimeBucket::Fast
        } else {
            TimeBucket::Slow
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn within_15_min(self) -> bool {
        self != TimeBucket::Slow
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeBucket::VeryFast => "very_fast",
            TimeBucket::Fast => "fast",
            TimeBucket::Slow => "slow",
        }
    }
}

impl fmt::Display for TimeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category overlap between the two pages of a new-page pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommonCats {
    None,
    AtLeastOne,
    NullInfo,
}

impl CommonCats {
    pub fn between(a: Option<&BTreeSet<String>>, b: Option<&BTreeSet<String>>) -> Self {
        match (a, b) {
            (Some(a), Some(b)) => {
                if a.intersection(b).next().is_some() {
                    CommonCats::AtLeastOne
                } else {
                    CommonCats::None
                }
            }
            _ => CommonCats::NullInfo,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CommonCats::None => "none",
            CommonCats::AtLeastOne => "at_least_one",
            CommonCats::NullInfo => "null_info",
        }
    }
}

/// Features of one consecutive edit pair `(p1, p2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub user_id: String,
    /// `None` for the registration sentinel.
    pub p1: Option<String>,
    pub p2: String,
    pub ts2: DateTime<Utc>,
    pub is_meta2: bool,
    pub time: TimeBucket,
    pub is_first: bool,
    pub is_reedit: bool,
    pub same_page_consecutive: bool,
    /// Whether an earlier edit of `p2` by this user was reverted; `None`
    /// when no revert data is loaded.
    pub prev_reverted: Option<bool>,
    pub hop: Option<HopBucket>,
    pub common_cats: Option<CommonCats>,
}

impl PairFeatures {
    /// A pair whose `p2` the user had never edited before (excluding the sentinel).
    pub fn is_new_page(&self) -> bool {
        !self.is_first && !self.is_reedit
    }

    pub fn revert_driven(&self) -> bool {
        self.prev_reverted == Some(true)
    }
}

/// Predecessor of an edit: a real edit or the registration sentinel.
#[derive(Debug, Clone, Copy)]
pub enum Prev<'a> {
    Registration(Option<DateTime<Utc>>),
    Edit(&'a EditRecord),
}

/// What a user has done so far on each page, used for re-edit and revert lookups.
#[derive(Debug, Clone, Default)]
pub struct PageHistory {
    reverts_loaded: bool,
    pages: HashMap<String, PageState>,
}

#[derive(Debug, Clone, Copy, Default)]
struct PageState {
    /// Timestamp of the earliest reverted edit of the page, if any.
    first_reverted: Option<DateTime<Utc>>,
}

impl PageHistory {
    pub fn new(reverts_loaded: bool) -> Self {
        PageHistory {
            reverts_loaded,
            pages: HashMap::new(),
        }
    }

    pub fn has_edited(&self, page: &str) -> bool {
        self.pages.contains_key(page)
    }

    /// True when an edit of `page` strictly before `ts` was reverted.
    pub fn reverted_before(&self, page: &str, ts: DateTime<Utc>) -> bool {
        self.pages
            .get(page)
            .and_then(|s| s.first_reverted)
            .is_some_and(|r| r < ts)
    }

    pub fn record(&mut self, edit: &EditRecord) {
        let state = self.pages.entry(edit.page_id.clone()).or_default();
        if self.reverts_loaded && edit.reverted == Some(true) {
            state.first_reverted = Some(match state.first_reverted {
                Some(t) if t <= edit.ts => t,
                _ => edit.ts,
            });
        }
    }
}

/// Hop-distance source for featureization.
pub trait HopLookup {
    fn hop(&mut self, p1: &str, p2: &str) -> HopBucket;
}

impl HopLookup for HopQuery<'_> {
    fn hop(&mut self, p1: &str, p2: &str) -> HopBucket {
        self.hop_bucket(p1, p2)
    }
}

impl HopLookup for &HopGraph {
    fn hop(&mut self, p1: &str, p2: &str) -> HopBucket {
        self.hop_bucket(p1, p2)
    }
}

/// Featurizes `cur` given its predecessor and the user's history before `cur`.
///
/// Without a graph every new-page pair is `unreachable`.
pub fn featurize_pair(
    prev: Prev<'_>,
    prev_categories: Option<&BTreeSet<String>>,
    cur: &EditRecord,
    history: &PageHistory,
    graph: Option<&mut dyn HopLookup>,
) -> PairFeatures {
    let prev_reverted = history
        .reverts_loaded
        .then(|| history.reverted_before(&cur.page_id, cur.ts));
    match prev {
        Prev::Registration(registered) => {
            let time = match registered {
                Some(r) => TimeBucket::from_gap_secs((cur.ts - r).num_seconds().max(0)),
                None => TimeBucket::Slow,
            };
            PairFeatures {
                user_id: cur.user_id.clone(),
                p1: None,
                p2: cur.page_id.clone(),
                ts2: cur.ts,
                is_meta2: cur.is_meta,
                time,
                is_first: true,
                is_reedit: false,
                same_page_consecutive: false,
                prev_reverted,
                hop: None,
                common_cats: None,
            }
        }
        Prev::Edit(p) => {
            let gap = (cur.ts - p.ts).num_seconds();
            let is_reedit = history.has_edited(&cur.page_id);
            let (hop, common_cats) = if is_reedit {
                (None, None)
            } else {
                let hop = match graph {
                    Some(g) => g.hop(&p.page_id, &cur.page_id),
                    None => HopBucket::Unreachable,
                };
                let cats = CommonCats::between(prev_categories, cur.categories.as_ref());
                (Some(hop), Some(cats))
            };
            PairFeatures {
                user_id: cur.user_id.clone(),
                p1: Some(p.page_id.clone()),
                p2: cur.page_id.clone(),
                ts2: cur.ts,
                is_meta2: cur.is_meta,
                time: TimeBucket::from_gap_secs(gap),
                is_first: false,
                is_reedit,
                same_page_consecutive: is_reedit && p.page_id == cur.page_id,
                prev_reverted,
                hop,
                common_cats,
            }
        }
    }
}

/// Chronological pair features for one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserLog {
    pub user_id: String,
    pub reverts_loaded: bool,
    pub rows: Vec<PairFeatures>,
}

impl UserLog {
    /// The first `k` rows (all rows when `k` is `None`).
    pub fn prefix(&self, k: Option<usize>) -> &[PairFeatures] {
        match k {
            Some(k) => &self.rows[..k.min(self.rows.len())],
            None => &self.rows,
        }
    }

    pub fn truncated(&self, k: usize) -> UserLog {
        UserLog {
            user_id: self.user_id.clone(),
            reverts_loaded: self.reverts_loaded,
            rows: self.prefix(Some(k)).to_vec(),
        }
    }
}

/// Builds the user log of a sorted timeline.
pub fn build_user_log(
    timeline: &UserTimeline,
    registration: Option<DateTime<Utc>>,
    graph: Option<&HopGraph>,
    reverts_loaded: bool,
) -> UserLog {
    let mut query = graph.map(HopQuery::new);
    let mut history = PageHistory::new(reverts_loaded);
    let mut rows = Vec::with_capacity(timeline.edits.len());
    let mut prev: Option<&EditRecord> = None;
    for cur in &timeline.edits {
        let lookup = query.as_mut().map(|q| q as &mut dyn HopLookup);
        let row = match prev {
            None => featurize_pair(Prev::Registration(registration), None, cur, &history, lookup),
            Some(p) => featurize_pair(Prev::Edit(p), p.categories.as_ref(), cur, &history, lookup),
        };
        rows.push(row);
        history.record(cur);
        prev = Some(cur);
    }
    UserLog {
        user_id: timeline.user_id.clone(),
        reverts_loaded,
        rows,
    }
}

/// User logs for every user in the corpus, in corpus order.
pub fn corpus_logs(corpus: &Corpus) -> Vec<UserLog> {
    use rayon::prelude::*;
    corpus
        .timelines()
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let reg = corpus.user_label(i).and_then(|l| l.registration_ts);
            build_user_log(t, reg, corpus.graph(), corpus.reverts_loaded())
        })
        .collect()
}

fn opt_str<T: AsRef<str>>(v: Option<T>) -> String {
    v.map(|s| s.as_ref().to_owned()).unwrap_or_default()
}

/// Column order of the `edit_pair` CSV export.
pub const EDIT_PAIR_COLUMNS: [&str; 12] = [
    "user_id",
    "p1",
    "p2",
    "ts2",
    "is_meta2",
    "time",
    "is_first",
    "is_reedit",
    "same_page_consecutive",
    "prev_reverted",
    "hop",
    "common_cats",
];

/// Writes the `edit_pair` dataset as CSV, one row per pair.
pub fn write_edit_pairs<'a, W: Write>(out: W, logs: impl IntoIterator<Item = &'a UserLog>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDIT_PAIR_COLUMNS)?;
    for log in logs {
        for r in &log.rows {
            w.write_record([
                r.user_id.clone(),
                r.p1.clone().unwrap_or_else(|| REGISTRATION.to_owned()),
                r.p2.clone(),
                timefmt::format_utc(&r.ts2),
                r.is_meta2.to_string(),
                r.time.as_str().to_owned(),
                r.is_first.to_string(),
                r.is_reedit.to_string(),
                r.same_page_consecutive.to_string(),
                opt_str(r.prev_reverted.map(|b| b.to_string())),
                opt_str(r.hop.map(HopBucket::as_str)),
                opt_str(r.common_cats.map(CommonCats::as_str)),
            ])?;
        }
    }
    w.flush().map_err(|e| crate::Error::io("edit_pair csv", e))?;
    Ok(())
}
