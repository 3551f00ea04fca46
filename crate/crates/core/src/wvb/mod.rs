//! Hand-crafted per-user behavior features and their reversion-split variant.

mod importance;

use serde::{Deserialize, Serialize};

pub use self::importance::{feature_importance, FeatureImportance, Importance};
use crate::corpus::HopBucket;
use crate::error::{Error, Result};
use crate::pairfeat::{CommonCats, PairFeatures, TimeBucket, UserLog};

/// The eleven behavior features of one user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WvbVector {
    /// Consecutive same-page re-edit after more than 15 minutes.
    pub crs: bool,
    /// Consecutive same-page re-edit within 3 minutes.
    pub crv: bool,
    /// Number of consecutive re-edits of the same meta-page.
    pub crm: u32,
    /// Consecutive re-edit of the same non-meta page.
    pub crn: bool,
    pub crmv: bool,
    pub crmf: bool,
    pub crms: bool,
    /// A consecutive re-edit within 15 minutes later followed by a very fast one.
    pub crf_crv: bool,
    /// First edit on a meta-page.
    pub fm: bool,
    /// New page within 3 hops, unknown category, slow.
    pub ntus: bool,
    /// At least two new pages within 3 hops edited slowly.
    pub nts_nts: bool,
}

impl WvbVector {
    pub const NAMES: [&'static str; 11] = [
        "crs", "crv", "crm", "crn", "crmv", "crmf", "crms", "crf_crv", "fm", "ntus", "nts_nts",
    ];
    pub const DIM: usize = 11;

    /// Numeric encoding in [`Self::NAMES`] order; booleans as 0/1, `crm` raw.
    pub fn to_vec(&self) -> Vec<f64> {
        let b = |v: bool| f64::from(u8::from(v));
        vec![
            b(self.crs),
            b(self.crv),
            f64::from(self.crm),
            b(self.crn),
            b(self.crmv),
            b(self.crmf),
            b(self.crms),
            b(self.crf_crv),
            b(self.fm),
            b(self.ntus),
            b(self.nts_nts),
        ]
    }
}

/// A re-edit feature split by whether the re-edit followed a revert.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split<T> {
    pub revert_driven: T,
    pub not_revert_driven: T,
}

impl Split<bool> {
    fn set(&mut self, revert_driven: bool) {
        if revert_driven {
            self.revert_driven = true;
        } else {
            self.not_revert_driven = true;
        }
    }

    pub fn any(&self) -> bool {
        self.revert_driven || self.not_revert_driven
    }
}

impl Split<u32> {
    fn bump(&mut self, revert_driven: bool) {
        if revert_driven {
            self.revert_driven += 1;
        } else {
            self.not_revert_driven += 1;
        }
    }

    pub fn total(&self) -> u32 {
        self.revert_driven + self.not_revert_driven
    }
}

/// Behavior features with the eight re-edit features split by reversion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WvbVectorWR {
    pub crs: Split<bool>,
    pub crv: Split<bool>,
    pub crm: Split<u32>,
    pub crn: Split<bool>,
    pub crmv: Split<bool>,
    pub crmf: Split<bool>,
    pub crms: Split<bool>,
    pub crf_crv: Split<bool>,
    pub fm: bool,
    pub ntus: bool,
    pub nts_nts: bool,
}

impl WvbVectorWR {
    pub const NAMES: [&'static str; 19] = [
        "crs_rd", "crs_nrd", "crv_rd", "crv_nrd", "crm_rd", "crm_nrd", "crn_rd", "crn_nrd",
        "crmv_rd", "crmv_nrd", "crmf_rd", "crmf_nrd", "crms_rd", "crms_nrd", "crf_crv_rd",
        "crf_crv_nrd", "fm", "ntus", "nts_nts",
    ];
    pub const DIM: usize = 19;

    pub fn to_vec(&self) -> Vec<f64> {
        let b = |v: bool| f64::from(u8::from(v));
        let mut out = Vec::with_capacity(Self::DIM);
        for s in [self.crs, self.crv] {
            out.extend([b(s.revert_driven), b(s.not_revert_driven)]);
        }
        out.extend([
            f64::from(self.crm.revert_driven),
            f64::from(self.crm.not_revert_driven),
        ]);
        for s in [self.crn, self.crmv, self.crmf, self.crms, self.crf_crv] {
            out.extend([b(s.revert_driven), b(s.not_revert_driven)]);
        }
        out.extend([b(self.fm), b(self.ntus), b(self.nts_nts)]);
        out
    }

    /// The eight revert-driven halves, in feature order.
    pub fn revert_driven_vec(&self) -> Vec<f64> {
        let b = |v: bool| f64::from(u8::from(v));
        vec![
            b(self.crs.revert_driven),
            b(self.crv.revert_driven),
            f64::from(self.crm.revert_driven),
            b(self.crn.revert_driven),
            b(self.crmv.revert_driven),
            b(self.crmf.revert_driven),
            b(self.crms.revert_driven),
            b(self.crf_crv.revert_driven),
        ]
    }

    /// Merges the halves back into the unsplit features.
    pub fn merged(&self) -> WvbVector {
        WvbVector {
            crs: self.crs.any(),
            crv: self.crv.any(),
            crm: self.crm.total(),
            crn: self.crn.any(),
            crmv: self.crmv.any(),
            crmf: self.crmf.any(),
            crms: self.crms.any(),
            crf_crv: self.crf_crv.any(),
            fm: self.fm,
            ntus: self.ntus,
            nts_nts: self.nts_nts,
        }
    }
}

/// Names of the revert-driven halves appended in the WTPM-WR mode.
pub const REVERT_DRIVEN_NAMES: [&str; 8] = [
    "crs_rd", "crv_rd", "crm_rd", "crn_rd", "crmv_rd", "crmf_rd", "crms_rd", "crf_crv_rd",
];

fn is_nts(r: &PairFeatures) -> bool {
    r.is_new_page() && r.hop == Some(HopBucket::Within3) && r.time == TimeBucket::Slow
}

/// Walks the (truncated) log once, routing every re-edit feature through
/// `split(row)`; the plain vector is the WR vector with routing ignored.
fn accumulate(rows: &[PairFeatures], split: impl Fn(&PairFeatures) -> bool) -> WvbVectorWR {
    let mut v = WvbVectorWR {
        fm: rows.first().is_some_and(|r| r.is_first && r.is_meta2),
        ..Default::default()
    };
    let mut seen_fast_consecutive = false;
    let mut nts = 0usize;
    for r in rows {
        if r.same_page_consecutive {
            let rd = split(r);
            match r.time {
                TimeBucket::Slow => v.crs.set(rd),
                TimeBucket::VeryFast => v.crv.set(rd),
                TimeBucket::Fast => {}
            }
            if r.is_meta2 {
                v.crm.bump(rd);
                match r.time {
                    TimeBucket::VeryFast => v.crmv.set(rd),
                    TimeBucket::Fast => v.crmf.set(rd),
                    TimeBucket::Slow => v.crms.set(rd),
                }
            } else {
                v.crn.set(rd);
            }
            if r.time == TimeBucket::VeryFast && seen_fast_consecutive {
                v.crf_crv.set(rd);
            }
            if r.time.within_15_min() {
                seen_fast_consecutive = true;
            }
        }
        if is_nts(r) {
            nts += 1;
            if r.common_cats == Some(CommonCats::NullInfo) {
                v.ntus = true;
            }
        }
    }
    v.nts_nts = nts >= 2;
    v
}

/// Behavior features over the first `k` rows of a log (all rows when `None`).
///
/// Revert information is never consulted.
pub fn wvb_features(log: &UserLog, k: Option<usize>) -> WvbVector {
    accumulate(log.prefix(k), |_| false).merged()
}

/// Reversion-split behavior features; a qualifying row counts as revert
/// driven when an earlier edit of its page by the user was reverted. For
/// `crf_crv` the routing follows the completing (very fast) row.
pub fn wvb_features_wr(log: &UserLog, k: Option<usize>) -> Result<WvbVectorWR> {
    if !log.reverts_loaded {
        return Err(Error::RevertsUnavailable);
    }
    Ok(accumulate(log.prefix(k), PairFeatures::revert_driven))
}

/// CSV export: one row per user, feature columns then `label`.
pub fn write_wvb_csv<W: std::io::Write>(
    out: W,
    names: &[&str],
    rows: impl IntoIterator<Item = (String, Vec<f64>, Option<crate::corpus::Label>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["user_id"];
    header.extend_from_slice(names);
    header.push("label");
    w.write_record(&header)?;
    for (user, values, label) in rows {
        let mut rec = vec![user];
        rec.extend(values.iter().map(|v| v.to_string()));
        rec.push(label.map(|l| l.as_str().to_owned()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("wvb csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairfeat::build_user_log;
    use crate::pairfeat::testutil::{edit, timeline};

    fn log_of(edits: Vec<crate::corpus::EditRecord>, reverts: bool) -> UserLog {
        build_user_log(&timeline(edits), None, None, reverts)
    }

    #[test]
    fn first_edit_meta() {
        let log = log_of(vec![edit("t", 0, true, None)], false);
        let v = wvb_features(&log, None);
        assert!(v.fm);
        assert_eq!(v.to_vec().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn fast_meta_reedit() {
        let log = log_of(vec![edit("t", 0, true, None), edit("t", 60, true, None)], false);
        let v = wvb_features(&log, None);
        assert_eq!(v.crm, 1);
        assert!(v.crmv && v.crv);
        assert!(!v.crmf && !v.crms && !v.crs && !v.crn);
    }

    #[test]
    fn nts_nts_needs_two() {
        let g = crate::corpus::HopGraph::from_edges([("a", "b"), ("b", "c")]);
        let one = vec![edit("a", 0, false, None), edit("b", 5000, false, None)];
        let two = vec![
            edit("a", 0, false, None),
            edit("b", 5000, false, None),
            edit("c", 10000, false, None),
        ];
        let l1 = build_user_log(&timeline(one), None, Some(&g), false);
        let l2 = build_user_log(&timeline(two), None, Some(&g), false);
        assert!(!wvb_features(&l1, None).nts_nts);
        assert!(wvb_features(&l1, None).ntus);
        assert!(wvb_features(&l2, None).nts_nts);
    }

    #[test]
    fn crf_crv_order_matters() {
        // fast consecutive pair, then very fast consecutive pair on another page
        let forward = vec![
            edit("a", 0, false, None),
            edit("a", 300, false, None),
            edit("b", 5000, false, None),
            edit("b", 5010, false, None),
        ];
        assert!(wvb_features(&log_of(forward, false), None).crf_crv);
        // a single very fast consecutive pair alone does not qualify
        let single = vec![edit("a", 0, false, None), edit("a", 10, false, None)];
        assert!(!wvb_features(&log_of(single, false), None).crf_crv);
        // very fast then slow: order reversed, no pattern
        let reversed = vec![
            edit("a", 0, false, None),
            edit("a", 10, false, None),
            edit("a", 5000, false, None),
        ];
        assert!(!wvb_features(&log_of(reversed, false), None).crf_crv);
        // two very fast re-edits: the first counts as "within 15 minutes"
        let double = vec![
            edit("a", 0, false, None),
            edit("a", 10, false, None),
            edit("a", 20, false, None),
        ];
        assert!(wvb_features(&log_of(double, false), None).crf_crv);
    }

    #[test]
    fn revert_routing() {
        let mut a = edit("p", 0, false, None);
        a.reverted = Some(true);
        let b = edit("p", 5000, false, None);
        let log = log_of(vec![a, b], true);
        let wr = wvb_features_wr(&log, None).unwrap();
        assert!(wr.crs.revert_driven);
        assert!(!wr.crs.not_revert_driven);
        // plain mode ignores reverts
        assert!(wvb_features(&log, None).crs);
    }

    #[test]
    fn no_reedits_all_split_false() {
        let log = log_of(vec![edit("p", 0, false, None), edit("q", 50, false, None)], true);
        let wr = wvb_features_wr(&log, None).unwrap();
        assert_eq!(wr.to_vec()[..16].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn wr_requires_reverts() {
        let log = log_of(vec![edit("p", 0, false, None)], false);
        assert!(matches!(wvb_features_wr(&log, None), Err(Error::RevertsUnavailable)));
    }

    #[test]
    fn cutoff_limits_rows() {
        let log = log_of(
            vec![edit("t", 0, true, None), edit("t", 60, true, None), edit("t", 120, true, None)],
            false,
        );
        assert_eq!(wvb_features(&log, Some(1)).crm, 0);
        assert_eq!(wvb_features(&log, Some(2)).crm, 1);
        assert_eq!(wvb_features(&log, Some(100)).crm, 2);
    }

    #[test]
    fn vector_lengths() {
        assert_eq!(WvbVector::default().to_vec().len(), WvbVector::DIM);
        assert_eq!(WvbVectorWR::default().to_vec().len(), WvbVectorWR::DIM);
        assert_eq!(WvbVectorWR::NAMES.len(), WvbVectorWR::DIM);
    }
}
