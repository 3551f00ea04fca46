//! Class-conditional editing-behavior statistics.

use serde::{Deserialize, Serialize};

use super::{Corpus, Label};
use crate::pairfeat::{corpus_logs, PairFeatures, TimeBucket, UserLog};

/// Behavior statistics for both classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub reverts_available: bool,
    pub vandal: ClassStats,
    pub benign: ClassStats,
}

/// Statistics for one class. Fractions are `None` when their denominator is
/// empty; revert-driven figures are `None` when no revert data is loaded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub users: usize,
    pub edits: usize,
    /// Real consecutive pairs (registration sentinels excluded).
    pub pairs: usize,
    pub reedit_fraction: Option<f64>,
    pub new_edit_fraction: Option<f64>,
    pub very_fast_fraction: Option<f64>,
    pub fast_fraction: Option<f64>,
    pub slow_fraction: Option<f64>,
    /// Pairs made within 15 minutes of the previous edit.
    pub within_15_min_fraction: Option<f64>,
    /// New-page pairs made within 15 minutes.
    pub new_page_within_15_min_fraction: Option<f64>,
    /// Consecutive same-page pairs made within 15 minutes / 3 minutes.
    pub consecutive_within_15_min_fraction: Option<f64>,
    pub consecutive_within_3_min_fraction: Option<f64>,
    /// Users whose first edit is on a meta-page.
    pub first_edit_meta_fraction: Option<f64>,
    /// Meta-page share among each user's first four edits.
    pub first4_meta_fraction: Option<f64>,
    pub all_edits_meta_fraction: Option<f64>,
    /// Re-edits where an earlier edit of the page by the user was reverted.
    pub revert_driven_reedit_fraction: Option<f64>,
    /// Users with a run of at least 2 (3) revert-driven consecutive same-page pairs.
    pub edit_war_2_fraction: Option<f64>,
    pub edit_war_3_fraction: Option<f64>,
    /// Users with at least one surface edit on a meta (normal) page.
    pub surface_edit_meta_users: Option<f64>,
    pub surface_edit_normal_users: Option<f64>,
    /// Users with a run of at least 3 consecutive surface edits.
    pub surface_run3_users: Option<f64>,
}

fn frac(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn is_surface(r: &PairFeatures) -> bool {
    r.same_page_consecutive && !r.revert_driven() && r.time == TimeBucket::VeryFast
}

/// Longest run of consecutive rows satisfying `pred` that stay on one page.
fn longest_page_run(rows: &[PairFeatures], pred: impl Fn(&PairFeatures) -> bool) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut page: Option<&str> = None;
    for r in rows {
        if pred(r) {
            if page == Some(r.p2.as_str()) {
                run += 1;
            } else {
                run = 1;
                page = Some(r.p2.as_str());
            }
            best = best.max(run);
        } else {
            run = 0;
            page = None;
        }
    }
    best
}

#[derive(Default)]
struct Acc {
    users: usize,
    users_with_edits: usize,
    edits: usize,
    pairs: usize,
    reedits: usize,
    buckets: [usize; 3],
    new_pairs: usize,
    new_fast: usize,
    consecutive: usize,
    consecutive_fast: usize,
    consecutive_very_fast: usize,
    first_meta: usize,
    first4: usize,
    first4_meta: usize,
    meta_edits: usize,
    revert_driven_reedits: usize,
    war2: usize,
    war3: usize,
    surface_meta: usize,
    surface_normal: usize,
    surface_run3: usize,
}

impl Acc {
    fn add(&mut self, log: &UserLog) {
        self.users += 1;
        self.edits += log.rows.len();
        let Some(first) = log.rows.first() else {
            return;
        };
        self.users_with_edits += 1;
        self.first_meta += usize::from(first.is_meta2);
        for r in log.rows.iter().take(4) {
            self.first4 += 1;
            self.first4_meta += usize::from(r.is_meta2);
        }
        for r in &log.rows {
            self.meta_edits += usize::from(r.is_meta2);
            if r.is_first {
                continue;
            }
            self.pairs += 1;
            self.buckets[r.time.index()] += 1;
            if r.is_reedit {
                self.reedits += 1;
                self.revert_driven_reedits += usize::from(r.revert_driven());
            } else {
                self.new_pairs += 1;
                self.new_fast += usize::from(r.time.within_15_min());
            }
            if r.same_page_consecutive {
                self.consecutive += 1;
                self.consecutive_fast += usize::from(r.time.within_15_min());
                self.consecutive_very_fast += usize::from(r.time == TimeBucket::VeryFast);
            }
        }
        let war = longest_page_run(&log.rows, |r| r.same_page_consecutive && r.revert_driven());
        self.war2 += usize::from(war >= 2);
        self.war3 += usize::from(war >= 3);
        let surface = |meta: bool| log.rows.iter().any(|r| is_surface(r) && r.is_meta2 == meta);
        self.surface_meta += usize::from(surface(true));
        self.surface_normal += usize::from(surface(false));
        self.surface_run3 += usize::from(longest_page_run(&log.rows, is_surface) >= 3);
    }

    fn finish(&self, reverts: bool) -> ClassStats {
        let users = self.users_with_edits;
        let rev = |num: usize, den: usize| if reverts { frac(num, den) } else { None };
        ClassStats {
            users: self.users,
            edits: self.edits,
            pairs: self.pairs,
            reedit_fraction: frac(self.reedits, self.pairs),
            new_edit_fraction: frac(self.new_pairs, self.pairs),
            very_fast_fraction: frac(self.buckets[0], self.pairs),
            fast_fraction: frac(self.buckets[1], self.pairs),
            slow_fraction: frac(self.buckets[2], self.pairs),
            within_15_min_fraction: frac(self.buckets[0] + self.buckets[1], self.pairs),
            new_page_within_15_min_fraction: frac(self.new_fast, self.new_pairs),
            consecutive_within_15_min_fraction: frac(self.consecutive_fast, self.consecutive),
            consecutive_within_3_min_fraction: frac(self.consecutive_very_fast, self.consecutive),
            first_edit_meta_fraction: frac(self.first_meta, users),
            first4_meta_fraction: frac(self.first4_meta, self.first4),
            all_edits_meta_fraction: frac(self.meta_edits, self.edits),
            revert_driven_reedit_fraction: rev(self.revert_driven_reedits, self.reedits),
            edit_war_2_fraction: rev(self.war2, users),
            edit_war_3_fraction: rev(self.war3, users),
            surface_edit_meta_users: frac(self.surface_meta, users),
            surface_edit_normal_users: frac(self.surface_normal, users),
            surface_run3_users: frac(self.surface_run3, users),
        }
    }
}

/// Computes behavior statistics, building user logs internally.
pub fn behavior_stats(corpus: &Corpus) -> StatsReport {
    let logs = corpus_logs(corpus);
    behavior_stats_from_logs(corpus, &logs)
}

/// Computes behavior statistics from precomputed logs (in corpus order).
/// Unlabeled users are ignored.
pub fn behavior_stats_from_logs(corpus: &Corpus, logs: &[UserLog]) -> StatsReport {
    let mut vandal = Acc::default();
    let mut benign = Acc::default();
    for (i, log) in logs.iter().enumerate() {
        match corpus.label(i) {
            Some(Label::Vandal) => vandal.add(log),
            Some(Label::Benign) => benign.add(log),
            None => {}
        }
    }
    let reverts = corpus.reverts_loaded();
    StatsReport {
        reverts_available: reverts,
        vandal: vandal.finish(reverts),
        benign: benign.finish(reverts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UserLabel;
    use crate::pairfeat::testutil::edit;

    fn corpus(edits: Vec<(&str, &str, i64, bool)>, labels: &[(&str, Label)]) -> Corpus {
        let edits = edits
            .into_iter()
            .map(|(u, p, t, m)| {
                let mut e = edit(p, t, m, None);
                e.user_id = u.into();
                e
            })
            .collect();
        let labels = labels
            .iter()
            .map(|(u, l)| UserLabel {
                user_id: u.to_string(),
                label: *l,
                registration_ts: None,
            })
            .collect();
        Corpus::from_parts(edits, labels, None, None).unwrap()
    }

    #[test]
    fn single_benign_reediting_user() {
        let c = corpus(
            vec![("b", "p", 0, false), ("b", "p", 4000, false)],
            &[("b", Label::Benign)],
        );
        let s = behavior_stats(&c);
        assert_eq!(s.benign.reedit_fraction, Some(1.0));
        // no vandals: every fraction is null, never 0/0
        assert_eq!(s.vandal.users, 0);
        assert_eq!(s.vandal.reedit_fraction, None);
        assert_eq!(s.vandal.first_edit_meta_fraction, None);
        // revert figures absent without revert data
        assert!(!s.reverts_available);
        assert_eq!(s.benign.revert_driven_reedit_fraction, None);
        assert_eq!(s.benign.edit_war_2_fraction, None);
    }

    #[test]
    fn surface_edits_and_meta_shares() {
        let c = corpus(
            vec![
                ("v", "m", 0, true),
                ("v", "m", 10, true),
                ("v", "m", 20, true),
                ("v", "m", 30, true),
                ("v", "n", 5000, false),
            ],
            &[("v", Label::Vandal)],
        );
        let s = behavior_stats(&c).vandal;
        assert_eq!(s.first_edit_meta_fraction, Some(1.0));
        assert_eq!(s.first4_meta_fraction, Some(1.0));
        assert_eq!(s.all_edits_meta_fraction, Some(0.8));
        assert_eq!(s.surface_edit_meta_users, Some(1.0));
        assert_eq!(s.surface_edit_normal_users, Some(0.0));
        assert_eq!(s.surface_run3_users, Some(1.0));
        assert_eq!(s.pairs, 4);
        assert_eq!(s.very_fast_fraction, Some(0.75));
    }

    #[test]
    fn edit_war_runs() {
        let mut edits = Vec::new();
        for (i, rev) in [true, true, true, false].into_iter().enumerate() {
            let mut e = edit("p", i as i64 * 1000, false, None);
            e.user_id = "v".into();
            e.reverted = Some(rev);
            edits.push(e);
        }
        let labels = vec![UserLabel {
            user_id: "v".into(),
            label: Label::Vandal,
            registration_ts: None,
        }];
        let c = Corpus::from_parts(edits, labels, None, None).unwrap();
        let s = behavior_stats(&c).vandal;
        assert_eq!(s.edit_war_2_fraction, Some(1.0));
        assert_eq!(s.edit_war_3_fraction, Some(1.0));
        assert_eq!(s.revert_driven_reedit_fraction, Some(1.0));
    }
}
