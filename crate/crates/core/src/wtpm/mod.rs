//! Edit-pair state space, per-user transition matrices and the autoencoder
//! that compresses them.

mod autoencoder;

use std::fmt;

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::HopBucket;
use crate::pairfeat::{CommonCats, PairFeatures, TimeBucket, UserLog};

pub use self::autoencoder::{
    train_autoencoder, AutoencoderConfig, AutoencoderModel, Gradients,
};

pub const N_STATES: usize = 60;
/// Length of a flattened transition matrix.
pub const FLAT_DIM: usize = N_STATES * N_STATES;

/// Relation of `p2` to the user's history and to `p1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    FirstEdit,
    ReeditConsecutive,
    ReeditNonconsecutive,
    NewWithin3Common,
    NewWithin3NoCommon,
    NewFarCommon,
    NewFarNoCommon,
    NewUnreachableCommon,
    NewUnreachableNoCommon,
    NewNullCategory,
}

impl Relation {
    pub const ALL: [Relation; 10] = [
        Relation::FirstEdit,
        Relation::ReeditConsecutive,
        Relation::ReeditNonconsecutive,
        Relation::NewWithin3Common,
        Relation::NewWithin3NoCommon,
        Relation::NewFarCommon,
        Relation::NewFarNoCommon,
        Relation::NewUnreachableCommon,
        Relation::NewUnreachableNoCommon,
        Relation::NewNullCategory,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Hop bucket and category overlap of a new-page relation.
    fn new_page_parts(self) -> Option<(Option<HopBucket>, CommonCats)> {
        use HopBucket::*;
        Some(match self {
            Relation::NewWithin3Common => (Some(Within3), CommonCats::AtLeastOne),
            Relation::NewWithin3NoCommon => (Some(Within3), CommonCats::None),
            Relation::NewFarCommon => (Some(MoreThan3), CommonCats::AtLeastOne),
            Relation::NewFarNoCommon => (Some(MoreThan3), CommonCats::None),
            Relation::NewUnreachableCommon => (Some(Unreachable), CommonCats::AtLeastOne),
            Relation::NewUnreachableNoCommon => (Some(Unreachable), CommonCats::None),
            Relation::NewNullCategory => (Some(Unreachable), CommonCats::NullInfo),
            _ => return None,
        })
    }
}

/// One of the 60 edit-pair states: `meta·30 + time·10 + relation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(u8);

impl StateId {
    pub fn new(meta: bool, time: TimeBucket, relation: Relation) -> Self {
        StateId((usize::from(meta) * 30 + time.index() * 10 + relation.index()) as u8)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < N_STATES).then_some(StateId(index as u8))
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn meta(self) -> bool {
        self.index() >= 30
    }

    pub fn time(self) -> TimeBucket {
        TimeBucket::ALL[(self.index() % 30) / 10]
    }

    pub fn relation(self) -> Relation {
        Relation::ALL[self.index() % 10]
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{:?}",
            if self.meta() { "meta" } else { "normal" },
            self.time(),
            self.relation()
        )
    }
}

/// State of a pair-feature row.
pub fn state_of(row: &PairFeatures) -> StateId {
    let relation = if row.is_first {
        Relation::FirstEdit
    } else if row.is_reedit {
        if row.same_page_consecutive {
            Relation::ReeditConsecutive
        } else {
            Relation::ReeditNonconsecutive
        }
    } else {
        let common = row.common_cats.unwrap_or(CommonCats::NullInfo);
        let hop = row.hop.unwrap_or(HopBucket::Unreachable);
        match (common, hop) {
            (CommonCats::NullInfo, _) => Relation::NewNullCategory,
            (CommonCats::AtLeastOne, HopBucket::Within3) => Relation::NewWithin3Common,
            (CommonCats::None, HopBucket::Within3) => Relation::NewWithin3NoCommon,
            (CommonCats::AtLeastOne, HopBucket::MoreThan3) => Relation::NewFarCommon,
            (CommonCats::None, HopBucket::MoreThan3) => Relation::NewFarNoCommon,
            (CommonCats::AtLeastOne, HopBucket::Unreachable) => Relation::NewUnreachableCommon,
            (CommonCats::None, HopBucket::Unreachable) => Relation::NewUnreachableNoCommon,
        }
    };
    StateId::new(row.is_meta2, row.time, relation)
}

/// A representative pair-feature row whose state is `index`.
pub fn decode(index: usize) -> Option<PairFeatures> {
    let state = StateId::from_index(index)?;
    let relation = state.relation();
    let (hop, common_cats) = match relation.new_page_parts() {
        Some((hop, cats)) => (hop, Some(cats)),
        None => (None, None),
    };
    let is_first = relation == Relation::FirstEdit;
    let is_reedit = matches!(
        relation,
        Relation::ReeditConsecutive | Relation::ReeditNonconsecutive
    );
    Some(PairFeatures {
        user_id: String::new(),
        p1: (!is_first).then(|| "p1".to_owned()),
        p2: if relation == Relation::ReeditConsecutive { "p1" } else { "p2" }.to_owned(),
        ts2: Utc.timestamp_opt(0, 0).unwrap(),
        is_meta2: state.meta(),
        time: state.time(),
        is_first,
        is_reedit,
        same_page_consecutive: relation == Relation::ReeditConsecutive,
        prev_reverted: None,
        hop,
        common_cats,
    })
}

/// A sparse vector: sorted `(index, value)` entries of a `dim`-length vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .collect();
        SparseVector {
            dim: values.len(),
            entries,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// Transition counts and row-normalized probabilities between states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    counts: Vec<u32>,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_states(states: &[StateId]) -> Self {
        let mut counts = vec![0u32; FLAT_DIM];
        for w in states.windows(2) {
            counts[w[0].index() * N_STATES + w[1].index()] += 1;
        }
        let mut probs = vec![0.0; FLAT_DIM];
        for i in 0..N_STATES {
            let row = &counts[i * N_STATES..(i + 1) * N_STATES];
            let total: u32 = row.iter().sum();
            if total > 0 {
                for (p, &c) in probs[i * N_STATES..(i + 1) * N_STATES].iter_mut().zip(row) {
                    *p = f64::from(c) / f64::from(total);
                }
            }
        }
        TransitionMatrix { counts, probs }
    }

    pub fn count(&self, from: usize, to: usize) -> u32 {
        self.counts[from * N_STATES + to]
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[from * N_STATES + to]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Probabilities flattened row-major.
    pub fn flattened(&self) -> &[f64] {
        &self.probs
    }

    pub fn sparse(&self) -> SparseVector {
        SparseVector::from_dense(&self.probs)
    }

    pub fn transitions(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Transition matrix over the first `k` rows of the log.
pub fn transition_matrix(log: &UserLog, k: Option<usize>) -> TransitionMatrix {
    let states: Vec<StateId> = log.prefix(k).iter().map(state_of).collect();
    TransitionMatrix::from_states(&states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairfeat::build_user_log;
    use crate::pairfeat::testutil::{edit, timeline};

    #[test]
    fn documented_state_indices() {
        let sentinel = decode(20).unwrap();
        assert!(sentinel.is_first && !sentinel.is_meta2);
        assert_eq!(StateId::new(false, TimeBucket::Slow, Relation::FirstEdit).index(), 20);
        assert_eq!(
            StateId::new(true, TimeBucket::VeryFast, Relation::ReeditConsecutive).index(),
            31
        );
        assert_eq!(
            StateId::new(false, TimeBucket::Fast, Relation::NewWithin3NoCommon).index(),
            14
        );
    }

    #[test]
    fn decode_round_trips_every_state() {
        for i in 0..N_STATES {
            assert_eq!(state_of(&decode(i).unwrap()).index(), i);
        }
        assert!(decode(N_STATES).is_none());
    }

    #[test]
    fn null_category_ignores_hop() {
        let mut row = decode(StateId::new(false, TimeBucket::Slow, Relation::NewNullCategory).index())
            .unwrap();
        for hop in [HopBucket::Within3, HopBucket::MoreThan3, HopBucket::Unreachable] {
            row.hop = Some(hop);
            assert_eq!(state_of(&row).relation(), Relation::NewNullCategory);
        }
    }

    #[test]
    fn alternating_sequence() {
        let a = StateId::from_index(3).unwrap();
        let b = StateId::from_index(40).unwrap();
        let c = StateId::from_index(59).unwrap();
        let m = TransitionMatrix::from_states(&[a, b, a, b]);
        assert_eq!(m.prob(3, 40), 1.0);
        assert_eq!(m.prob(40, 3), 1.0);
        assert_eq!(m.flattened().iter().filter(|p| **p != 0.0).count(), 2);
        let m = TransitionMatrix::from_states(&[a, b, a, c]);
        assert_eq!(m.prob(3, 40), 0.5);
        assert_eq!(m.prob(3, 59), 0.5);
    }

    #[test]
    fn single_row_gives_zero_matrix() {
        let log = build_user_log(&timeline(vec![edit("a", 0, false, None)]), None, None, false);
        let m = transition_matrix(&log, None);
        assert_eq!(m.transitions(), 0);
        assert!(m.flattened().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn truncation_uses_prefix_only() {
        let edits = vec![
            edit("a", 0, false, Some(&["x"])),
            edit("a", 60, false, None),
            edit("b", 2000, true, Some(&["x"])),
            edit("a", 2100, false, Some(&["x"])),
        ];
        let log = build_user_log(&timeline(edits), None, None, false);
        assert_eq!(transition_matrix(&log, Some(2)), transition_matrix(&log.truncated(2), None));
        assert_ne!(transition_matrix(&log, Some(2)), transition_matrix(&log, None));
        let states: Vec<usize> = log.rows.iter().map(|r| state_of(r).index()).collect();
        assert_eq!(states, vec![20, 1, 30 + 20 + 9, 2]);
    }

    #[test]
    fn sparse_round_trip() {
        let dense = vec![0.0, 0.25, 0.0, 0.75];
        let s = SparseVector::from_dense(&dense);
        assert_eq!(s.entries, vec![(1, 0.25), (3, 0.75)]);
        assert_eq!(s.to_dense(), dense);
    }
}
