use std::collections::BTreeMap;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timefmt;

/// Behavior of one class. Every edit's attributes are drawn independently
/// given the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    /// Mean of the edits-per-user distribution (`1 + Geometric`).
    pub mean_edits: f64,
    pub p_first_meta: f64,
    pub p_reedit: f64,
    /// Share of re-edits that repeat the immediately preceding page.
    pub p_consecutive_given_reedit: f64,
    /// Meta-page probability for each newly edited page after the first.
    pub p_meta_edit: f64,
    /// Gap distribution over `[very_fast, fast, slow]`.
    pub time_buckets: [f64; 3],
    /// Probability that a normal page has no category information.
    pub p_null_category_normal: f64,
    /// Probability that a meta page has no category information.
    pub p_null_category_meta: f64,
    /// Probability that a new page shares a category with the previous page,
    /// when both carry categories.
    pub p_common_category: f64,
    /// Hop distance from the previous page over `[within_3, more_than_3, unreachable]`.
    pub hop: [f64; 3],
    /// Probability that an edit is reverted by someone else.
    pub p_revert: f64,
    /// Share of reverts made by a bot.
    pub p_revert_by_bot: f64,
}

impl ClassParams {
    fn validate(&self, class: &str) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(format!("{class}: {m}")));
        let probs = [
            ("p_first_meta", self.p_first_meta),
            ("p_reedit", self.p_reedit),
            ("p_consecutive_given_reedit", self.p_consecutive_given_reedit),
            ("p_meta_edit", self.p_meta_edit),
            ("p_null_category_normal", self.p_null_category_normal),
            ("p_null_category_meta", self.p_null_category_meta),
            ("p_common_category", self.p_common_category),
            ("p_revert", self.p_revert),
            ("p_revert_by_bot", self.p_revert_by_bot),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        for (name, dist) in [("time_buckets", self.time_buckets), ("hop", self.hop)] {
            if dist.iter().any(|p| !(0.0..=1.0).contains(p)) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("{name} must be a distribution summing to 1"));
            }
        }
        if !(self.mean_edits >= 1.0 && self.mean_edits.is_finite()) {
            return bad(format!("mean_edits = {} must be at least 1", self.mean_edits));
        }
        Ok(())
    }
}

/// Alternate behavior for users whose first edit falls in or after `from_month`
/// (months counted from the corpus start).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub from_month: u32,
    pub vandal: ClassParams,
    pub benign: ClassParams,
}

/// Where a default value comes from and what it is a rate of.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSource {
    pub source: String,
    pub denominator: String,
}

/// A published statistic the generator does not target directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTarget {
    pub vandal: f64,
    pub benign: f64,
    pub source: String,
    pub denominator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub seed: u64,
    pub users_vandal: usize,
    pub users_benign: usize,
    #[serde(with = "timefmt::serde_utc")]
    pub start: DateTime<Utc>,
    /// First edits fall uniformly in this many calendar months from `start`.
    pub span_months: u32,
    /// Upper bound on pages plus link intermediates per user.
    pub page_pool_limit: Option<usize>,
    /// Upper end of the slow gap range, in seconds.
    pub max_slow_gap_secs: i64,
    pub vandal: ClassParams,
    pub benign: ClassParams,
    pub drift: Option<Drift>,
    #[serde(default)]
    pub sources: BTreeMap<String, ParamSource>,
    #[serde(default)]
    pub reference_targets: BTreeMap<String, ReferenceTarget>,
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        self.vandal.validate("vandal")?;
        self.benign.validate("benign")?;
        if let Some(d) = &self.drift {
            d.vandal.validate("drift.vandal")?;
            d.benign.validate("drift.benign")?;
        }
        if self.span_months == 0 {
            return Err(Error::InvalidParam("span_months must be positive".into()));
        }
        if self.max_slow_gap_secs < 900 {
            return Err(Error::InvalidParam("max_slow_gap_secs must be at least 900".into()));
        }
        Ok(())
    }

    /// Sets both class sizes.
    pub fn with_users(mut self, vandal: usize, benign: usize) -> Self {
        self.users_vandal = vandal;
        self.users_benign = benign;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: GeneratorParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

fn prov(source: &str, denominator: &str) -> ParamSource {
    ParamSource {
        source: source.to_owned(),
        denominator: denominator.to_owned(),
    }
}

/// Calibrated defaults: 1000 users per class, seed 0, first edits spread over
/// April 2013 to July 2014.
pub fn default_params() -> GeneratorParams {
    let vandal = ClassParams {
        mean_edits: 9.4,
        p_first_meta: 0.1034,
        p_reedit: 0.614,
        p_consecutive_given_reedit: 0.65,
        p_meta_edit: 0.2157,
        time_buckets: [0.20, 0.15, 0.65],
        p_null_category_normal: 0.05,
        p_null_category_meta: 0.85,
        p_common_category: 0.4,
        hop: [0.55, 0.15, 0.30],
        p_revert: 0.3436,
        p_revert_by_bot: 0.3,
    };
    let benign = ClassParams {
        mean_edits: 36.8,
        p_first_meta: 0.6477,
        p_reedit: 0.6971,
        p_consecutive_given_reedit: 0.6,
        p_meta_edit: 0.4072,
        time_buckets: [0.16, 0.1379, 0.7021],
        p_null_category_normal: 0.05,
        p_null_category_meta: 0.85,
        p_common_category: 0.4,
        hop: [0.55, 0.15, 0.30],
        p_revert: 0.048,
        p_revert_by_bot: 0.3,
    };
    let mut sources = BTreeMap::new();
    for class in ["vandal", "benign"] {
        let published = |what: &str| format!("published {class} statistic: {what}");
        let assumed = |what: &str| format!("assumed (not published): {what}");
        let entries = [
            (
                "mean_edits",
                published(if class == "vandal" {
                    "160,651 edits over 17,027 vandals"
                } else {
                    "609,389 edits over 16,549 benign users"
                }),
                "edits per user",
            ),
            ("p_first_meta", published("first edit on a meta-page"), "users (first edit)"),
            ("p_reedit", published("re-edit versus new-page edit"), "edits after the first"),
            (
                "p_consecutive_given_reedit",
                assumed("share of re-edits on the immediately preceding page"),
                "re-edits",
            ),
            (
                "p_meta_edit",
                published("share of all edits on meta-pages, applied to each new page"),
                "new pages after the first",
            ),
            (
                "time_buckets",
                published("share of edits within 15 minutes of the previous edit; the very fast/fast split is assumed"),
                "edits after the first",
            ),
            (
                "p_null_category_normal",
                assumed("missing categories are rare on normal pages"),
                "normal pages",
            ),
            (
                "p_null_category_meta",
                assumed("missing categories mostly occur on meta-pages"),
                "meta pages",
            ),
            (
                "p_common_category",
                assumed("shaped after the navigation breakdown of successive pages"),
                "new-page pairs with category information",
            ),
            (
                "hop",
                assumed("shaped after the navigation breakdown of successive pages"),
                "new-page pairs",
            ),
            (
                "p_revert",
                published("re-edits whose previous edit on the page was reverted, applied per edit"),
                "edits",
            ),
            ("p_revert_by_bot", assumed("share of reverts made by bots"), "reverted edits"),
        ];
        for (key, source, denominator) in entries {
            sources.insert(format!("{class}.{key}"), prov(&source, denominator));
        }
    }
    let mut reference_targets = BTreeMap::new();
    reference_targets.insert(
        "crmv".to_owned(),
        ReferenceTarget {
            vandal: 0.0988,
            benign: 0.5313,
            source: "published share of users re-editing the same meta-page within 3 minutes".into(),
            denominator: "users".into(),
        },
    );
    reference_targets.insert(
        "ntus".to_owned(),
        ReferenceTarget {
            vandal: 0.0766,
            benign: 0.5482,
            source: "published share of users slowly editing a new page within 3 hops with unknown category".into(),
            denominator: "users".into(),
        },
    );
    GeneratorParams {
        seed: 0,
        users_vandal: 1000,
        users_benign: 1000,
        start: Utc.with_ymd_and_hms(2013, 4, 1, 0, 0, 0).unwrap(),
        span_months: 16,
        page_pool_limit: None,
        max_slow_gap_secs: 3 * 24 * 3600,
        vandal,
        benign,
        drift: None,
        sources,
        reference_targets,
    }
}
