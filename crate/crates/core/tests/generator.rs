use std::collections::{BTreeSet, HashMap, HashSet};

use vews_core::corpus::RevertRecord;
use vews_core::eval::{evaluate, EvalConfig, FeatureMode, Protocol};
use vews_core::pairfeat::CommonCats;
use vews_core::simgen::{write_corpus, ClassParams, CorpusFiles, Drift, GeneratedCorpus};
use vews_core::{corpus_logs, default_params, generate, load_corpus, HopBucket, Label, ModelKind, TimeBucket};

/// Successes and trials for one Bernoulli parameter.
#[derive(Default, Clone, Copy)]
struct Tally {
    hits: u64,
    n: u64,
}

impl Tally {
    fn add(&mut self, hit: bool) {
        self.hits += u64::from(hit);
        self.n += 1;
    }

    fn assert_near(&self, p: f64, what: &str) {
        assert!(self.n >= 10_000, "{what}: only {} draws", self.n);
        let rate = self.hits as f64 / self.n as f64;
        let band = 4.0 * (p * (1.0 - p) / self.n as f64).sqrt();
        assert!((rate - p).abs() <= band, "{what}: {rate:.4} vs {p:.4} (band {band:.4}, n {})", self.n);
    }
}

#[derive(Default)]
struct ClassTallies {
    first_meta: Tally,
    reedit: Tally,
    consecutive: Tally,
    meta_new: Tally,
    time: [Tally; 3],
    null_normal: Tally,
    null_meta: Tally,
    common: Tally,
    hop: [Tally; 3],
    revert: Tally,
    bot: Tally,
    lengths: Vec<f64>,
}

fn tally(corpus: &GeneratedCorpus) -> HashMap<Label, ClassTallies> {
    let c = corpus.to_corpus(true).unwrap();
    let logs = corpus_logs(&c);
    let cats: HashMap<&str, bool> =
        corpus.edits.iter().map(|e| (e.page_id.as_str(), e.categories.is_some())).collect();
    let reverted: HashSet<(&str, &str, i64)> = corpus
        .reverts
        .iter()
        .map(|r: &RevertRecord| (r.user_id.as_str(), r.page_id.as_str(), r.ts.timestamp()))
        .collect();
    let mut out: HashMap<Label, ClassTallies> = HashMap::new();
    for (i, log) in logs.iter().enumerate() {
        let t = out.entry(c.label(i).unwrap()).or_default();
        t.lengths.push(log.rows.len() as f64);
        let mut pages = BTreeSet::new();
        for r in &log.rows {
            if r.is_first {
                t.first_meta.add(r.is_meta2);
            } else {
                for (b, bucket) in [TimeBucket::VeryFast, TimeBucket::Fast, TimeBucket::Slow].into_iter().enumerate() {
                    t.time[b].add(r.time == bucket);
                }
                t.reedit.add(r.is_reedit);
                if r.is_reedit && pages.len() > 1 {
                    t.consecutive.add(r.same_page_consecutive);
                }
                if !r.is_reedit {
                    t.meta_new.add(r.is_meta2);
                    let has = cats[r.p2.as_str()];
                    if r.is_meta2 {
                        t.null_meta.add(!has);
                    } else {
                        t.null_normal.add(!has);
                    }
                    let hop = r.hop.unwrap();
                    for (b, bucket) in [HopBucket::Within3, HopBucket::MoreThan3, HopBucket::Unreachable]
                        .into_iter()
                        .enumerate()
                    {
                        t.hop[b].add(hop == bucket);
                    }
                    let prev_has = r.p1.as_deref().is_some_and(|p| cats[p]);
                    if has && prev_has {
                        t.common.add(r.common_cats == Some(CommonCats::AtLeastOne));
                    }
                }
            }
            pages.insert(r.p2.clone());
        }
    }
    for e in &corpus.edits {
        let label = c.label(c.user_index(&e.user_id).unwrap()).unwrap();
        let t = out.get_mut(&label).unwrap();
        t.revert.add(reverted.contains(&(e.user_id.as_str(), e.page_id.as_str(), e.ts.timestamp())));
    }
    for r in &corpus.reverts {
        let label = c.label(c.user_index(&r.user_id).unwrap()).unwrap();
        out.get_mut(&label).unwrap().bot.add(r.reverted_by_bot);
    }
    out
}

fn check_class(t: &ClassTallies, p: &ClassParams, name: &str) {
    t.first_meta.assert_near(p.p_first_meta, &format!("{name} first meta"));
    t.reedit.assert_near(p.p_reedit, &format!("{name} re-edit"));
    t.consecutive.assert_near(p.p_consecutive_given_reedit, &format!("{name} consecutive re-edit"));
    t.meta_new.assert_near(p.p_meta_edit, &format!("{name} meta new page"));
    for b in 0..3 {
        t.time[b].assert_near(p.time_buckets[b], &format!("{name} time bucket {b}"));
        t.hop[b].assert_near(p.hop[b], &format!("{name} hop bucket {b}"));
    }
    t.null_normal.assert_near(p.p_null_category_normal, &format!("{name} null category (normal)"));
    t.common.assert_near(p.p_common_category, &format!("{name} common category"));
    t.revert.assert_near(p.p_revert, &format!("{name} revert"));
    let n = t.lengths.len() as f64;
    let mean = t.lengths.iter().sum::<f64>() / n;
    let q = 1.0 / p.mean_edits;
    let band = 4.0 * ((1.0 - q) / (q * q) / n).sqrt();
    assert!((mean - p.mean_edits).abs() <= band, "{name} mean edits {mean:.3} vs {}", p.mean_edits);
}

#[test]
fn empirical_rates_sit_within_four_sigma() {
    let params = default_params().with_users(10_000, 10_000).with_seed(21);
    let corpus = generate(&params).unwrap();
    let tallies = tally(&corpus);
    check_class(&tallies[&Label::Vandal], &params.vandal, "vandal");
    check_class(&tallies[&Label::Benign], &params.benign, "benign");
    let mut meta = tallies[&Label::Vandal].null_meta;
    meta.hits += tallies[&Label::Benign].null_meta.hits;
    meta.n += tallies[&Label::Benign].null_meta.n;
    meta.assert_near(params.benign.p_null_category_meta, "null category (meta)");
    let mut bot = tallies[&Label::Vandal].bot;
    bot.hits += tallies[&Label::Benign].bot.hits;
    bot.n += tallies[&Label::Benign].bot.n;
    bot.assert_near(params.vandal.p_revert_by_bot, "bot reverts");
}

#[test]
fn first_edit_meta_rates_match_targets() {
    let params = default_params().with_users(10_000, 10_000).with_seed(22);
    let ds = vews_core::Dataset::from_corpus(&generate(&params).unwrap().to_corpus(false).unwrap());
    for (label, target) in [(Label::Benign, 0.6477), (Label::Vandal, 0.1034)] {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == label).collect();
        let fm = idx.iter().filter(|&&i| ds.logs[i].rows[0].is_meta2).count() as f64 / idx.len() as f64;
        assert!((fm - target).abs() <= 0.02, "{label:?}: {fm}");
    }
}

#[test]
fn written_corpus_loads_without_warnings() {
    let params = default_params().with_users(300, 300).with_seed(23);
    let corpus = generate(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files: CorpusFiles = write_corpus(dir.path(), &corpus, &params).unwrap();
    let loaded = load_corpus(&files.edits, &files.labels, Some(&files.links), Some(&files.reverts)).unwrap();
    let s = loaded.summary();
    assert!(s.warnings.is_empty(), "{:?}", s.warnings);
    assert_eq!(s.edits, corpus.edits.len());
    assert_eq!((s.vandals, s.benign), (300, 300));
    let direct = corpus.to_corpus(true).unwrap();
    assert_eq!(corpus_logs(&loaded), corpus_logs(&direct));
    let text = std::fs::read_to_string(&files.params).unwrap();
    assert_eq!(vews_core::GeneratorParams::from_json(&text).unwrap(), params);
}

#[test]
fn drift_favors_recent_training_data() {
    let mut params = default_params().with_users(2_000, 2_000).with_seed(24);
    params.drift = Some(Drift {
        from_month: 12,
        vandal: params.benign.clone(),
        benign: params.vandal.clone(),
    });
    let ds = vews_core::Dataset::from_corpus(&generate(&params).unwrap().to_corpus(false).unwrap());
    let cfg = EvalConfig::new(FeatureMode::Wvb, ModelKind::Svm, 24);
    let report = evaluate(&ds, &cfg, &Protocol::Window { test_month: None, n_max: 12 }).unwrap();
    let acc = |n: u32| {
        report
            .points
            .iter()
            .find(|p| p.key.n == Some(n))
            .and_then(|p| p.metrics)
            .and_then(|m| m.accuracy)
            .unwrap()
    };
    // Only the last four months follow the swapped behavior, so a long window
    // is dominated by months where the classes look the other way round.
    assert!(acc(3) > acc(12) + 0.1, "n=3 {:.3} vs n=12 {:.3}", acc(3), acc(12));
}
