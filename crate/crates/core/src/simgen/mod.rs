//! Synthetic labeled edit corpora drawn from class-conditional marginals.

mod params;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::corpus::{Corpus, EditRecord, HopGraph, Label, RevertRecord, UserLabel};
use crate::error::{Error, Result};
use crate::timefmt;

pub use self::params::{default_params, ClassParams, Drift, GeneratorParams, ParamSource, ReferenceTarget};

/// A generated corpus held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub edits: Vec<EditRecord>,
    pub labels: Vec<UserLabel>,
    pub links: Vec<(String, String)>,
    pub reverts: Vec<RevertRecord>,
}

/// Paths written by [`write_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFiles {
    pub edits: PathBuf,
    pub labels: PathBuf,
    pub links: PathBuf,
    pub reverts: PathBuf,
    pub params: PathBuf,
}

impl CorpusFiles {
    pub fn in_dir(dir: &Path) -> Self {
        CorpusFiles {
            edits: dir.join("edits.jsonl"),
            labels: dir.join("labels.csv"),
            links: dir.join("links.tsv"),
            reverts: dir.join("reverts.csv"),
            params: dir.join("params.json"),
        }
    }
}

impl GeneratedCorpus {
    /// Indexes the corpus, optionally with its revert data.
    pub fn to_corpus(&self, with_reverts: bool) -> Result<Corpus> {
        let graph = HopGraph::from_edges(self.links.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        Corpus::from_parts(
            self.edits.clone(),
            self.labels.clone(),
            Some(graph),
            with_reverts.then(|| self.reverts.clone()),
        )
    }
}

struct Page {
    id: String,
    meta: bool,
    categories: Option<BTreeSet<String>>,
}

struct UserOut {
    label: UserLabel,
    edits: Vec<EditRecord>,
    links: Vec<(String, String)>,
    reverts: Vec<RevertRecord>,
}

fn pick<const N: usize>(rng: &mut ChaCha8Rng, dist: &[f64; N]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding slack: fall back to the last bucket with mass
    dist.iter().rposition(|p| *p > 0.0).unwrap_or(N - 1)
}

fn add_months(start: DateTime<Utc>, months: u32) -> DateTime<Utc> {
    let total = start.year() * 12 + start.month0() as i32 + months as i32;
    Utc.with_ymd_and_hms(total.div_euclid(12), total.rem_euclid(12) as u32 + 1, 1, 0, 0, 0)
        .unwrap()
}

struct UserGen<'a> {
    user: String,
    cls: &'a ClassParams,
    rng: ChaCha8Rng,
    pages: Vec<Page>,
    links: Vec<(String, String)>,
    nodes: usize,
    cats: usize,
    limit: Option<usize>,
}

impl UserGen<'_> {
    fn node(&mut self, kind: char) -> Result<String> {
        self.nodes += 1;
        if let Some(limit) = self.limit {
            if self.nodes > limit {
                return Err(Error::Infeasible(format!(
                    "user {} needs more than {limit} pages and link intermediates; raise page_pool_limit",
                    self.user
                )));
            }
        }
        Ok(format!("{}-{kind}{}", self.user, self.nodes))
    }

    fn fresh_category(&mut self) -> String {
        self.cats += 1;
        format!("{}-c{}", self.user, self.cats)
    }

    fn categories(&mut self, meta: bool, prev: Option<usize>) -> Option<BTreeSet<String>> {
        let p_null = if meta {
            self.cls.p_null_category_meta
        } else {
            self.cls.p_null_category_normal
        };
        if self.rng.random_bool(p_null) {
            return None;
        }
        let mut set = BTreeSet::new();
        set.insert(self.fresh_category());
        let prev_cats = prev.and_then(|p| self.pages[p].categories.clone());
        if let Some(prev_cats) = prev_cats {
            if self.rng.random_bool(self.cls.p_common_category) {
                let shared: Vec<&String> = prev_cats.iter().collect();
                set.insert(shared[self.rng.random_range(0..shared.len())].clone());
            }
        }
        Some(set)
    }

    fn new_page(&mut self, meta: bool, prev: Option<usize>) -> Result<usize> {
        let id = self.node('p')?;
        let categories = self.categories(meta, prev);
        if let Some(p) = prev {
            let length = match pick(&mut self.rng, &self.cls.hop) {
                0 => Some(self.rng.random_range(1..=3)),
                1 => Some(self.rng.random_range(4..=5)),
                _ => None,
            };
            if let Some(length) = length {
                // The new page and every intermediate are fresh nodes, so no
                // earlier distance changes.
                let mut from = self.pages[p].id.clone();
                for _ in 1..length {
                    let mid = self.node('x')?;
                    self.links.push((from, mid.clone()));
                    from = mid;
                }
                self.links.push((from, id.clone()));
            }
        }
        self.pages.push(Page { id, meta, categories });
        Ok(self.pages.len() - 1)
    }
}

fn generate_user(params: &GeneratorParams, index: usize, label: Label) -> Result<UserOut> {
    let user = format!("u{index:06}");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64 + 1);
    let month = rng.random_range(0..params.span_months);
    let month_start = add_months(params.start, month);
    let month_secs = (add_months(params.start, month + 1) - month_start).num_seconds();
    let mut ts = month_start + Duration::seconds(rng.random_range(0..month_secs));
    let cls = match &params.drift {
        Some(d) if month >= d.from_month => match label {
            Label::Vandal => &d.vandal,
            Label::Benign => &d.benign,
        },
        _ => match label {
            Label::Vandal => &params.vandal,
            Label::Benign => &params.benign,
        },
    };
    let geometric = Geometric::new(1.0 / cls.mean_edits).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let n_edits = 1 + geometric.sample(&mut rng) as usize;

    let mut g = UserGen {
        user: user.clone(),
        cls,
        rng,
        pages: Vec::new(),
        links: Vec::new(),
        nodes: 0,
        cats: 0,
        limit: params.page_pool_limit,
    };
    let mut edits = Vec::with_capacity(n_edits);
    let mut reverts = Vec::new();
    let mut prev: Option<usize> = None;
    for _ in 0..n_edits {
        let page = match prev {
            None => {
                let meta = g.rng.random_bool(cls.p_first_meta);
                g.new_page(meta, None)?
            }
            Some(p) => {
                let gap = match pick(&mut g.rng, &cls.time_buckets) {
                    0 => g.rng.random_range(1..180),
                    1 => g.rng.random_range(180..900),
                    _ => g.rng.random_range(900..=params.max_slow_gap_secs),
                };
                ts += Duration::seconds(gap);
                if g.rng.random_bool(cls.p_reedit) {
                    let others = g.pages.len() - 1;
                    if others == 0 || g.rng.random_bool(cls.p_consecutive_given_reedit) {
                        p
                    } else {
                        let q = g.rng.random_range(0..others);
                        if q >= p {
                            q + 1
                        } else {
                            q
                        }
                    }
                } else {
                    let meta = g.rng.random_bool(cls.p_meta_edit);
                    g.new_page(meta, Some(p))?
                }
            }
        };
        let pg = &g.pages[page];
        edits.push(EditRecord {
            user_id: user.clone(),
            page_id: pg.id.clone(),
            title: if pg.meta {
                format!("Talk:{}", pg.id)
            } else {
                pg.id.clone()
            },
            ts,
            categories: pg.categories.clone(),
            is_meta: pg.meta,
            reverted: None,
            reverted_by_bot: None,
        });
        if g.rng.random_bool(cls.p_revert) {
            reverts.push(RevertRecord {
                user_id: user.clone(),
                page_id: pg.id.clone(),
                ts,
                reverted_by_bot: g.rng.random_bool(cls.p_revert_by_bot),
            });
        }
        prev = Some(page);
    }
    Ok(UserOut {
        label: UserLabel {
            user_id: user,
            label,
            registration_ts: None,
        },
        edits,
        links: g.links,
        reverts,
    })
}

/// Generates a corpus. Output depends only on `params`.
pub fn generate(params: &GeneratorParams) -> Result<GeneratedCorpus> {
    params.validate()?;
    let n = params.users_vandal + params.users_benign;
    let mut classes: Vec<Label> = std::iter::repeat_n(Label::Vandal, params.users_vandal)
        .chain(std::iter::repeat_n(Label::Benign, params.users_benign))
        .collect();
    classes.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let users: Vec<UserOut> = (0..n)
        .into_par_iter()
        .map(|i| generate_user(params, i, classes[i]))
        .collect::<Result<_>>()?;
    let mut out = GeneratedCorpus {
        edits: Vec::new(),
        labels: Vec::with_capacity(n),
        links: Vec::new(),
        reverts: Vec::new(),
    };
    for u in users {
        out.labels.push(u.label);
        out.edits.extend(u.edits);
        out.links.extend(u.links);
        out.reverts.extend(u.reverts);
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the corpus files and `params.json` into `dir`.
pub fn write_corpus(dir: &Path, corpus: &GeneratedCorpus, params: &GeneratorParams) -> Result<CorpusFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = CorpusFiles::in_dir(dir);
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p, e)
    };

    let mut w = create(&files.edits)?;
    for e in &corpus.edits {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(io(&files.edits))?;
    }
    w.flush().map_err(io(&files.edits))?;

    let mut w = csv::Writer::from_path(&files.labels)?;
    w.write_record(["user", "label", "registration_ts"])?;
    for l in &corpus.labels {
        let reg = l.registration_ts.as_ref().map(timefmt::format_utc).unwrap_or_default();
        w.write_record([l.user_id.as_str(), l.label.as_str(), reg.as_str()])?;
    }
    w.flush().map_err(io(&files.labels))?;

    let mut w = create(&files.links)?;
    writeln!(w, "src_page\tdst_page").map_err(io(&files.links))?;
    for (a, b) in &corpus.links {
        writeln!(w, "{a}\t{b}").map_err(io(&files.links))?;
    }
    w.flush().map_err(io(&files.links))?;

    let mut w = csv::Writer::from_path(&files.reverts)?;
    w.write_record(["user", "page", "ts", "reverted_by_bot"])?;
    for r in &corpus.reverts {
        w.write_record([
            r.user_id.as_str(),
            r.page_id.as_str(),
            timefmt::format_utc(&r.ts).as_str(),
            if r.reverted_by_bot { "true" } else { "false" },
        ])?;
    }
    w.flush().map_err(io(&files.reverts))?;

    std::fs::write(&files.params, params.to_json()? + "\n").map_err(io(&files.params))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::HopBucket;

    fn small(seed: u64) -> GeneratorParams {
        default_params().with_users(40, 40).with_seed(seed)
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(generate(&small(3)).unwrap(), generate(&small(3)).unwrap());
        assert_ne!(generate(&small(3)).unwrap(), generate(&small(4)).unwrap());
    }

    #[test]
    fn class_sizes_and_chronology() {
        let g = generate(&small(1)).unwrap();
        let vandals = g.labels.iter().filter(|l| l.label == Label::Vandal).count();
        assert_eq!((vandals, g.labels.len()), (40, 80));
        for w in g.edits.windows(2) {
            if w[0].user_id == w[1].user_id {
                assert!(w[1].ts > w[0].ts);
            }
        }
    }

    #[test]
    fn drawn_hops_match_graph_distances() {
        let mut p = small(2);
        p.vandal.p_reedit = 0.0;
        p.benign.p_reedit = 0.0;
        let g = generate(&p).unwrap();
        let corpus = g.to_corpus(false).unwrap();
        let graph = corpus.graph().unwrap();
        let mut seen = [0usize; 3];
        for t in corpus.timelines() {
            for w in t.edits.windows(2) {
                let b = graph.hop_bucket(&w[0].page_id, &w[1].page_id);
                seen[match b {
                    HopBucket::Within3 => 0,
                    HopBucket::MoreThan3 => 1,
                    HopBucket::Unreachable => 2,
                }] += 1;
                // reversed direction is never linked
                assert_eq!(graph.hop_bucket(&w[1].page_id, &w[0].page_id), HopBucket::Unreachable);
            }
        }
        assert!(seen.iter().all(|&c| c > 0), "{seen:?}");
    }

    #[test]
    fn page_pool_limit_is_enforced() {
        let mut p = small(5);
        p.page_pool_limit = Some(2);
        assert!(matches!(generate(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = small(0);
        p.vandal.time_buckets = [0.5, 0.5, 0.5];
        assert!(matches!(generate(&p), Err(Error::InvalidParam(_))));
        let mut p = small(0);
        p.benign.p_reedit = 1.5;
        assert!(generate(&p).is_err());
    }

    #[test]
    fn params_json_round_trips() {
        let p = default_params();
        assert_eq!(GeneratorParams::from_json(&p.to_json().unwrap()).unwrap(), p);
        assert!(p.sources.contains_key("vandal.p_first_meta"));
        assert!(p.sources.values().all(|v| !v.denominator.is_empty()));
    }
}
