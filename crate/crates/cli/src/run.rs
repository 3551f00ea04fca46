use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;
use vews_core::corpus::stats::behavior_stats_from_logs;
use vews_core::eval::{
    audit_leakage, compare_reports, feature_matrix, fit_pipeline, summary_table, write_report_csv,
    write_report_json, FeatureTable, DEFAULT_KS,
};
use vews_core::pairfeat::write_edit_pairs;
use vews_core::simgen::{write_corpus, CorpusFiles};
use vews_core::timefmt::parse_month;
use vews_core::wtpm::train_autoencoder;
use vews_core::wvb::feature_importance;
use vews_core::wvb::write_wvb_csv;
use vews_core::{
    corpus_logs, default_params, generate, load_corpus, Corpus, Dataset, EvalConfig, FeatureMode, GeneratorParams,
    Protocol,
};

use crate::args::{
    Cli, Command, EvaluateArgs, FeaturizeArgs, ImportanceArgs, InputArgs, ProtocolName, SimulateArgs, TrainArgs,
    DEFAULT_OUT,
};
use crate::manifest::Manifest;

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// What a command produced, for the manifest.
struct Produced {
    command: Command,
    resolved: serde_json::Value,
    outputs: Vec<String>,
}

pub fn run(cli: &Cli) -> Outcome {
    let (command, out) = match &cli.command {
        Command::Rerun(r) => {
            let m = Manifest::read(&r.manifest).map_err(Failure::Data)?;
            let out = cli.out.clone().unwrap_or(m.out);
            (m.command, out)
        }
        c => (c.clone(), cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))),
    };
    let out = std::path::absolute(&out)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let produced = match &command {
        Command::Validate(a) => validate(a, &out)?,
        Command::Stats(a) => stats(a, &out)?,
        Command::Featurize(a) => featurize(a, &out)?,
        Command::Train(a) => train(a, &out)?,
        Command::Evaluate(a) => evaluate(a, &out)?,
        Command::Simulate(a) => simulate(a, &out)?,
        Command::Importance(a) => importance(a, &out)?,
        Command::Rerun(_) => return Err(Failure::Usage("a manifest cannot record a rerun".into())),
    };
    let manifest = Manifest::new(&out, produced.command, produced.resolved, produced.outputs);
    let path = manifest.write()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load(input: &InputArgs, out: &Path) -> anyhow::Result<(Corpus, InputArgs)> {
    let inputs = input.resolve(out)?;
    let corpus = load_corpus(&inputs.edits, &inputs.labels, inputs.links.as_deref(), inputs.reverts.as_deref())?;
    for w in &corpus.summary().warnings {
        log::warn!("{w}");
    }
    Ok((corpus, InputArgs::from(&inputs)))
}

fn create(out: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = out.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: serde::Serialize>(out: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let path = out.join(name);
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn validate(a: &InputArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    let (corpus, input) = load(a, out)?;
    let s = corpus.summary();
    write_json(out, "validation.json", s)?;
    say!(
        "{} users ({} vandal, {} benign, {} unlabeled), {} edits, graph {} nodes / {} edges, reverts {}, {} warnings",
        s.users,
        s.vandals,
        s.benign,
        s.unlabeled,
        s.edits,
        s.graph_nodes,
        s.graph_edges,
        if s.reverts_loaded { "loaded" } else { "absent" },
        s.warnings.len()
    );
    Ok(Produced {
        command: Command::Validate(input),
        resolved: json!({}),
        outputs: vec!["validation.json".into()],
    })
}

fn stats(a: &InputArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    let (corpus, input) = load(a, out)?;
    let logs = corpus_logs(&corpus);
    let report = behavior_stats_from_logs(&corpus, &logs);
    write_json(out, "stats.json", &report)?;
    say!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Produced {
        command: Command::Stats(input),
        resolved: json!({}),
        outputs: vec!["stats.json".into()],
    })
}

fn featurize(a: &FeaturizeArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    let (corpus, input) = load(&a.input, out)?;
    let ds = Dataset::from_corpus(&corpus);
    let table = FeatureTable::build(&ds, a.features, a.k)?;
    let ae_config = a.fit.autoencoder();
    let mut outputs = Vec::new();
    let ae = match &table.tpm {
        Some(tpm) => {
            let ae = train_autoencoder(tpm, ae_config, a.fit.seed)?;
            ae.save(&out.join("autoencoder.json"))?;
            outputs.push("autoencoder.json".to_owned());
            Some(ae)
        }
        None => None,
    };
    let x = feature_matrix(&table, ae.as_ref())?;
    let names = a.features.feature_names(ae_config.hidden);
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let file = format!("features-{}.csv", a.features);
    let rows = (0..ds.len()).map(|i| (ds.user_ids[i].clone(), x.row(i).to_vec(), Some(ds.labels[i])));
    write_wvb_csv(create(out, &file)?, &names, rows)?;
    outputs.push(file);
    if a.pairs {
        write_edit_pairs(create(out, "edit_pairs.csv")?, &ds.logs)?;
        outputs.push("edit_pairs.csv".to_owned());
    }
    say!("{} users x {} features -> {}", ds.len(), names.len(), out.display());
    let mut cmd = a.clone();
    cmd.input = input;
    Ok(Produced {
        command: Command::Featurize(cmd),
        resolved: json!({ "features": a.features, "k": a.k, "autoencoder": ae_config, "seed": a.fit.seed }),
        outputs,
    })
}

fn eval_config(features: FeatureMode, fit: &crate::args::FitArgs, folds: usize) -> EvalConfig {
    let mut cfg = EvalConfig::new(features, fit.model, fit.seed);
    cfg.autoencoder = fit.autoencoder();
    cfg.model_config = fit.model_config();
    cfg.folds = folds;
    cfg
}

fn train(a: &TrainArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    let (corpus, input) = load(&a.input, out)?;
    let ds = Dataset::from_corpus(&corpus);
    let cfg = eval_config(a.features, &a.fit, 10);
    let fitted = fit_pipeline(&ds, &cfg, a.k)?;
    let mut outputs = vec!["model.json".to_owned()];
    fitted.model.save(&out.join("model.json"))?;
    if let Some(ae) = &fitted.autoencoder {
        ae.save(&out.join("autoencoder.json"))?;
        outputs.push("autoencoder.json".to_owned());
    }
    write_json(out, "features.json", &fitted.feature_names)?;
    outputs.push("features.json".to_owned());
    say!("trained {} on {} users ({} features) -> {}", cfg.model, ds.len(), fitted.feature_names.len(), out.display());
    let mut cmd = a.clone();
    cmd.input = input;
    Ok(Produced {
        command: Command::Train(cmd),
        resolved: json!({ "config": cfg, "k": a.k }),
        outputs,
    })
}

fn protocol_of(a: &EvaluateArgs) -> std::result::Result<Protocol, Failure> {
    Ok(match a.protocol {
        ProtocolName::Cv10 => Protocol::Cv10,
        ProtocolName::Temporal => Protocol::Temporal { window: a.window },
        ProtocolName::Window => Protocol::Window {
            test_month: a
                .test_month
                .as_deref()
                .map(parse_month)
                .transpose()
                .map_err(|e| Failure::Usage(format!("--test-month: {e}")))?,
            n_max: a.n_max,
        },
        ProtocolName::FirstK => Protocol::FirstK {
            ks: if a.ks.is_empty() { DEFAULT_KS.to_vec() } else { a.ks.clone() },
        },
    })
}

fn evaluate(a: &EvaluateArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    if a.features.is_empty() {
        return Err(Failure::Usage("--features needs at least one mode".into()));
    }
    let protocol = protocol_of(a)?;
    let (corpus, input) = load(&a.input, out)?;
    if !corpus.reverts_loaded() {
        if let Some(m) = a.features.iter().find(|m| m.needs_reverts()) {
            return Err(Failure::Data(anyhow::anyhow!(
                "feature mode {m} splits behavior by reverts, but no revert data was given; pass --reverts FILE or use {}",
                m.as_str().trim_end_matches("_wr")
            )));
        }
    }
    let ds = Dataset::from_corpus(&corpus);
    let mut outputs = Vec::new();
    let mut reports = Vec::new();
    let mut configs = Vec::new();
    for &mode in &a.features {
        let cfg = eval_config(mode, &a.fit, a.folds);
        let report = vews_core::eval::evaluate(&ds, &cfg, &protocol)?;
        let stem = format!("report-{}-{}-{}", protocol.name(), mode, cfg.model);
        write_report_json(create(out, &format!("{stem}.json"))?, &report)?;
        write_report_csv(create(out, &format!("{stem}.csv"))?, &report)?;
        let table = summary_table(&report);
        std::fs::write(out.join(format!("{stem}.txt")), &table)?;
        outputs.extend(["json", "csv", "txt"].map(|ext| format!("{stem}.{ext}")));
        say!("{}", table.trim_end());
        if a.audit {
            let audit = audit_leakage(&ds, &cfg, &protocol)?;
            let name = format!("audit-{}-{}-{}.json", protocol.name(), mode, cfg.model);
            write_json(out, &name, &audit)?;
            outputs.push(name);
            say!(
                "leakage audit: {} ({} splits, {} mismatches)",
                if audit.passed() { "passed" } else { "FAILED" },
                audit.splits_checked,
                audit.mismatches.len()
            );
        }
        configs.push(cfg);
        reports.push(report);
    }
    if reports.len() > 1 {
        let mut pairs = Vec::new();
        for i in 0..reports.len() {
            for j in i + 1..reports.len() {
                let tests = compare_reports(&reports[i], &reports[j])?;
                for (point, t) in &tests {
                    say!(
                        "mcnemar {} vs {} [{point}]: b={} c={} p={:.4}",
                        reports[i].feature_mode, reports[j].feature_mode, t.b, t.c, t.p_value
                    );
                }
                pairs.push(json!({
                    "a": reports[i].feature_mode,
                    "b": reports[j].feature_mode,
                    "tests": tests,
                }));
            }
        }
        let name = format!("mcnemar-{}.json", protocol.name());
        write_json(out, &name, &pairs)?;
        outputs.push(name);
    }
    let mut cmd = a.clone();
    cmd.input = input;
    Ok(Produced {
        command: Command::Evaluate(cmd),
        resolved: json!({ "protocol": protocol, "configs": configs, "users": ds.len() }),
        outputs,
    })
}

fn simulate(a: &SimulateArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    let mut params: GeneratorParams = match &a.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GeneratorParams::from_json(&text)?
        }
        None => default_params(),
    };
    if let Some(n) = a.users {
        if n < 2 {
            return Err(Failure::Usage("--users must be at least 2".into()));
        }
        params = params.with_users(n / 2, n - n / 2);
    }
    if let Some(s) = a.seed {
        params = params.with_seed(s);
    }
    let corpus = generate(&params)?;
    let files = write_corpus(out, &corpus, &params)?;
    say!(
        "{} vandal + {} benign users, {} edits -> {}",
        params.users_vandal,
        params.users_benign,
        corpus.edits.len(),
        out.display()
    );
    let CorpusFiles { edits, labels, links, reverts, params: pfile } = files;
    let outputs = [edits, labels, links, reverts, pfile]
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let mut cmd = a.clone();
    cmd.params = a.params.clone().map(std::path::absolute).transpose()?;
    Ok(Produced {
        command: Command::Simulate(cmd),
        resolved: serde_json::to_value(&params)?,
        outputs,
    })
}

fn importance(a: &ImportanceArgs, out: &Path) -> std::result::Result<Produced, Failure> {
    if a.features.uses_wtpm() {
        return Err(Failure::Usage(format!(
            "importance ranks hand-crafted features only (wvb or wvb_wr), not {}",
            a.features
        )));
    }
    let (corpus, input) = load(&a.input, out)?;
    let ds = Dataset::from_corpus(&corpus);
    let table = FeatureTable::build(&ds, a.features, a.k)?;
    let imp = feature_importance(&table.wvb, &ds.labels, a.trees, a.seed)?.with_names(&a.features.wvb_names());
    write_json(out, "importance.json", &imp)?;
    for (rank, f) in imp.ranked.iter().enumerate() {
        say!("{:>2}. {:<10} {:.4} ± {:.4}", rank + 1, f.name.as_deref().unwrap_or("?"), f.mean, f.std);
    }
    let mut cmd = a.clone();
    cmd.input = input;
    Ok(Produced {
        command: Command::Importance(cmd),
        resolved: json!({ "features": a.features, "k": a.k, "trees": a.trees, "seed": a.seed }),
        outputs: vec!["importance.json".into()],
    })
}
