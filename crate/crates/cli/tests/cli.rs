use std::path::Path;
use std::process::{Command, Output};

fn vews(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vews"))
        .args(args)
        .env("VEWS_OUT", out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(out: &Path, users: &str) {
    let o = vews(out, &["simulate", "--users", users, "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn simulate_then_evaluate_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "1000");
    let o = vews(
        dir.path(),
        &["evaluate", "--protocol", "cv10", "--features", "vews", "--model", "svm", "--seed", "7", "--hidden", "16", "--epochs", "2"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("report-cv10-vews-svm.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let acc = v["points"][0]["metrics"]["accuracy"].as_f64().unwrap();
    assert!((0.5..=1.0).contains(&acc), "accuracy {acc}");
    assert!(dir.path().join("manifest-evaluate.json").is_file());
}

#[test]
fn revert_modes_without_reverts_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "100");
    let o = vews(dir.path(), &["evaluate", "--features", "vews_wr"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--reverts"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&vews(dir.path(), &["evaluate", "--no-such-flag"])), 1);
    assert_eq!(code(&vews(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&vews(dir.path(), &["evaluate", "--features", "nope"])), 1);
    assert_eq!(code(&vews(dir.path(), &[])), 1);
    assert_eq!(code(&vews(dir.path(), &["--help"])), 0);
    assert_eq!(code(&vews(dir.path(), &["--version"])), 0);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = vews(dir.path(), &["validate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("edits.jsonl"), "{}", stderr(&o));
}

#[test]
fn rerun_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "200");
    let o = vews(
        dir.path(),
        &["evaluate", "--features", "wvb,wtpm", "--hidden", "8", "--epochs", "2", "--folds", "5"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let again = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest-evaluate.json");
    let o = vews(again.path(), &["rerun", manifest.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in [
        "report-cv10-wvb-svm.json",
        "report-cv10-wtpm-svm.json",
        "report-cv10-wtpm-svm.csv",
        "mcnemar-cv10.json",
    ] {
        let a = std::fs::read(dir.path().join(name)).unwrap();
        let b = std::fs::read(again.path().join(name)).unwrap();
        assert!(a == b, "{name} differs after rerun");
    }
}

#[test]
fn jobs_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "200");
    let run = |jobs: &str, sub: &str| {
        let out = dir.path().join(sub);
        let data = dir.path().to_str().unwrap().to_owned();
        let o = vews(
            &out,
            &["evaluate", "--data", &data, "--features", "vews", "--hidden", "8", "--epochs", "2", "--jobs", jobs],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(out.join("report-cv10-vews-svm.json")).unwrap()
    };
    assert!(run("1", "one") == run("3", "three"));
}

#[test]
fn every_subcommand_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "200");
    let runs: [&[&str]; 6] = [
        &["validate"],
        &["stats"],
        &["featurize", "--features", "vews", "--hidden", "4", "--epochs", "1", "--pairs"],
        &["train", "--features", "wvb", "--model", "dtree"],
        &["importance", "--trees", "20"],
        &["evaluate", "--protocol", "temporal", "--features", "wvb"],
    ];
    for args in runs {
        let o = vews(dir.path(), args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        let name = format!("manifest-{}.json", args[0]);
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(&name)).unwrap()).unwrap();
        assert_eq!(m["command"]["command"], args[0]);
        for f in m["outputs"].as_array().unwrap() {
            assert!(dir.path().join(f.as_str().unwrap()).is_file(), "{name} lists missing {f}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("features-vews.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("user_id,crs,"), "{header}");
    assert!(header.ends_with("h3,label"), "{header}");
}

#[test]
fn importance_rejects_autoencoder_modes() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "100");
    assert_eq!(code(&vews(dir.path(), &["importance", "--features", "vews"])), 1);
}
