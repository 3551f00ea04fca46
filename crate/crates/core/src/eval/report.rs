//! Report serialization: JSON, per-split CSV and a plain-text summary table.

use std::io::Write;

use super::{EvalReport, Metrics};
use crate::error::Result;

pub const REPORT_CSV_COLUMNS: [&str; 20] = [
    "protocol",
    "feature_mode",
    "model",
    "seed",
    "test_month",
    "n",
    "k",
    "fold",
    "job_seed",
    "train_size",
    "test_size",
    "tp",
    "tn",
    "fp",
    "fn",
    "accuracy",
    "tpr",
    "tnr",
    "fpr",
    "fnr",
];

pub fn write_report_json<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n").map_err(|e| crate::error::Error::io("<report>", e))?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn rates(m: &Metrics) -> [String; 5] {
    [m.accuracy, m.tpr, m.tnr, m.fpr, m.fnr].map(opt)
}

/// One row per split.
pub fn write_report_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_COLUMNS)?;
    for p in &report.points {
        for s in &p.splits {
            let c = s.confusion;
            let mut rec = vec![
                report.protocol.name().to_owned(),
                report.feature_mode.to_string(),
                report.model.to_string(),
                report.seed.to_string(),
                p.key.test_month.clone().unwrap_or_default(),
                opt(p.key.n),
                opt(p.key.k),
                opt(s.fold),
                s.job_seed.to_string(),
                s.train_size.to_string(),
                s.test_size.to_string(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.r#fn.to_string(),
            ];
            rec.extend(rates(&s.metrics));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| crate::error::Error::io("<report>", e))?;
    Ok(())
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{:.2}%", 100.0 * v)).unwrap_or_else(|| "-".to_owned())
}

/// Accuracy and class rates per evaluated point, one line each.
pub fn summary_table(report: &EvalReport) -> String {
    let mut s = format!(
        "{} | features={} model={} seed={} users={}\n",
        report.protocol.name(),
        report.feature_mode,
        report.model,
        report.seed,
        report.users
    );
    s.push_str(&format!(
        "{:<22} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "point", "Accuracy", "TPR", "TNR", "FPR", "FNR"
    ));
    for p in &report.points {
        match &p.metrics {
            Some(m) => s.push_str(&format!(
                "{:<22} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
                p.key.to_string(),
                pct(m.accuracy),
                pct(m.tpr),
                pct(m.tnr),
                pct(m.fpr),
                pct(m.fnr)
            )),
            None => s.push_str(&format!(
                "{:<22} skipped: {}\n",
                p.key.to_string(),
                p.notice.as_deref().unwrap_or("no data")
            )),
        }
    }
    s
}
