//! Report rendering: aligned tables, JSON and CSV.

use clap::ValueEnum;
use resrate::evaluation::{AblationTable, CrossValReport, MetricsReport, ScatterPoint};
use resrate::ModelKind;
use serde::Serialize;

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

/// One line of a results table: model, QPs, P, MAE, MRE, time.
#[derive(Debug, Serialize)]
pub struct ReportRow {
    pub model: ModelKind,
    pub qp_train: Vec<i32>,
    pub qp_eval: Vec<i32>,
    #[serde(flatten)]
    pub metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<Vec<MetricsReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ReportRow {
    /// `qp_train` of `None` means trained and evaluated on the same QPs.
    pub fn new(model: ModelKind, qp_train: Option<Vec<i32>>, qp_eval: Vec<i32>, metrics: MetricsReport) -> Self {
        Self {
            model,
            qp_train: qp_train.unwrap_or_else(|| qp_eval.clone()),
            qp_eval,
            metrics,
            folds: None,
            fold_sizes: None,
            seed: None,
        }
    }

    pub fn from_cv(model: ModelKind, qps: Vec<i32>, cv: CrossValReport) -> Self {
        Self {
            folds: Some(cv.per_fold),
            fold_sizes: Some(cv.fold_sizes),
            seed: Some(cv.fold_seed),
            ..Self::new(model, None, qps, cv.averaged)
        }
    }
}

fn qps(v: &[i32]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(i32::to_string).collect::<Vec<_>>().join("+")
}

pub fn render(rows: &[ReportRow], format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(rows)? + "\n",
        Format::Table => table(rows),
    })
}

fn table(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<10} {:>8} {:>8} {:>8} {:>9} {:>8} {:>12}\n",
        "model", "qp_train", "qp_eval", "P", "MAE", "MRE", "time[ms/blk]"
    );
    for r in rows {
        let m = &r.metrics;
        let time = m
            .wall_time_per_block
            .map(|t| format!("{:.5}", t * 1e3))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>8.4} {:>9.3} {:>7.1}% {:>12}\n",
            r.model.name(),
            qps(&r.qp_train),
            qps(&r.qp_eval),
            m.pearson,
            m.mae,
            m.mre * 100.0,
            time
        ));
        if m.n_mre_excluded > 0 {
            out.push_str(&format!(
                "  ({} of {} zero-rate blocks excluded from MRE)\n",
                m.n_mre_excluded, m.n_total
            ));
        }
    }
    out
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn ablation_csv(table: &AblationTable) -> String {
    let mut out = String::from("features,P,MAE,MRE,in_sample_mse\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.features, r.pearson, r.mae, r.mre, r.in_sample_mse
        ));
    }
    out
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("actual,estimated,pixels\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.actual, p.estimated, p.pixels));
    }
    out
}
