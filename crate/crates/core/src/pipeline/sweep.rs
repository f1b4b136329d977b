use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{cmd_evaluate, cmd_reformulate, EvaluateRequest, PipelineConfig};
use crate::error::{Error, Result};

/// Hyperparameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GuidedN,
    KeywordTopDocs,
    KeywordSpan,
    FilterThreshold,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::GuidedN => "guided_n",
            SweepAxis::KeywordTopDocs => "keyword_top_docs",
            SweepAxis::KeywordSpan => "keyword_span",
            SweepAxis::FilterThreshold => "filter_threshold",
        }
    }

    fn apply(self, cfg: &mut PipelineConfig, value: f64) -> Result<()> {
        if self == SweepAxis::FilterThreshold {
            cfg.filter_threshold = value;
            return cfg.validate();
        }
        if value < 0.0 || value.fract() != 0.0 {
            return Err(Error::InvalidInput(format!(
                "{} takes non-negative integers, got {value}",
                self.name()
            )));
        }
        let n = value as usize;
        match self {
            SweepAxis::GuidedN => cfg.guided_n = n,
            SweepAxis::KeywordTopDocs => cfg.enrichment.keyword_top_docs = n,
            SweepAxis::KeywordSpan => cfg.enrichment.keyword_span = n,
            SweepAxis::FilterThreshold => unreachable!(),
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mrr: Option<f64>,
    pub ndcg: Option<f64>,
    pub baseline_mrr: Option<f64>,
    pub baseline_ndcg: Option<f64>,
    /// Mean number of enrichment items kept per turn.
    pub mean_kept_items: Option<f64>,
    pub failed_turns: usize,
    pub seconds: f64,
    pub output_dir: PathBuf,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub ndcg_k: usize,
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

fn run_point(cfg: &PipelineConfig, axis: SweepAxis, value: f64, out: PathBuf) -> SweepRow {
    let started = Instant::now();
    let mut row = SweepRow {
        value,
        mrr: None,
        ndcg: None,
        baseline_mrr: None,
        baseline_ndcg: None,
        mean_kept_items: None,
        failed_turns: 0,
        seconds: 0.0,
        output_dir: out.clone(),
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut point = cfg.clone();
        axis.apply(&mut point, value)?;
        point.index_path = Some(cfg.index_path());
        point.output_dir = out;
        let summary = cmd_reformulate(&point)?;
        row.failed_turns = summary.failed.len();
        if !summary.kept_items.is_empty() {
            let total: usize = summary.kept_items.iter().map(|(_, n)| n).sum();
            row.mean_kept_items = Some(total as f64 / summary.kept_items.len() as f64);
        }
        if point.qrels_path.is_some() {
            let report = cmd_evaluate(&point, &EvaluateRequest::default())?;
            report.save(&point.output_dir.join("metrics.json"))?;
            row.mrr = Some(report.run.mrr);
            row.ndcg = Some(report.run.ndcg);
            if let Some((_, b)) = &report.baseline {
                row.baseline_mrr = Some(b.mrr);
                row.baseline_ndcg = Some(b.ndcg);
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        tracing::error!(axis = axis.name(), value, error = %e, "sweep point failed");
        row.error = Some(e.to_string());
    }
    row.seconds = started.elapsed().as_secs_f64();
    row
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Run the pipeline once per value, sharing the existing index, and write
/// `sweep_<axis>.csv` and `sweep_<axis>.json` into the output directory.
/// A failing point becomes a row with `error` set.
pub fn cmd_sweep(cfg: &PipelineConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let index_path = cfg.index_path();
    if !index_path.exists() {
        return Err(Error::Config(format!(
            "index {} not found; run `gcqr index` first",
            index_path.display()
        )));
    }
    let base = cfg.output_dir.join(format!("sweep-{}", axis.name()));
    let rows: Vec<SweepRow> = values
        .iter()
        .map(|&v| run_point(cfg, axis, v, base.join(v.to_string())))
        .collect();

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let ndcg_k = cfg.evaluation.k;
    let csv_path = cfg.output_dir.join(format!("sweep_{}.csv", axis.name()));
    let json_path = cfg.output_dir.join(format!("sweep_{}.json", axis.name()));
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", csv_path.display()));
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    let ndcg_col = format!("ndcg@{ndcg_k}");
    let baseline_ndcg_col = format!("baseline_ndcg@{ndcg_k}");
    w.write_record([
        axis.name(),
        "mrr",
        &ndcg_col,
        "baseline_mrr",
        &baseline_ndcg_col,
        "mean_kept_items",
        "failed_turns",
        "seconds",
        "error",
    ])
    .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.value.to_string(),
            fmt_opt(r.mrr),
            fmt_opt(r.ndcg),
            fmt_opt(r.baseline_mrr),
            fmt_opt(r.baseline_ndcg),
            fmt_opt(r.mean_kept_items),
            r.failed_turns.to_string(),
            format!("{:.3}", r.seconds),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let report = SweepReport {
        axis,
        ndcg_k,
        rows,
        csv_path,
        json_path: json_path.clone(),
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(report)
}
