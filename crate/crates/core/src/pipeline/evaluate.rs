use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::{Artifacts, KeywordRecord, PipelineConfig};
use crate::corpus::CorpusIndex;
use crate::error::{Error, Result};
use crate::trec::{
    evaluate, keyword_precision, parse_qrels, parse_run, EvalOptions, Evaluation, KeywordPrecision,
    Qrels,
};

#[derive(Debug, Clone, Default)]
pub struct EvaluateRequest {
    /// Defaults to `<output_dir>/guidecqr.run`.
    pub run: Option<PathBuf>,
    /// Defaults to `<output_dir>/baseline.run` when the run is also defaulted
    /// and the file exists.
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordPrecisionSummary {
    pub mean: f64,
    pub per_query: BTreeMap<String, KeywordPrecision>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub run_path: PathBuf,
    pub options: EvalOptions,
    pub run: Evaluation,
    pub baseline: Option<(PathBuf, Evaluation)>,
    pub keyword_precision: Option<KeywordPrecisionSummary>,
    pub warnings: Vec<String>,
}

fn metrics_block(eval: &Evaluation, k: usize) -> Map<String, Value> {
    let ndcg_key = format!("NDCG@{k}");
    let per_query: Map<String, Value> = eval
        .per_query
        .iter()
        .map(|(qid, m)| {
            let mut row = Map::new();
            row.insert("MRR".into(), json!(m.reciprocal_rank));
            row.insert(ndcg_key.clone(), json!(m.ndcg));
            (qid.clone(), Value::Object(row))
        })
        .collect();
    let mut block = Map::new();
    block.insert("MRR".into(), json!(eval.mrr));
    block.insert(ndcg_key, json!(eval.ndcg));
    block.insert("per_query".into(), Value::Object(per_query));
    block.insert("evaluated_queries".into(), json!(eval.evaluated_queries));
    block.insert("mrr_queries".into(), json!(eval.mrr_queries));
    block.insert("unjudged_queries".into(), json!(eval.unjudged_queries));
    block.insert("missing_queries".into(), json!(eval.missing_queries));
    block
}

impl EvaluationReport {
    /// `{"MRR", "NDCG@k", "per_query", ...}` plus baseline, deltas, keyword
    /// precision and metadata when available.
    pub fn to_json(&self) -> Value {
        let k = self.options.k;
        let mut root = metrics_block(&self.run, k);
        root.insert("run".into(), json!(self.run_path.display().to_string()));
        root.insert("rel_threshold".into(), json!(self.options.rel_threshold));
        root.insert("ndcg_k".into(), json!(k));
        root.insert("gain".into(), json!(self.options.gain));
        if let Some((path, base)) = &self.baseline {
            let mut block = metrics_block(base, k);
            block.insert("run".into(), json!(path.display().to_string()));
            root.insert("baseline".into(), Value::Object(block));
            let (dm, dn) = self.deltas().expect("baseline present");
            root.insert("delta".into(), json!({"MRR": dm, format!("NDCG@{k}"): dn}));
        }
        if let Some(kp) = &self.keyword_precision {
            let per_query: Map<String, Value> = kp
                .per_query
                .iter()
                .map(|(qid, p)| {
                    (
                        qid.clone(),
                        json!({"matched": p.matched, "total": p.total, "precision": p.value()}),
                    )
                })
                .collect();
            root.insert(
                "keyword_precision".into(),
                json!({"mean": kp.mean, "per_query": per_query}),
            );
        }
        root.insert("warnings".into(), json!(self.warnings));
        Value::Object(root)
    }

    /// (ΔMRR, ΔNDCG) of the run over the baseline.
    pub fn deltas(&self) -> Option<(f64, f64)> {
        self.baseline
            .as_ref()
            .map(|(_, b)| (self.run.mrr - b.mrr, self.run.ndcg - b.ndcg))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("json serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn load_keyword_records(path: &Path) -> Result<Vec<KeywordRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}

fn precision_summary(
    records: &[KeywordRecord],
    qrels: &Qrels,
    index: &CorpusIndex,
) -> KeywordPrecisionSummary {
    let per_query: BTreeMap<String, KeywordPrecision> = records
        .iter()
        .filter(|r| qrels.query(&r.qid).is_some())
        .map(|r| {
            (
                r.qid.clone(),
                keyword_precision(&r.keywords, qrels, &r.qid, index),
            )
        })
        .collect();
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().map(KeywordPrecision::value).sum::<f64>() / per_query.len() as f64
    };
    KeywordPrecisionSummary { mean, per_query }
}

/// Score a run (and optionally a baseline run) against the configured qrels.
/// Query-key mismatches are reported, not fatal.
pub fn cmd_evaluate(cfg: &PipelineConfig, request: &EvaluateRequest) -> Result<EvaluationReport> {
    let qrels_path = cfg
        .qrels_path
        .as_ref()
        .ok_or_else(|| Error::Config("qrels_path is required for evaluation".into()))?;
    let qrels = parse_qrels(qrels_path)?;
    let artifacts = Artifacts::in_dir(&cfg.output_dir);
    let run_path = request
        .run
        .clone()
        .unwrap_or_else(|| artifacts.final_run.clone());
    let baseline_path = match (&request.baseline, &request.run) {
        (Some(p), _) => Some(p.clone()),
        (None, None) if artifacts.baseline_run.exists() => Some(artifacts.baseline_run.clone()),
        _ => None,
    };
    let opts = cfg.evaluation;

    let mut warnings = Vec::new();
    let run = evaluate(&parse_run(&run_path)?, &qrels, &opts)?;
    if run.evaluated_queries == 0 {
        warnings.push("no query in the run has relevance judgments".to_string());
    }
    if !run.unjudged_queries.is_empty() {
        warnings.push(format!(
            "{} run queries have no judgments",
            run.unjudged_queries.len()
        ));
    }
    if !run.missing_queries.is_empty() {
        warnings.push(format!(
            "{} judged queries are missing from the run",
            run.missing_queries.len()
        ));
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    let baseline = match baseline_path {
        Some(path) => {
            let eval = evaluate(&parse_run(&path)?, &qrels, &opts)?;
            Some((path, eval))
        }
        None => None,
    };

    let index_path = cfg.index_path();
    let keyword_precision = if artifacts.keywords.exists() && index_path.exists() {
        let records = load_keyword_records(&artifacts.keywords)?;
        let index = CorpusIndex::load(&index_path)?;
        Some(precision_summary(&records, &qrels, &index))
    } else {
        None
    };

    Ok(EvaluationReport {
        run_path,
        options: opts,
        run,
        baseline,
        keyword_precision,
        warnings,
    })
}
