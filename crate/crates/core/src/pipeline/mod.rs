//! End-to-end orchestration: index, reformulate, evaluate and sweep.

mod config;
mod evaluate;
mod queries;
mod reformulate;
mod sweep;

use std::path::PathBuf;

use crate::corpus::{ingest_corpus, CorpusIndex};
use crate::error::{Error, Result};

pub use config::{ConfigOverrides, PipelineConfig, StageEmbedders};
pub use evaluate::{cmd_evaluate, EvaluateRequest, EvaluationReport, KeywordPrecisionSummary};
pub use queries::{load_turns, parse_turns, Rewriter};
pub use reformulate::{
    cmd_reformulate, enrich_turn, reformulate_turn, Artifacts, Enrichment, KeywordRecord,
    ReformulateSummary, TurnContext, TurnOutput, TAG_BASELINE, TAG_GUIDECQR, TAG_GUIDED_FINAL,
    TAG_GUIDED_STAGE1,
};
pub use sweep::{cmd_sweep, SweepAxis, SweepReport, SweepRow};

#[derive(Debug, Clone)]
pub struct IndexSummary {
    pub path: PathBuf,
    pub doc_count: usize,
}

/// Ingest the corpus and write the versioned index file. Re-running over an
/// unchanged corpus rewrites identical bytes.
pub fn cmd_index(cfg: &PipelineConfig) -> Result<IndexSummary> {
    if !cfg.corpus_path.exists() {
        return Err(Error::Config(format!(
            "corpus_path {} does not exist",
            cfg.corpus_path.display()
        )));
    }
    let docs = ingest_corpus(&cfg.corpus_path, cfg.corpus_format())?;
    let index = CorpusIndex::build(docs)?;
    let path = cfg.index_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    index.save(&path)?;
    tracing::info!(path = %path.display(), docs = index.doc_count(), "index written");
    Ok(IndexSummary {
        path,
        doc_count: index.doc_count(),
    })
}
