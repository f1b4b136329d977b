use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_turns, PipelineConfig, Rewriter};
use crate::corpus::CorpusIndex;
use crate::embedding::{build_embedder, Embedder};
use crate::enrichment::{
    augment_keywords, generate_answers, unify_answers, AnswerExtractor, AnswerSpan,
    KeywordCandidate,
};
use crate::error::{Error, Result};
use crate::filter::{
    filter_items, unify, DroppedItem, EnrichmentItem, ItemKind, ReformulatedQuery,
};
use crate::guided::{
    retrieve_guided, two_stage_rerank, ConversationTurn, QueryKey, RankedList, RerankOutcome,
    Retriever, RetrieverKind, ScoredDoc,
};
use crate::trec::{run_entries, save_run, RunEntry};

pub const TAG_GUIDECQR: &str = "guidecqr";
pub const TAG_BASELINE: &str = "baseline";
pub const TAG_GUIDED_STAGE1: &str = "guided-stage1";
pub const TAG_GUIDED_FINAL: &str = "guided-final";

/// Everything a turn needs, built once per run.
pub struct TurnContext {
    pub retriever: Retriever,
    pub rerank1: Arc<dyn Embedder>,
    pub rerank2: Arc<dyn Embedder>,
    pub keyword: Arc<dyn Embedder>,
    pub filter: Arc<dyn Embedder>,
    pub extractor: AnswerExtractor,
    pub cfg: PipelineConfig,
}

impl TurnContext {
    pub fn new(cfg: &PipelineConfig, index: Arc<CorpusIndex>) -> Result<Self> {
        let e = &cfg.embedders;
        let retriever = match cfg.retriever {
            RetrieverKind::Bm25 => Retriever::bm25(index, cfg.bm25),
            RetrieverKind::Dense => {
                let spec = e.dense.as_ref().expect("validated");
                Retriever::dense(index, build_embedder(spec)?)?
            }
        };
        Ok(Self {
            retriever,
            rerank1: build_embedder(&e.rerank1)?,
            rerank2: build_embedder(&e.rerank2)?,
            keyword: build_embedder(&e.keyword)?,
            filter: build_embedder(&e.filter)?,
            extractor: AnswerExtractor::new(&cfg.extractor, build_embedder(&e.answer)?),
            cfg: cfg.clone(),
        })
    }

    pub fn index(&self) -> &CorpusIndex {
        self.retriever.index()
    }
}

/// Intermediate and final products of one turn.
#[derive(Debug, Clone)]
pub struct TurnOutput {
    pub query: ReformulatedQuery,
    pub stage1: Option<RankedList>,
    pub guided: Option<RankedList>,
    pub augmented_keywords: Vec<KeywordCandidate>,
    pub answers: Vec<AnswerSpan>,
    /// Keywords plus answer items that survived filtering.
    pub kept_items: usize,
    pub baseline_hits: Vec<ScoredDoc>,
    pub final_hits: Vec<ScoredDoc>,
}

/// Guided documents and the enrichment items mined from them, before
/// filtering.
#[derive(Debug, Clone)]
pub struct Enrichment {
    pub reranked: RerankOutcome,
    pub keywords: Vec<KeywordCandidate>,
    pub answers: Vec<AnswerSpan>,
    /// Keywords in rank order, then the unified answer when non-empty.
    pub items: Vec<EnrichmentItem>,
}

/// Retrieve, re-rank and mine one turn. `None` when retrieval finds nothing.
pub fn enrich_turn(ctx: &TurnContext, turn: &ConversationTurn) -> Result<Option<Enrichment>> {
    let cfg = &ctx.cfg;
    let index = ctx.index();
    let candidates = retrieve_guided(&ctx.retriever, turn, cfg.guided_n)?;
    if candidates.is_empty() {
        return Ok(None);
    }
    let reranked = two_stage_rerank(
        &candidates,
        &turn.baseline_query,
        ctx.rerank1.as_ref(),
        ctx.rerank2.as_ref(),
        cfg.intermediate_keep,
        cfg.final_keep,
        index,
    )?;
    let guided = &reranked.guided;
    let keywords = augment_keywords(guided, turn, &cfg.enrichment, index, ctx.keyword.as_ref())?;
    let answers = generate_answers(guided, turn, &cfg.enrichment, index, &ctx.extractor)?;
    let unified_answer = unify_answers(&answers);

    let mut items: Vec<EnrichmentItem> = keywords
        .iter()
        .map(|k| EnrichmentItem::keyword(k.text.clone()))
        .collect();
    if !unified_answer.is_empty() {
        items.push(EnrichmentItem::answer(unified_answer));
    }
    Ok(Some(Enrichment {
        reranked,
        keywords,
        answers,
        items,
    }))
}

pub fn reformulate_turn(ctx: &TurnContext, turn: &ConversationTurn) -> Result<TurnOutput> {
    let cfg = &ctx.cfg;
    if turn.baseline_query.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "turn {} has no baseline query",
            turn.key()
        )));
    }
    let baseline_hits = ctx
        .retriever
        .retrieve(&turn.baseline_query, cfg.run_depth)?;
    let Some(enrichment) = enrich_turn(ctx, turn)? else {
        tracing::warn!(turn = %turn.key(), "no guided documents; keeping the baseline query");
        return Ok(TurnOutput {
            query: unify::<&str>(turn, &[], ""),
            stage1: None,
            guided: None,
            augmented_keywords: Vec::new(),
            answers: Vec::new(),
            kept_items: 0,
            final_hits: baseline_hits.clone(),
            baseline_hits,
        });
    };

    let outcome = filter_items(
        enrichment.items,
        turn,
        cfg.filter_threshold,
        ctx.filter.as_ref(),
        cfg.history_aggregation,
    )?;
    let kept_keywords: Vec<&str> = outcome
        .kept
        .iter()
        .filter(|i| i.kind == ItemKind::Keyword)
        .map(|i| i.text.as_str())
        .collect();
    let kept_answer = outcome
        .kept
        .iter()
        .find(|i| i.kind == ItemKind::Answer)
        .map_or("", |i| i.text.as_str());
    let mut query = unify(turn, &kept_keywords, kept_answer);
    query.dropped = outcome
        .dropped
        .iter()
        .map(|i| DroppedItem {
            text: i.text.clone(),
            kind: i.kind,
            filter_score: i.filter_score.expect("scored"),
        })
        .collect();

    let final_hits = ctx.retriever.retrieve(&query.final_text, cfg.run_depth)?;
    let RerankOutcome {
        intermediate,
        guided,
    } = enrichment.reranked;
    Ok(TurnOutput {
        kept_items: outcome.kept.len(),
        query,
        stage1: Some(intermediate),
        guided: Some(guided),
        augmented_keywords: enrichment.keywords,
        answers: enrichment.answers,
        baseline_hits,
        final_hits,
    })
}

/// Augmented (pre-filter) keywords of one turn, as written to `keywords.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRecord {
    pub qid: String,
    pub keywords: Vec<KeywordCandidate>,
}

/// Files written by a reformulation run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub reformulated: PathBuf,
    pub keywords: PathBuf,
    pub final_run: PathBuf,
    pub baseline_run: PathBuf,
    pub guided_stage1_run: PathBuf,
    pub guided_final_run: PathBuf,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            reformulated: dir.join("reformulated.jsonl"),
            keywords: dir.join("keywords.jsonl"),
            final_run: dir.join("guidecqr.run"),
            baseline_run: dir.join("baseline.run"),
            guided_stage1_run: dir.join("guided-stage1.run"),
            guided_final_run: dir.join("guided-final.run"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReformulateSummary {
    pub turns: usize,
    pub failed: Vec<(QueryKey, String)>,
    pub kept_items: Vec<(QueryKey, usize)>,
    pub artifacts: Artifacts,
}

impl ReformulateSummary {
    pub fn is_partial(&self) -> bool {
        !self.failed.is_empty()
    }
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(&record).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Reformulate every turn of the queries file and write all artifacts.
/// A failing turn is logged and skipped; the rest still run.
pub fn cmd_reformulate(cfg: &PipelineConfig) -> Result<ReformulateSummary> {
    cfg.check_inputs()?;
    let index_path = cfg.index_path();
    if !index_path.exists() {
        return Err(Error::Config(format!(
            "index {} not found; run `gcqr index` first",
            index_path.display()
        )));
    }
    let index = Arc::new(CorpusIndex::load(&index_path)?);
    let mut turns = load_turns(&cfg.queries_path)?;
    if let Some(endpoint) = &cfg.rewriter_endpoint {
        let rewriter = Rewriter::new(endpoint);
        turns.iter_mut().for_each(|t| rewriter.fill_baseline(t));
    }
    let ctx = TurnContext::new(cfg, index)?;

    let results: Vec<Result<TurnOutput>> = thread_pool(cfg.workers)?.install(|| {
        turns
            .par_iter()
            .map(|t| reformulate_turn(&ctx, t))
            .collect()
    });

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let artifacts = Artifacts::in_dir(&cfg.output_dir);
    let mut failed = Vec::new();
    let mut kept_items = Vec::new();
    let mut queries = Vec::new();
    let mut keyword_records = Vec::new();
    let (mut final_run, mut baseline_run, mut stage1_run, mut guided_run): (
        Vec<RunEntry>,
        Vec<RunEntry>,
        Vec<RunEntry>,
        Vec<RunEntry>,
    ) = Default::default();
    for (turn, result) in turns.iter().zip(results) {
        let key = turn.key();
        let qid = key.qid();
        match result {
            Ok(out) => {
                final_run.extend(run_entries(&qid, &out.final_hits, TAG_GUIDECQR));
                baseline_run.extend(run_entries(&qid, &out.baseline_hits, TAG_BASELINE));
                if let Some(list) = &out.stage1 {
                    stage1_run.extend(run_entries(&qid, &list.entries, TAG_GUIDED_STAGE1));
                }
                if let Some(list) = &out.guided {
                    guided_run.extend(run_entries(&qid, &list.entries, TAG_GUIDED_FINAL));
                }
                keyword_records.push(KeywordRecord {
                    qid,
                    keywords: out.augmented_keywords,
                });
                kept_items.push((key, out.kept_items));
                queries.push(out.query);
            }
            Err(e) => {
                tracing::error!(turn = %key, error = %e, "turn failed; skipping");
                failed.push((key, e.to_string()));
            }
        }
    }

    write_jsonl(&artifacts.reformulated, &queries)?;
    write_jsonl(&artifacts.keywords, &keyword_records)?;
    save_run(&artifacts.final_run, &final_run)?;
    save_run(&artifacts.baseline_run, &baseline_run)?;
    save_run(&artifacts.guided_stage1_run, &stage1_run)?;
    save_run(&artifacts.guided_final_run, &guided_run)?;

    Ok(ReformulateSummary {
        turns: turns.len(),
        failed,
        kept_items,
        artifacts,
    })
}
