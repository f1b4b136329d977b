//! TREC interchange formats and the evaluation metrics used for reporting.

mod metrics;
mod precision;
mod qrels;
mod run;

pub use metrics::{evaluate, mrr, ndcg_at_k, EvalOptions, Evaluation, Gain, QueryMetrics};
pub use precision::{keyword_precision, KeywordPrecision, TOP_RELEVANCE};
pub use qrels::{parse_qrels, parse_qrels_str, Qrels, MAX_RELEVANCE};
pub use run::{
    group_by_query, parse_run, parse_run_str, run_entries, save_run, validate_run, write_run,
    RunEntry,
};
