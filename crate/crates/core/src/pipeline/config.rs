use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Bm25Params, CorpusFormat};
use crate::embedding::EmbedderSpec;
use crate::enrichment::{EnrichmentConfig, ExtractorSpec};
use crate::error::{Error, Result};
use crate::filter::HistoryAggregation;
use crate::guided::{
    RetrieverKind, DEFAULT_FINAL_KEEP, DEFAULT_GUIDED_N, DEFAULT_INTERMEDIATE_KEEP,
};
use crate::trec::EvalOptions;

/// One embedder per pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageEmbedders {
    pub rerank1: EmbedderSpec,
    pub rerank2: EmbedderSpec,
    pub keyword: EmbedderSpec,
    pub filter: EmbedderSpec,
    pub answer: EmbedderSpec,
    /// Document/query embedder for `retriever = "dense"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<EmbedderSpec>,
}

fn default_guided_n() -> usize {
    DEFAULT_GUIDED_N
}
fn default_intermediate_keep() -> usize {
    DEFAULT_INTERMEDIATE_KEEP
}
fn default_final_keep() -> usize {
    DEFAULT_FINAL_KEEP
}
fn default_run_depth() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_format: Option<CorpusFormat>,
    pub queries_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qrels_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/index.gcqr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_path: Option<PathBuf>,

    #[serde(default)]
    pub retriever: RetrieverKind,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default = "default_guided_n")]
    pub guided_n: usize,
    #[serde(default = "default_intermediate_keep")]
    pub intermediate_keep: usize,
    #[serde(default = "default_final_keep")]
    pub final_keep: usize,
    /// Depth of the emitted baseline and final runs.
    #[serde(default = "default_run_depth")]
    pub run_depth: usize,

    pub filter_threshold: f64,
    #[serde(default)]
    pub history_aggregation: HistoryAggregation,
    /// Worker threads for per-turn processing; 0 means one per logical core.
    #[serde(default)]
    pub workers: usize,
    /// Optional service that fills in missing baseline queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewriter_endpoint: Option<String>,

    pub enrichment: EnrichmentConfig,
    #[serde(default)]
    pub extractor: ExtractorSpec,
    pub embedders: StageEmbedders,
    #[serde(default)]
    pub evaluation: EvalOptions,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub filter_threshold: Option<f64>,
    pub guided_n: Option<usize>,
    pub span: Option<usize>,
    pub top_docs: Option<usize>,
}

impl PipelineConfig {
    /// Parse TOML. Relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.queries_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.qrels_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.index_path.as_mut() {
            fix(p);
        }
    }

    pub fn apply(&mut self, overrides: &ConfigOverrides) -> Result<()> {
        if let Some(t) = overrides.filter_threshold {
            self.filter_threshold = t;
        }
        if let Some(n) = overrides.guided_n {
            self.guided_n = n;
        }
        if let Some(s) = overrides.span {
            self.enrichment.keyword_span = s;
        }
        if let Some(d) = overrides.top_docs {
            self.enrichment.keyword_top_docs = d;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.guided_n == 0 || self.final_keep == 0 || self.run_depth == 0 {
            return fail("guided_n, final_keep and run_depth must be at least 1".into());
        }
        if self.intermediate_keep < self.final_keep {
            return fail(format!(
                "intermediate_keep ({}) must be at least final_keep ({})",
                self.intermediate_keep, self.final_keep
            ));
        }
        if self.filter_threshold.is_nan() || self.filter_threshold < 0.0 {
            return fail(format!(
                "filter_threshold must be >= 0, got {}",
                self.filter_threshold
            ));
        }
        if self.evaluation.k == 0 {
            return fail("evaluation.k must be at least 1".into());
        }
        self.enrichment.validate()?;
        let e = &self.embedders;
        for spec in [&e.rerank1, &e.rerank2, &e.keyword, &e.filter, &e.answer] {
            spec.validate()?;
        }
        match (&self.retriever, &e.dense) {
            (RetrieverKind::Dense, None) => {
                return fail("retriever = \"dense\" requires [embedders.dense]".into())
            }
            (_, Some(spec)) => spec.validate()?,
            _ => {}
        }
        Ok(())
    }

    /// Every input path must exist before a run starts.
    pub fn check_inputs(&self) -> Result<()> {
        let mut required = vec![
            ("corpus_path", &self.corpus_path),
            ("queries_path", &self.queries_path),
        ];
        if let Some(q) = &self.qrels_path {
            required.push(("qrels_path", q));
        }
        for (name, path) in required {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn index_path(&self) -> PathBuf {
        self.index_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("index.gcqr"))
    }

    pub fn corpus_format(&self) -> CorpusFormat {
        self.corpus_format
            .unwrap_or_else(|| CorpusFormat::from_path(&self.corpus_path))
    }
}
