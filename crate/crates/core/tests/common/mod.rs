#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use guidecqr::pipeline::{cmd_index, cmd_reformulate, PipelineConfig, ReformulateSummary};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Fixture config with its output redirected to `out`.
pub fn config_in(name: &str, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixtures().join(name)).expect("fixture config loads");
    cfg.output_dir = out.to_path_buf();
    cfg
}

pub fn session_config(out: &Path) -> PipelineConfig {
    config_in("fixture.toml", out)
}

pub fn planted_config(out: &Path) -> PipelineConfig {
    config_in("planted/planted.toml", out)
}

pub fn index_and_reformulate(cfg: &PipelineConfig) -> ReformulateSummary {
    cmd_index(cfg).expect("index");
    let summary = cmd_reformulate(cfg).expect("reformulate");
    assert!(!summary.is_partial(), "failed turns: {:?}", summary.failed);
    summary
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
