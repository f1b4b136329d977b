use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use guidecqr::pipeline::{
    cmd_evaluate, cmd_index, cmd_reformulate, cmd_sweep, ConfigOverrides, EvaluateRequest,
    PipelineConfig, SweepAxis,
};

#[derive(Parser)]
#[command(
    name = "gcqr",
    version,
    about = "Guided conversational query reformulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Minimum filter score for a keyword or answer to be kept
    #[arg(long)]
    filter_threshold: Option<f64>,
    /// Documents in the guided candidate set
    #[arg(long)]
    guided_n: Option<usize>,
    /// Keywords kept per document.
    #[arg(long)]
    span: Option<usize>,
    /// Documents mined for keywords.
    #[arg(long)]
    top_docs: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        cfg.apply(&ConfigOverrides {
            filter_threshold: self.filter_threshold,
            guided_n: self.guided_n,
            span: self.span,
            top_docs: self.top_docs,
        })
        .context("invalid override")?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the retrieval index from the corpus.
    Index(Common),
    /// Reformulate every turn and write runs and queries.
    Reformulate(Common),
    /// Score a run against the qrels and write metrics.json.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Run file; defaults to the pipeline's final run.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Run to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Where to write the report; defaults to `<output_dir>/metrics.json`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-run the pipeline over a list of values for one hyperparameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Hyperparameter to vary
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values to try
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Index(common) => {
            let s = cmd_index(&common.load()?)?;
            println!(
                "indexed {} documents into {}",
                s.doc_count,
                s.path.display()
            );
            Ok(true)
        }
        Command::Reformulate(common) => {
            let s = cmd_reformulate(&common.load()?)?;
            println!(
                "reformulated {}/{} turns into {}",
                s.turns - s.failed.len(),
                s.turns,
                s.artifacts.reformulated.display()
            );
            for (key, err) in &s.failed {
                eprintln!("turn {key} failed: {err}");
            }
            Ok(!s.is_partial())
        }
        Command::Evaluate {
            common,
            run,
            baseline,
            output,
        } => {
            let cfg = common.load()?;
            let report = cmd_evaluate(&cfg, &EvaluateRequest { run, baseline })?;
            let out = output.unwrap_or_else(|| cfg.output_dir.join("metrics.json"));
            report.save(&out)?;
            let k = report.options.k;
            println!("MRR {:.4}  NDCG@{k} {:.4}", report.run.mrr, report.run.ndcg);
            if let Some((dm, dn)) = report.deltas() {
                println!("vs baseline: MRR {dm:+.4}  NDCG@{k} {dn:+.4}");
            }
            println!("report written to {}", out.display());
            Ok(true)
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let report = cmd_sweep(&common.load()?, axis, &values)?;
            let mut clean = true;
            for r in &report.rows {
                match &r.error {
                    Some(e) => {
                        clean = false;
                        eprintln!("{}={} failed: {e}", axis.name(), r.value);
                    }
                    None => {
                        clean &= r.failed_turns == 0;
                        println!(
                            "{}={}  MRR {}  NDCG@{} {}",
                            axis.name(),
                            r.value,
                            r.mrr.map_or("-".into(), |v| format!("{v:.4}")),
                            report.ndcg_k,
                            r.ndcg.map_or("-".into(), |v| format!("{v:.4}")),
                        );
                    }
                }
            }
            println!("grid written to {}", report.csv_path.display());
            Ok(clean)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
