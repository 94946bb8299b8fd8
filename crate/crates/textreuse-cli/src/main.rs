//! Command-line front end for the text-reuse toolkit.
//!
//! Subcommands map onto the library pipeline: `generate` builds a synthetic
//! corpus, `detect` writes detection XML per suspicious document, `calibrate`
//! sweeps the vector similarity threshold, `evaluate` scores detections
//! against truth, and `report` slices recall by generation metadata.
//!
//! Exit codes: 0 on success, 2 when a required input is missing or the
//! invocation is malformed, 1 for any other failure. Primary output on
//! stdout is machine-readable JSON; logs go to stderr.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use textreuse::error::Error;
use textreuse::generate::GeneratorConfig;
use textreuse::lexical::LexicalParams;
use textreuse::paraphrase::ProviderConfig;
use textreuse::pipeline::{
    cmd_calibrate, cmd_detect, cmd_evaluate, cmd_generate, cmd_report, CalibrateArgs, DetectArgs,
    DetectorConfig, EvaluateArgs, GenerateArgs, ReportArgs, VectorsSpec,
};
use textreuse::vector::{CalibrationGrid, ChunkMode, VectorParams};

#[derive(Parser)]
#[command(name = "textreuse", version, about = "Synthetic text-reuse corpora, detectors, and evaluation")]
struct Cli {
    /// Worker threads for per-pair work (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic reuse corpus from a pool of source documents.
    Generate(GenerateCmd),
    /// Detect reused passages across a corpus's document pairs.
    Detect(DetectCmd),
    /// Pick the vector similarity threshold that maximizes macro plagdet.
    Calibrate(CalibrateCmd),
    /// Score a detections directory against truth annotations.
    Evaluate(EvaluateCmd),
    /// Slice recall by model, prompt type, severity, and altered status.
    Report(ReportCmd),
}

#[derive(Args)]
struct GenerateCmd {
    /// Directory of plain-text pool documents (optional `.json` sidecars).
    #[arg(long)]
    pool: PathBuf,
    /// Output corpus root.
    #[arg(long)]
    out: PathBuf,
    /// Number of suspicious/source pairs to produce.
    #[arg(long)]
    pairs: usize,
    /// Seed controlling every random draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Paraphrase provider config JSON; offline deterministic provider when
    /// omitted.
    #[arg(long)]
    provider: Option<PathBuf>,
    /// JSON-lines paragraph vectors for the pool documents.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Citation marker template; `{stem}` expands to the source file stem.
    #[arg(long)]
    citation_pattern: Option<String>,
    /// Fraction of paragraphs rewritten by the altered treatment.
    #[arg(long)]
    altered_fraction: Option<f64>,
    /// Withhold truth annotations for the test split.
    #[arg(long)]
    blind: bool,
}

#[derive(Args)]
struct DetectCmd {
    /// Corpus split directory (pairs file, susp/, src/).
    #[arg(long)]
    corpus: PathBuf,
    /// Directory receiving one detection XML per suspicious document.
    #[arg(long)]
    out: PathBuf,
    /// Detector family: "lexical" or "vector".
    #[arg(long, default_value = "lexical")]
    detector: String,
    /// Vector similarity threshold.
    #[arg(long, conflicts_with = "calibrate")]
    threshold: Option<f64>,
    /// Calibrate the threshold on this corpus's truth before detecting.
    #[arg(long)]
    calibrate: bool,
    /// Chunking unit for the vector detector: "paragraph" or "sentence".
    #[arg(long, default_value = "paragraph")]
    chunk_mode: String,
    /// "tfidf" or a JSON-lines file of precomputed chunk vectors.
    #[arg(long, default_value = "tfidf")]
    vectors: String,
    /// Character gap bridged when merging neighboring vector detections.
    #[arg(long)]
    merge_gap: Option<usize>,
    /// Minimum detected span length in characters (vector detector).
    #[arg(long)]
    min_len: Option<usize>,
    /// Minimum token-set overlap required of a vector match (0 disables).
    #[arg(long)]
    min_jaccard: Option<f64>,
    /// Seed n-gram width (lexical detector).
    #[arg(long)]
    ngram: Option<usize>,
    /// Token gap bridged when clustering lexical seed matches.
    #[arg(long)]
    token_gap: Option<usize>,
    /// Minimum case length in tokens (lexical detector).
    #[arg(long)]
    min_case_tokens: Option<usize>,
}

impl DetectCmd {
    fn detector(&self) -> Result<DetectorConfig, Error> {
        match self.detector.as_str() {
            "lexical" => {
                let mut params = LexicalParams::default();
                if let Some(n) = self.ngram {
                    params.n = n;
                }
                if let Some(gap) = self.token_gap {
                    params.max_token_gap = gap;
                }
                if let Some(min) = self.min_case_tokens {
                    params.min_case_tokens = min;
                }
                Ok(DetectorConfig::Lexical(params))
            }
            "vector" => Ok(DetectorConfig::Vector {
                params: vector_params(
                    &self.chunk_mode,
                    self.threshold,
                    self.merge_gap,
                    self.min_len,
                    self.min_jaccard,
                )?,
                vectors: VectorsSpec::parse(&self.vectors),
            }),
            other => Err(Error::Config(format!(
                "unknown detector {other:?}; expected \"lexical\" or \"vector\""
            ))),
        }
    }
}

#[derive(Args)]
struct CalibrateCmd {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory receiving the calibrated threshold file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "paragraph")]
    chunk_mode: String,
    #[arg(long, default_value = "tfidf")]
    vectors: String,
    #[arg(long)]
    merge_gap: Option<usize>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    min_jaccard: Option<f64>,
    /// Lowest threshold tried.
    #[arg(long, default_value_t = CalibrationGrid::default().start)]
    grid_start: f64,
    /// Highest threshold tried.
    #[arg(long, default_value_t = CalibrationGrid::default().end)]
    grid_end: f64,
    /// Grid spacing.
    #[arg(long, default_value_t = CalibrationGrid::default().step)]
    grid_step: f64,
}

#[derive(Args)]
struct EvaluateCmd {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory of detection XML files to score.
    #[arg(long)]
    detections: PathBuf,
    /// Truth directory override; defaults to the corpus's own truth.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory receiving report.json and table.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportCmd {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory receiving slices.json.
    #[arg(long)]
    out: PathBuf,
}

fn vector_params(
    chunk_mode: &str,
    threshold: Option<f64>,
    merge_gap: Option<usize>,
    min_len: Option<usize>,
    min_jaccard: Option<f64>,
) -> Result<VectorParams, Error> {
    let mut params = VectorParams::default();
    params.chunk_mode = ChunkMode::parse(chunk_mode).ok_or_else(|| {
        Error::Config(format!(
            "unknown chunk mode {chunk_mode:?}; expected \"paragraph\" or \"sentence\""
        ))
    })?;
    if let Some(t) = threshold {
        params.threshold = t;
    }
    if let Some(gap) = merge_gap {
        params.char_gap = gap;
    }
    if let Some(min) = min_len {
        params.min_len_chars = min;
    }
    if let Some(j) = min_jaccard {
        params.min_jaccard = if j > 0.0 { Some(j) } else { None };
    }
    Ok(params)
}

fn load_provider(path: &Option<PathBuf>, seed: u64) -> Result<ProviderConfig> {
    let Some(path) = path else {
        return Ok(ProviderConfig::Offline { seed });
    };
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingInput(format!("provider config {}: {e}", path.display())))?;
    let config: ProviderConfig = serde_json::from_str(&raw)
        .map_err(|e| Error::Config(format!("provider config {}: {e}", path.display())))?;
    Ok(config)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(cmd) => {
            let mut config = GeneratorConfig {
                pairs: cmd.pairs,
                seed: cmd.seed,
                blind: cmd.blind,
                ..GeneratorConfig::default()
            };
            if let Some(pattern) = cmd.citation_pattern.clone() {
                config.citation_pattern = pattern;
            }
            if let Some(fraction) = cmd.altered_fraction {
                config.altered_fraction = fraction;
            }
            let provider = load_provider(&cmd.provider, cmd.seed)?;
            let manifest = cmd_generate(&GenerateArgs {
                pool: cmd.pool,
                out: cmd.out.clone(),
                config,
                provider,
                vectors: cmd.vectors,
            })
            .context("corpus generation failed")?;
            print_json(&serde_json::json!({
                "pairs": manifest.rows.len(),
                "out": cmd.out,
                "manifest": cmd.out.join("manifest.json"),
            }))
        }
        Command::Detect(cmd) => {
            let detector = cmd.detector()?;
            let summary = cmd_detect(&DetectArgs {
                corpus: cmd.corpus.clone(),
                out: cmd.out.clone(),
                detector,
                calibrate: cmd.calibrate,
                grid: CalibrationGrid::default(),
            })
            .context("detection failed")?;
            print_json(&summary)
        }
        Command::Calibrate(cmd) => {
            let threshold = cmd_calibrate(&CalibrateArgs {
                corpus: cmd.corpus.clone(),
                out: cmd.out.clone(),
                params: vector_params(&cmd.chunk_mode, None, cmd.merge_gap, cmd.min_len, cmd.min_jaccard)?,
                vectors: VectorsSpec::parse(&cmd.vectors),
                grid: CalibrationGrid {
                    start: cmd.grid_start,
                    end: cmd.grid_end,
                    step: cmd.grid_step,
                },
            })
            .context("calibration failed")?;
            print_json(&serde_json::json!({ "threshold": threshold }))
        }
        Command::Evaluate(cmd) => {
            let report = cmd_evaluate(&EvaluateArgs {
                corpus: cmd.corpus,
                detections: cmd.detections,
                truth: cmd.truth,
                out: cmd.out,
            })
            .context("evaluation failed")?;
            print_json(&report)
        }
        Command::Report(cmd) => {
            let slices = cmd_report(&ReportArgs {
                corpus: cmd.corpus,
                detections: cmd.detections,
                truth: cmd.truth,
                out: cmd.out,
            })
            .context("slice report failed")?;
            print_json(&slices)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_missing_input() => 2,
        _ => 1,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    textreuse::exec::configure_jobs(cli.jobs);
    match run(cli.command) {
        Ok(()) => {}
        Err(err) => {
            log::error!("{err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}
