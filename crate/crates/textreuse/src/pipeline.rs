//! Batch pipeline commands: generate a corpus, detect reuse, calibrate the
//! vector threshold, evaluate detections, and slice recall by generation
//! metadata. Each command reads and writes directories, records its full
//! configuration in a run-metadata file, and writes every output atomically,
//! so reruns with equal inputs produce byte-identical trees.

use crate::error::{Error, Result};
use crate::eval::{self, MetricReport, SliceKey};
use crate::exec;
use crate::format::{detection_file, write_annotations, AnnotationDocument, Corpus};
use crate::generate::{generate_corpus, GeneratorConfig, Manifest, SourcePool};
use crate::lexical::{detect_lexical, LexicalParams};
use crate::paraphrase::ProviderConfig;
use crate::span::{DocumentRef, ReuseCase};
use crate::text::atomic_write;
use crate::vector::{
    calibrate_threshold, detect_vector, CalibrationGrid, VectorParams, VectorSource, VectorStore,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Where the vector detector's chunk vectors come from: internal TF-IDF or a
/// JSON-lines file of precomputed embeddings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorsSpec {
    TfIdf,
    File(PathBuf),
}

impl VectorsSpec {
    pub fn parse(s: &str) -> VectorsSpec {
        if s == "tfidf" {
            VectorsSpec::TfIdf
        } else {
            VectorsSpec::File(PathBuf::from(s))
        }
    }

    pub fn open(&self) -> Result<VectorSource> {
        match self {
            VectorsSpec::TfIdf => Ok(VectorSource::TfIdf),
            VectorsSpec::File(path) => Ok(VectorSource::External(VectorStore::load(path)?)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectorConfig {
    Lexical(LexicalParams),
    Vector {
        params: VectorParams,
        vectors: VectorsSpec,
    },
}

fn write_run_metadata(
    out: &Path,
    subcommand: &str,
    seed: Option<u64>,
    config: &impl Serialize,
) -> Result<()> {
    let payload = serde_json::json!({
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
    });
    let rendered = serde_json::to_string_pretty(&payload)
        .map_err(|e| Error::Config(format!("run metadata serialization: {e}")))?;
    atomic_write(&out.join("run.json"), format!("{rendered}\n").as_bytes())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let rendered = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("json serialization: {e}")))?;
    atomic_write(path, format!("{rendered}\n").as_bytes())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Directory of plain-text pool documents (optional `.json` sidecars).
    pub pool: PathBuf,
    pub out: PathBuf,
    pub config: GeneratorConfig,
    pub provider: ProviderConfig,
    /// Optional precomputed paragraph vectors for the pool documents.
    pub vectors: Option<PathBuf>,
}

/// Generate a corpus and its manifest under `args.out`.
pub fn cmd_generate(args: &GenerateArgs) -> Result<Manifest> {
    let store = match &args.vectors {
        Some(path) => Some(VectorStore::load(path)?),
        None => None,
    };
    let pool = SourcePool::load(&args.pool, store.as_ref())?;
    let provider = args.provider.build()?;
    let manifest = generate_corpus(&pool, &args.config, provider.as_ref(), &args.out)?;
    write_run_metadata(&args.out, "generate", Some(args.config.seed), args)?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub detector: DetectorConfig,
    /// Calibrate the vector threshold on the corpus's truth first.
    pub calibrate: bool,
    pub grid: CalibrationGrid,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectSummary {
    /// Threshold chosen by calibration, when it ran.
    pub threshold: Option<f64>,
    pub documents: usize,
    pub cases: usize,
}

/// Run the detector over every pair, also applying calibration when asked.
fn run_detector(corpus: &Corpus, detector: &DetectorConfig) -> Result<Vec<ReuseCase>> {
    match detector {
        DetectorConfig::Lexical(params) => {
            let per_pair: Vec<Vec<ReuseCase>> = exec::map_items(&corpus.pairs, |(susp_ref, src_ref)| {
                detect_lexical(&corpus.src[src_ref], &corpus.susp[susp_ref], params)
            });
            Ok(per_pair.concat())
        }
        DetectorConfig::Vector { params, vectors } => {
            let source = vectors.open()?;
            let per_pair: Vec<Result<Vec<ReuseCase>>> =
                exec::map_items(&corpus.pairs, |(susp_ref, src_ref)| {
                    detect_vector(&corpus.src[src_ref], &corpus.susp[susp_ref], params, &source)
                });
            let mut cases = Vec::new();
            for result in per_pair {
                cases.extend(result?);
            }
            Ok(cases)
        }
    }
}

/// Detect reuse across the corpus and write one annotation file per
/// suspicious document (present even when empty, so zero detections are
/// explicit).
pub fn cmd_detect(args: &DetectArgs) -> Result<DetectSummary> {
    let corpus = Corpus::load(&args.corpus)?;
    let mut detector = args.detector.clone();
    let mut chosen = None;
    if args.calibrate {
        let DetectorConfig::Vector { params, vectors } = &mut detector else {
            return Err(Error::Config(
                "threshold calibration applies to the vector detector only".into(),
            ));
        };
        let truth = corpus.load_truth()?;
        let source = vectors.open()?;
        let threshold = calibrate_threshold(&corpus, &truth, params, &source, &args.grid)?;
        log::info!("calibrated similarity threshold: {threshold}");
        params.threshold = threshold;
        chosen = Some(threshold);
    }

    let cases = run_detector(&corpus, &detector)?;
    let mut by_susp: BTreeMap<DocumentRef, Vec<ReuseCase>> = BTreeMap::new();
    for susp_ref in corpus.suspicious_order() {
        by_susp.entry(susp_ref).or_default();
    }
    let total = cases.len();
    for case in cases {
        by_susp
            .get_mut(&case.suspicious.doc)
            .expect("detections only reference corpus documents")
            .push(case);
    }
    let documents = by_susp.len();
    for (susp_ref, cases) in by_susp {
        write_annotations(
            &AnnotationDocument {
                reference: susp_ref.clone(),
                cases,
            },
            &detection_file(&args.out, &susp_ref),
        )?;
    }
    write_run_metadata(&args.out, "detect", None, args)?;
    Ok(DetectSummary {
        threshold: chosen,
        documents,
        cases: total,
    })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub params: VectorParams,
    pub vectors: VectorsSpec,
    pub grid: CalibrationGrid,
}

/// Sweep the threshold grid against the corpus truth and persist the winner.
pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<f64> {
    let corpus = Corpus::load(&args.corpus)?;
    let truth = corpus.load_truth()?;
    let source = args.vectors.open()?;
    let threshold = calibrate_threshold(&corpus, &truth, &args.params, &source, &args.grid)?;
    write_json(
        &args.out.join("calibrated.json"),
        &serde_json::json!({ "threshold": threshold }),
    )?;
    write_run_metadata(&args.out, "calibrate", None, args)?;
    Ok(threshold)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateArgs {
    pub corpus: PathBuf,
    pub detections: PathBuf,
    /// Truth directory override; defaults to the corpus's own truth.
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

fn load_truth_and_detections(
    corpus: &Corpus,
    truth: &Option<PathBuf>,
    detections: &Path,
) -> Result<(Vec<ReuseCase>, Vec<ReuseCase>)> {
    let truth_cases = match truth {
        Some(dir) => corpus.load_truth_in(dir)?,
        None => corpus.load_truth()?,
    };
    let detection_cases = corpus.load_detections(detections)?;
    Ok((truth_cases, detection_cases))
}

/// Score a detections directory against truth. Writes the metric report as
/// JSON plus a fixed-width table rendering.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<MetricReport> {
    let corpus = Corpus::load(&args.corpus)?;
    let (truth, detections) =
        load_truth_and_detections(&corpus, &args.truth, &args.detections)?;
    let report = eval::evaluate(&truth, &detections);
    write_json(&args.out.join("report.json"), &report)?;
    let label = args
        .detections
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "detections".to_string());
    let table = eval::render_table(&[(label, &report)]);
    atomic_write(&args.out.join("table.txt"), table.as_bytes())?;
    write_run_metadata(&args.out, "evaluate", None, args)?;
    Ok(report)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportArgs {
    pub corpus: PathBuf,
    pub detections: PathBuf,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

/// Recall sliced by the generation metadata recorded in truth: per model,
/// per prompt type, per severity, and altered-vs-plagiarism.
pub fn cmd_report(args: &ReportArgs) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let corpus = Corpus::load(&args.corpus)?;
    let (truth, detections) =
        load_truth_and_detections(&corpus, &args.truth, &args.detections)?;
    let mut slices = BTreeMap::new();
    for (name, key) in [
        ("model", SliceKey::Model),
        ("prompt", SliceKey::Prompt),
        ("severity", SliceKey::Severity),
        ("altered", SliceKey::Altered),
    ] {
        slices.insert(name.to_string(), eval::slice_report(&truth, &detections, key));
    }
    write_json(&args.out.join("slices.json"), &slices)?;
    write_run_metadata(&args.out, "report", None, args)?;
    Ok(slices)
}
