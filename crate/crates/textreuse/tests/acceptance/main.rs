//! Acceptance gate. Each test checks one numbered criterion and prints a
//! single pass/fail line; tolerances and runtime budgets are pinned in the
//! assertions. Run with `--nocapture` to see the lines on success.

mod fixtures;
mod oracle;

use fixtures as fx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::time::{Duration, Instant};
use textreuse::eval::{self, Counts, MetricReport, SliceKey};
use textreuse::format::Corpus;
use textreuse::generate::{GeneratorConfig, Split};
use textreuse::lexical::{detect_lexical, LexicalParams};
use textreuse::paraphrase::{OfflineParaphraser, ProviderConfig};
use textreuse::pipeline::{
    cmd_detect, cmd_evaluate, cmd_generate, DetectArgs, DetectorConfig, EvaluateArgs,
    GenerateArgs, VectorsSpec,
};
use textreuse::span::PromptType;
use textreuse::vector::{
    calibrate_threshold, detect_vector, CalibrationGrid, VectorParams, VectorSource, VectorStore,
};

fn criterion<F: FnOnce()>(number: u32, name: &str, body: F) {
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body));
    match outcome {
        Ok(()) => println!("criterion {number:02} ({name}): pass"),
        Err(payload) => {
            println!("criterion {number:02} ({name}): FAIL");
            std::panic::resume_unwind(payload);
        }
    }
}

// --- criterion 1 ----------------------------------------------------------

/// Reference rows: six headline metrics (micro plagdet/recall/precision,
/// macro plagdet/recall/precision) and the expected two-decimal mean.
const SCORE_ROWS: [(&str, [f64; 6], f64); 15] = [
    ("qwen2/gen", [0.39, 0.57, 0.32, 0.26, 0.54, 0.18], 0.38),
    ("linq/gen", [0.61, 0.82, 0.58, 0.53, 0.83, 0.45], 0.64),
    ("llama/gen", [0.28, 0.36, 0.23, 0.21, 0.40, 0.14], 0.27),
    ("pan12/gen", [0.08, 0.08, 0.59, 0.06, 0.05, 0.54], 0.23),
    ("foshan/gen", [0.42, 0.57, 0.33, 0.31, 0.56, 0.21], 0.40),
    ("jrluo/gen", [0.16, 0.12, 0.53, 0.14, 0.10, 0.53], 0.26),
    ("chizizhixindui/gen", [0.42, 0.38, 0.67, 0.34, 0.32, 0.51], 0.44),
    ("yukino/gen", [0.49, 0.50, 0.48, 0.45, 0.46, 0.45], 0.47),
    ("qwen2/pan12", [0.03, 0.49, 0.04, 0.01, 0.38, 0.02], 0.16),
    ("linq/pan12", [0.17, 0.45, 0.71, 0.14, 0.42, 0.44], 0.39),
    ("llama/pan12", [0.02, 0.34, 0.05, 0.01, 0.19, 0.02], 0.10),
    ("pan12/pan12", [0.29, 0.35, 0.99, 0.22, 0.24, 0.93], 0.50),
    ("foshan/pan12", [0.03, 0.03, 0.03, 0.03, 0.04, 0.02], 0.03),
    ("jrluo/pan12", [0.08, 0.10, 0.98, 0.08, 0.10, 0.97], 0.38),
    ("chizizhixindui/pan12", [0.01, 0.01, 0.22, 0.02, 0.02, 0.08], 0.06),
];

fn report_from(metrics: [f64; 6]) -> MetricReport {
    MetricReport {
        micro_plagdet: metrics[0],
        micro_recall: metrics[1],
        micro_precision: metrics[2],
        macro_plagdet: metrics[3],
        macro_recall: metrics[4],
        macro_precision: metrics[5],
        granularity: 1.0,
        score: 0.0,
        counts: Counts {
            truth_cases: 0,
            detections: 0,
            matched_truth_cases: 0,
        },
    }
}

#[test]
fn criterion_01_score_aggregation_rows() {
    criterion(1, "score aggregation reproduces reference rows", || {
        let t0 = Instant::now();
        for (name, metrics, expected) in SCORE_ROWS {
            let report = report_from(metrics);
            let score = eval::round2(eval::aggregate_score(&report));
            assert_eq!(score, expected, "row {name}");
        }
        assert!(t0.elapsed() < Duration::from_secs(1), "over budget");
    });
}

// --- criterion 2 ----------------------------------------------------------

#[test]
fn criterion_02_plagdet_equals_f1_at_unit_granularity() {
    criterion(2, "plagdet at granularity 1 equals F1", || {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut max_err: f64 = 0.0;
        for _ in 0..10_000 {
            let p: f64 = rng.random();
            let r: f64 = rng.random();
            let err = (eval::plagdet(p, r, 1.0) - eval::f1(p, r)).abs();
            max_err = max_err.max(err);
        }
        assert!(max_err < 1e-12, "max abs error {max_err}");
        assert!(t0.elapsed() < Duration::from_secs(1), "over budget");
    });
}

// --- criterion 3 ----------------------------------------------------------

fn assert_close(fast: f64, slow: f64, seed: u64, what: &str) {
    assert!(
        (fast - slow).abs() < 1e-12,
        "seed {seed}: {what} diverges: evaluator {fast} vs oracle {slow}"
    );
}

#[test]
fn criterion_03_evaluator_matches_bruteforce_oracle() {
    criterion(3, "evaluator equals brute-force character oracle", || {
        let t0 = Instant::now();
        for seed in 0..1200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (truth, detections) = fx::random_micro_corpus(&mut rng);
            let fast = eval::evaluate(&truth, &detections);
            let slow = oracle::evaluate(&truth, &detections);
            assert_close(fast.micro_precision, slow.micro_precision, seed, "micro precision");
            assert_close(fast.micro_recall, slow.micro_recall, seed, "micro recall");
            assert_close(fast.macro_precision, slow.macro_precision, seed, "macro precision");
            assert_close(fast.macro_recall, slow.macro_recall, seed, "macro recall");
            assert_close(fast.granularity, slow.granularity, seed, "granularity");
            assert_close(fast.micro_plagdet, slow.micro_plagdet, seed, "micro plagdet");
            assert_close(fast.macro_plagdet, slow.macro_plagdet, seed, "macro plagdet");
        }
        assert!(t0.elapsed() < Duration::from_secs(60), "over budget");
    });
}

// --- criterion 4 ----------------------------------------------------------

fn generate_args(pool: &Path, out: &Path, pairs: usize, seed: u64) -> GenerateArgs {
    GenerateArgs {
        pool: pool.to_path_buf(),
        out: out.to_path_buf(),
        config: GeneratorConfig {
            pairs,
            seed,
            ..GeneratorConfig::default()
        },
        provider: ProviderConfig::Offline { seed },
        vectors: None,
    }
}

#[test]
fn criterion_04_truth_as_detections_is_perfect() {
    criterion(4, "truth-as-detections scores 1.0 everywhere", || {
        let dir = tempfile::tempdir().unwrap();
        let pool = dir.path().join("pool");
        std::fs::create_dir(&pool).unwrap();
        fx::write_pool(&pool, 6, 6, 26);
        let out = dir.path().join("corpus");
        cmd_generate(&generate_args(&pool, &out, 60, 9)).unwrap();

        for split in Split::ALL {
            let split_dir = out.join(split.as_str());
            let report = cmd_evaluate(&EvaluateArgs {
                corpus: split_dir.clone(),
                detections: split_dir.join("truth"),
                truth: None,
                out: dir.path().join(format!("eval-{}", split.as_str())),
            })
            .unwrap();
            assert!(report.counts.truth_cases >= 1, "{split:?} has no truth cases");
            assert_eq!(report.micro_plagdet, 1.0, "{split:?}");
            assert_eq!(report.micro_recall, 1.0, "{split:?}");
            assert_eq!(report.micro_precision, 1.0, "{split:?}");
            assert_eq!(report.macro_plagdet, 1.0, "{split:?}");
            assert_eq!(report.macro_recall, 1.0, "{split:?}");
            assert_eq!(report.macro_precision, 1.0, "{split:?}");
            assert_eq!(report.granularity, 1.0, "{split:?}");
        }
    });
}

// --- criterion 5 ----------------------------------------------------------

#[test]
fn criterion_05_granularity_penalty_for_split_detections() {
    criterion(5, "threefold split yields granularity 3 and plagdet F1/2", || {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let truth = fx::disjoint_truth(&mut rng);
            let detections = fx::split_into_thirds(&truth);
            let report = eval::evaluate(&truth, &detections);
            assert_eq!(report.granularity, 3.0, "seed {seed}");
            let micro_f1 = eval::f1(report.micro_precision, report.micro_recall);
            let macro_f1 = eval::f1(report.macro_precision, report.macro_recall);
            assert!(
                (report.micro_plagdet - micro_f1 / 2.0).abs() < 1e-12,
                "seed {seed}: micro plagdet {} vs F1/2 {}",
                report.micro_plagdet,
                micro_f1 / 2.0
            );
            assert!(
                (report.macro_plagdet - macro_f1 / 2.0).abs() < 1e-12,
                "seed {seed}: macro plagdet {} vs F1/2 {}",
                report.macro_plagdet,
                macro_f1 / 2.0
            );
        }
    });
}

// --- criterion 6 ----------------------------------------------------------

#[test]
fn criterion_06_lexical_detector_floor_on_verbatim_copies() {
    criterion(6, "lexical detector floor on verbatim copies", || {
        let t0 = Instant::now();
        let params = LexicalParams::default();
        let mut truth = Vec::new();
        let mut detections = Vec::new();
        for i in 0..200 {
            let (src, susp, t) = fx::verbatim_pair(i);
            detections.extend(detect_lexical(&src, &susp, &params));
            truth.extend(t);
        }
        let report = eval::evaluate(&truth, &detections);
        assert!(report.macro_recall >= 0.95, "macro recall {}", report.macro_recall);
        assert!(report.macro_precision >= 0.90, "macro precision {}", report.macro_precision);
        assert!(report.granularity <= 1.05, "granularity {}", report.granularity);
        assert!(t0.elapsed() < Duration::from_secs(30), "over budget");
    });
}

// --- criterion 7 ----------------------------------------------------------

#[test]
fn criterion_07_recall_orders_by_prompt_strength() {
    criterion(7, "vector recall orders simple > default > complex", || {
        let t0 = Instant::now();
        let paraphraser = OfflineParaphraser::new(77);
        let params = VectorParams {
            threshold: 0.62,
            ..VectorParams::default()
        };
        let mut truth = Vec::new();
        let mut detections = Vec::new();
        let mut index = 0;
        for prompt in [PromptType::Simple, PromptType::Default, PromptType::Complex] {
            for _ in 0..100 {
                let (src, susp, t) = fx::paraphrased_pair(index, prompt, &paraphraser).unwrap();
                index += 1;
                detections
                    .extend(detect_vector(&src, &susp, &params, &VectorSource::TfIdf).unwrap());
                truth.extend(t);
            }
        }
        let slices = eval::slice_report(&truth, &detections, SliceKey::Prompt);
        let simple = slices["simple"];
        let default = slices["default"];
        let complex = slices["complex"];
        assert!(
            simple - default >= 0.03,
            "recall(simple)={simple} vs recall(default)={default}"
        );
        assert!(
            default - complex >= 0.03,
            "recall(default)={default} vs recall(complex)={complex}"
        );
        assert!(t0.elapsed() < Duration::from_secs(300), "over budget");
    });
}

// --- criterion 8 ----------------------------------------------------------

fn assert_fraction(actual: f64, expected: f64, tolerance: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tolerance,
        "{what}: {actual:.4} not within {tolerance} of {expected}"
    );
}

#[test]
fn criterion_08_generator_distributions() {
    criterion(8, "generator category/severity/prompt/split fractions", || {
        let t0 = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let pool = dir.path().join("pool");
        std::fs::create_dir(&pool).unwrap();
        fx::write_pool(&pool, 8, 8, 28);
        let out = dir.path().join("corpus");
        let manifest = cmd_generate(&generate_args(&pool, &out, 2000, 2024)).unwrap();
        let n = manifest.rows.len() as f64;
        assert_eq!(manifest.rows.len(), 2000);

        let count_base = |base: &str| {
            manifest.rows.iter().filter(|r| r.category.base() == base).count() as f64 / n
        };
        assert_fraction(count_base("original"), 0.05, 0.02, "original fraction");
        assert_fraction(count_base("altered"), 0.20, 0.02, "altered fraction");
        assert_fraction(count_base("plagiarized"), 0.75, 0.02, "plagiarized fraction");

        let with_severity: Vec<_> = manifest.rows.iter().filter_map(|r| r.severity).collect();
        let sn = with_severity.len() as f64;
        let sev_fraction = |name: &str| {
            with_severity.iter().filter(|s| s.as_str() == name).count() as f64 / sn
        };
        assert_fraction(sev_fraction("low"), 0.30, 0.03, "low severity");
        assert_fraction(sev_fraction("medium"), 0.40, 0.03, "medium severity");
        assert_fraction(sev_fraction("high"), 0.30, 0.03, "high severity");

        let mut prompt_counts = std::collections::BTreeMap::new();
        for split in Split::ALL {
            let corpus = Corpus::load(&out.join(split.as_str())).unwrap();
            for case in corpus.load_truth().unwrap() {
                if let Some(prompt) = case.meta.prompt {
                    *prompt_counts.entry(prompt.as_str()).or_insert(0usize) += 1;
                }
            }
        }
        let pn = prompt_counts.values().sum::<usize>() as f64;
        let prompt_fraction =
            |name: &str| prompt_counts.get(name).copied().unwrap_or(0) as f64 / pn;
        assert_fraction(prompt_fraction("simple"), 0.60, 0.03, "simple prompts");
        assert_fraction(prompt_fraction("default"), 0.30, 0.03, "default prompts");
        assert_fraction(prompt_fraction("complex"), 0.10, 0.03, "complex prompts");

        let split_fraction = |split: Split| {
            manifest.rows.iter().filter(|r| r.split == split).count() as f64 / n
        };
        assert_fraction(split_fraction(Split::Train), 0.80, 0.03, "train split");
        assert_fraction(split_fraction(Split::Validation), 0.10, 0.03, "validation split");
        assert_fraction(split_fraction(Split::Test), 0.10, 0.03, "test split");

        assert!(t0.elapsed() < Duration::from_secs(120), "over budget");
    });
}

// --- criterion 9 ----------------------------------------------------------

#[test]
fn criterion_09_threshold_calibration_contract() {
    criterion(9, "calibration picks 0.95 and holds up out of sample", || {
        let dir = tempfile::tempdir().unwrap();
        let (train_root, train_vectors) = fx::separation_corpus(dir.path(), 1, 40).unwrap();
        let corpus = Corpus::load(&train_root).unwrap();
        let truth = corpus.load_truth().unwrap();
        let store = VectorStore::load(&train_vectors).unwrap();
        let threshold = calibrate_threshold(
            &corpus,
            &truth,
            &VectorParams::default(),
            &VectorSource::External(store),
            &CalibrationGrid::default(),
        )
        .unwrap();
        assert!((threshold - 0.95).abs() < 1e-9, "calibrated threshold {threshold}");

        let (held_root, held_vectors) = fx::separation_corpus(dir.path(), 2, 40).unwrap();
        let held = Corpus::load(&held_root).unwrap();
        let held_truth = held.load_truth().unwrap();
        let source = VectorSource::External(VectorStore::load(&held_vectors).unwrap());
        let params = VectorParams {
            threshold,
            ..VectorParams::default()
        };
        let mut detections = Vec::new();
        for (susp_ref, src_ref) in &held.pairs {
            detections.extend(
                detect_vector(&held.src[src_ref], &held.susp[susp_ref], &params, &source).unwrap(),
            );
        }
        let report = eval::evaluate(&held_truth, &detections);
        assert!(
            report.macro_plagdet >= 0.99,
            "held-out macro plagdet {}",
            report.macro_plagdet
        );
    });
}

// --- criterion 10 ---------------------------------------------------------

#[test]
fn criterion_10_deterministic_reruns() {
    criterion(10, "generate and detect reruns are byte-identical", || {
        let dir = tempfile::tempdir().unwrap();
        let pool = dir.path().join("pool");
        std::fs::create_dir(&pool).unwrap();
        fx::write_pool(&pool, 5, 6, 26);
        let out = dir.path().join("corpus");
        let args = generate_args(&pool, &out, 30, 31);
        cmd_generate(&args).unwrap();
        let first = fx::dir_digest(&out);
        std::fs::remove_dir_all(&out).unwrap();
        cmd_generate(&args).unwrap();
        assert_eq!(first, fx::dir_digest(&out), "generate rerun drifted");

        let train = out.join("train");
        for detector in [
            DetectorConfig::Lexical(LexicalParams::default()),
            DetectorConfig::Vector {
                params: VectorParams {
                    threshold: 0.4,
                    min_len_chars: 50,
                    ..VectorParams::default()
                },
                vectors: VectorsSpec::TfIdf,
            },
        ] {
            let det_out = dir.path().join("det");
            let det_args = DetectArgs {
                corpus: train.clone(),
                out: det_out.clone(),
                detector,
                calibrate: false,
                grid: CalibrationGrid::default(),
            };
            cmd_detect(&det_args).unwrap();
            let first = fx::dir_digest(&det_out);
            std::fs::remove_dir_all(&det_out).unwrap();
            cmd_detect(&det_args).unwrap();
            assert_eq!(first, fx::dir_digest(&det_out), "detect rerun drifted");
            std::fs::remove_dir_all(&det_out).unwrap();
        }
    });
}
