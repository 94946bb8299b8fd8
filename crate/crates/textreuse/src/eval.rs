//! The plagdet metric family: micro and macro precision/recall, granularity,
//! plagdet, and the aggregate score, plus per-group recall slices.
//!
//! Characters are tagged by (document, side), so a document's suspicious-side
//! characters never collide with source-side characters even when the same
//! file plays both roles. A detection counts toward a truth case only when it
//! overlaps the case on both ends ([`cases_match`]); the character-set
//! intersection `c ⊓ d` is empty otherwise.
//!
//! Empty-denominator conventions keep reports comparable: no detections means
//! precision 0, no truth means recall 0, no matched case means granularity 1.
//! All values are kept at full precision; rounding to two decimals happens
//! only when rendering.

use crate::span::{
    cases_match, intersection, merge_spans, suspicious_sides_match, CaseKind, DocumentRef,
    ReuseCase, Span,
};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub truth_cases: usize,
    pub detections: usize,
    pub matched_truth_cases: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub micro_plagdet: f64,
    pub micro_recall: f64,
    pub micro_precision: f64,
    pub macro_plagdet: f64,
    pub macro_recall: f64,
    pub macro_precision: f64,
    /// Mean number of detections per matched truth case; 1 when nothing
    /// matched, never above the detection count.
    pub granularity: f64,
    /// Mean of the six precision/recall/plagdet values; granularity is not
    /// part of the mean (it already discounts both plagdets).
    pub score: f64,
    pub counts: Counts,
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// F1 discounted by the granularity penalty `log2(1 + gran)`.
pub fn plagdet(precision: f64, recall: f64, granularity: f64) -> f64 {
    f1(precision, recall) / (1.0 + granularity).log2()
}

/// Mean of the six headline metrics of a report.
pub fn aggregate_score(report: &MetricReport) -> f64 {
    (report.micro_plagdet
        + report.micro_recall
        + report.micro_precision
        + report.macro_plagdet
        + report.macro_recall
        + report.macro_precision)
        / 6.0
}

/// Round to two decimals for display. Values within 1e-9 of a midpoint are
/// treated as exact midpoints and resolved to the even neighbor, which is how
/// the reference score tables resolve them; everything else rounds to
/// nearest.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let n = if (frac - 0.5).abs() <= 1e-9 {
        if (floor as i64) % 2 == 0 {
            floor
        } else {
            floor + 1.0
        }
    } else if frac > 0.5 {
        floor + 1.0
    } else {
        floor
    };
    n / 100.0
}

/// Character weight of a case: suspicious length plus source length.
fn case_size(case: &ReuseCase) -> usize {
    case.suspicious.span.length + case.source.as_ref().map_or(0, |s| s.span.length)
}

/// Total size of a union of spans grouped by (document, side) key.
fn union_len<K: Ord>(sets: &BTreeMap<K, Vec<Span>>) -> usize {
    sets.values()
        .map(|spans| merge_spans(spans, 0).iter().map(|s| s.length).sum::<usize>())
        .sum()
}

fn flat_union_len(spans: &[Span]) -> usize {
    merge_spans(spans, 0).iter().map(|s| s.length).sum()
}

/// One matched (truth, detection) pair with the per-side intersections.
struct Match {
    truth: usize,
    det: usize,
    susp: Span,
    src: Span,
}

/// All both-ends matches between truth plagiarism cases and detections.
/// Pairs are grouped by (suspicious doc, source doc) first so unrelated
/// documents are never compared.
fn find_matches(truth: &[&ReuseCase], det: &[&ReuseCase]) -> Vec<Match> {
    type Key<'a> = (&'a DocumentRef, &'a DocumentRef);
    let mut truth_by_key: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, c) in truth.iter().enumerate() {
        if let Some(src) = &c.source {
            truth_by_key
                .entry((&c.suspicious.doc, &src.doc))
                .or_default()
                .push(i);
        }
    }
    let mut matches = Vec::new();
    for (j, d) in det.iter().enumerate() {
        let Some(d_src) = &d.source else { continue };
        let Some(candidates) = truth_by_key.get(&(&d.suspicious.doc, &d_src.doc)) else {
            continue;
        };
        for &i in candidates {
            let c = truth[i];
            if !cases_match(c, d) {
                continue;
            }
            let susp = intersection(c.suspicious.span, d.suspicious.span)
                .expect("matched cases overlap on the suspicious side");
            let src = intersection(c.source.as_ref().unwrap().span, d_src.span)
                .expect("matched cases overlap on the source side");
            matches.push(Match {
                truth: i,
                det: j,
                susp,
                src,
            });
        }
    }
    matches
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum Side {
    Suspicious,
    Source,
}

type CharSetKey<'a> = (&'a DocumentRef, Side);

fn add_case_spans<'a>(sets: &mut BTreeMap<CharSetKey<'a>, Vec<Span>>, case: &'a ReuseCase) {
    sets.entry((&case.suspicious.doc, Side::Suspicious))
        .or_default()
        .push(case.suspicious.span);
    if let Some(src) = &case.source {
        sets.entry((&src.doc, Side::Source)).or_default().push(src.span);
    }
}

/// Score a detection set against truth annotations. Truth kinds other than
/// plagiarism (altered paragraphs in particular) are ignored here; they only
/// participate in [`slice_report`]. Detection entries without a source
/// alignment cannot match anything and are dropped.
pub fn evaluate(truth: &[ReuseCase], detections: &[ReuseCase]) -> MetricReport {
    let truth: Vec<&ReuseCase> = truth
        .iter()
        .filter(|c| c.kind == CaseKind::Plagiarism)
        .collect();
    let det: Vec<&ReuseCase> = detections.iter().filter(|d| d.source.is_some()).collect();

    let matches = find_matches(&truth, &det);

    // Shared micro numerator: the union of all matched-pair intersections.
    let mut matched_sets: BTreeMap<CharSetKey, Vec<Span>> = BTreeMap::new();
    for m in &matches {
        let c = truth[m.truth];
        matched_sets
            .entry((&c.suspicious.doc, Side::Suspicious))
            .or_default()
            .push(m.susp);
        matched_sets
            .entry((&c.source.as_ref().unwrap().doc, Side::Source))
            .or_default()
            .push(m.src);
    }
    let micro_numerator = union_len(&matched_sets) as f64;

    let mut truth_sets: BTreeMap<CharSetKey, Vec<Span>> = BTreeMap::new();
    for c in &truth {
        add_case_spans(&mut truth_sets, c);
    }
    let mut det_sets: BTreeMap<CharSetKey, Vec<Span>> = BTreeMap::new();
    for d in &det {
        add_case_spans(&mut det_sets, d);
    }
    let truth_char_total = union_len(&truth_sets) as f64;
    let det_char_total = union_len(&det_sets) as f64;

    let micro_recall = if truth_char_total == 0.0 {
        0.0
    } else {
        micro_numerator / truth_char_total
    };
    let micro_precision = if det_char_total == 0.0 {
        0.0
    } else {
        micro_numerator / det_char_total
    };

    // Macro: average per-case and per-detection covered fractions.
    let mut per_truth_susp: Vec<Vec<Span>> = vec![Vec::new(); truth.len()];
    let mut per_truth_src: Vec<Vec<Span>> = vec![Vec::new(); truth.len()];
    let mut per_det_susp: Vec<Vec<Span>> = vec![Vec::new(); det.len()];
    let mut per_det_src: Vec<Vec<Span>> = vec![Vec::new(); det.len()];
    let mut det_count_per_truth: Vec<usize> = vec![0; truth.len()];
    for m in &matches {
        per_truth_susp[m.truth].push(m.susp);
        per_truth_src[m.truth].push(m.src);
        per_det_susp[m.det].push(m.susp);
        per_det_src[m.det].push(m.src);
        det_count_per_truth[m.truth] += 1;
    }

    let macro_recall = if truth.is_empty() {
        0.0
    } else {
        truth
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let covered = flat_union_len(&per_truth_susp[i]) + flat_union_len(&per_truth_src[i]);
                covered as f64 / case_size(c) as f64
            })
            .sum::<f64>()
            / truth.len() as f64
    };
    let macro_precision = if det.is_empty() {
        0.0
    } else {
        det.iter()
            .enumerate()
            .map(|(j, d)| {
                let covered = flat_union_len(&per_det_susp[j]) + flat_union_len(&per_det_src[j]);
                covered as f64 / case_size(d) as f64
            })
            .sum::<f64>()
            / det.len() as f64
    };

    let matched_truth = det_count_per_truth.iter().filter(|&&n| n > 0).count();
    let granularity = if matched_truth == 0 {
        1.0
    } else {
        det_count_per_truth.iter().sum::<usize>() as f64 / matched_truth as f64
    };

    let micro_plagdet = plagdet(micro_precision, micro_recall, granularity);
    let macro_plagdet = plagdet(macro_precision, macro_recall, granularity);

    let mut report = MetricReport {
        micro_plagdet,
        micro_recall,
        micro_precision,
        macro_plagdet,
        macro_recall,
        macro_precision,
        granularity,
        score: 0.0,
        counts: Counts {
            truth_cases: truth.len(),
            detections: det.len(),
            matched_truth_cases: matched_truth,
        },
    };
    report.score = aggregate_score(&report);
    report
}

/// Micro-averaged (precision, recall): character-weighted over the unions of
/// all spans.
pub fn micro_scores(truth: &[ReuseCase], detections: &[ReuseCase]) -> (f64, f64) {
    let r = evaluate(truth, detections);
    (r.micro_precision, r.micro_recall)
}

/// Macro-averaged (precision, recall): unweighted means of per-detection and
/// per-case covered fractions.
pub fn macro_scores(truth: &[ReuseCase], detections: &[ReuseCase]) -> (f64, f64) {
    let r = evaluate(truth, detections);
    (r.macro_precision, r.macro_recall)
}

/// Mean detections per matched truth case; 1 when no case is matched.
pub fn granularity(truth: &[ReuseCase], detections: &[ReuseCase]) -> f64 {
    evaluate(truth, detections).granularity
}

/// Keys the recall slices can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKey {
    Model,
    Prompt,
    Severity,
    /// Plagiarism cases versus altered paragraphs. Altered cases have no
    /// source alignment, so they are matched on the suspicious side alone;
    /// recall on them measures false-positive tendency.
    Altered,
}

impl SliceKey {
    pub fn parse(s: &str) -> Option<SliceKey> {
        match s {
            "model" => Some(SliceKey::Model),
            "prompt" => Some(SliceKey::Prompt),
            "severity" => Some(SliceKey::Severity),
            "altered" => Some(SliceKey::Altered),
            _ => None,
        }
    }
}

/// Macro recall of each truth group against the full detection set.
pub fn slice_report(
    truth: &[ReuseCase],
    detections: &[ReuseCase],
    key: SliceKey,
) -> BTreeMap<String, f64> {
    let det: Vec<&ReuseCase> = detections.iter().filter(|d| d.source.is_some()).collect();
    let mut groups: BTreeMap<String, Vec<&ReuseCase>> = BTreeMap::new();
    for case in truth {
        let group = match (key, case.kind) {
            (SliceKey::Altered, CaseKind::Plagiarism) => Some("plagiarism".to_string()),
            (SliceKey::Altered, CaseKind::Altered) => Some("altered".to_string()),
            (SliceKey::Model, CaseKind::Plagiarism) => {
                case.meta.model.map(|m| m.as_str().to_string())
            }
            (SliceKey::Prompt, CaseKind::Plagiarism | CaseKind::Altered) => {
                case.meta.prompt.map(|p| p.as_str().to_string())
            }
            (SliceKey::Severity, CaseKind::Plagiarism) => {
                case.meta.severity.map(|s| s.as_str().to_string())
            }
            _ => None,
        };
        if let Some(group) = group {
            groups.entry(group).or_default().push(case);
        } else if case.kind == CaseKind::Plagiarism {
            log::warn!("truth case without metadata for the requested slice key; skipped");
        }
    }
    groups
        .into_iter()
        .map(|(group, cases)| {
            let recall = cases
                .iter()
                .map(|c| per_case_recall(c, &det))
                .sum::<f64>()
                / cases.len() as f64;
            (group, recall)
        })
        .collect()
}

/// Covered fraction of one truth case. Altered cases count suspicious-side
/// coverage only; plagiarism cases require both-ends matches.
fn per_case_recall(case: &ReuseCase, det: &[&ReuseCase]) -> f64 {
    if case.source.is_some() {
        let mut susp = Vec::new();
        let mut src = Vec::new();
        for d in det {
            if cases_match(case, d) {
                susp.push(intersection(case.suspicious.span, d.suspicious.span).unwrap());
                src.push(
                    intersection(case.source.as_ref().unwrap().span, d.source.as_ref().unwrap().span)
                        .unwrap(),
                );
            }
        }
        (flat_union_len(&susp) + flat_union_len(&src)) as f64 / case_size(case) as f64
    } else {
        let mut susp = Vec::new();
        for d in det {
            if suspicious_sides_match(case, d) {
                susp.push(intersection(case.suspicious.span, d.suspicious.span).unwrap());
            }
        }
        flat_union_len(&susp) as f64 / case.suspicious.span.length as f64
    }
}

/// Fixed-width table with one row per named report, two decimals everywhere.
pub fn render_table(rows: &[(String, &MetricReport)]) -> String {
    let mut out = String::new();
    let name_width = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(std::iter::once("approach".len()))
        .max()
        .unwrap_or(8);
    out.push_str(&format!(
        "{:<name_width$}  {:>8} {:>6} {:>6}  {:>8} {:>6} {:>6}  {:>5} {:>6}\n",
        "approach", "plagdet", "rec", "prec", "plagdet", "rec", "prec", "gran", "score",
    ));
    out.push_str(&format!(
        "{:<name_width$}  {:>8} {:>6} {:>6}  {:>8} {:>6} {:>6}  {:>5} {:>6}\n",
        "", "(micro)", "", "", "(macro)", "", "", "", "",
    ));
    for (name, r) in rows {
        let f = |x: f64| format!("{:.2}", round2(x));
        out.push_str(&format!(
            "{:<name_width$}  {:>8} {:>6} {:>6}  {:>8} {:>6} {:>6}  {:>5} {:>6}\n",
            name,
            f(r.micro_plagdet),
            f(r.micro_recall),
            f(r.micro_precision),
            f(r.macro_plagdet),
            f(r.macro_recall),
            f(r.macro_precision),
            f(r.granularity),
            f(r.score),
        ));
    }
    out
}
