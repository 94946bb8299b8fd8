//! Brute-force reference evaluator. Every span is expanded into explicit
//! per-character sets and all set algebra happens character by character, so
//! this path shares no interval arithmetic with the optimized evaluator.

use std::collections::BTreeMap;
use textreuse::span::{CaseKind, ReuseCase};

pub struct OracleReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub granularity: f64,
    pub micro_plagdet: f64,
    pub macro_plagdet: f64,
}

/// Character sets keyed by document and side (suspicious vs source), since a
/// document can appear on both sides of different cases.
#[derive(Default)]
struct CharSets {
    sets: BTreeMap<(String, bool), Vec<bool>>,
}

impl CharSets {
    fn set(&mut self, doc: &str, source_side: bool) -> &mut Vec<bool> {
        self.sets.entry((doc.to_string(), source_side)).or_default()
    }

    fn mark_span(&mut self, doc: &str, source_side: bool, start: usize, length: usize) {
        let set = self.set(doc, source_side);
        for i in start..start + length {
            mark(set, i);
        }
    }

    fn total(&self) -> usize {
        self.sets
            .values()
            .map(|set| set.iter().filter(|&&b| b).count())
            .sum()
    }
}

fn mark(set: &mut Vec<bool>, index: usize) {
    if set.len() <= index {
        set.resize(index + 1, false);
    }
    set[index] = true;
}

fn contains(start: usize, length: usize, index: usize) -> bool {
    index >= start && index < start + length
}

/// Character indices shared by two spans, found by membership tests over one
/// span's characters.
fn common_chars(
    a_start: usize,
    a_len: usize,
    b_start: usize,
    b_len: usize,
) -> Vec<usize> {
    let mut shared = Vec::new();
    for i in a_start..a_start + a_len {
        if contains(b_start, b_len, i) {
            shared.push(i);
        }
    }
    shared
}

fn matches(truth: &ReuseCase, det: &ReuseCase) -> bool {
    let (Some(t_src), Some(d_src)) = (&truth.source, &det.source) else {
        return false;
    };
    truth.suspicious.doc == det.suspicious.doc
        && t_src.doc == d_src.doc
        && !common_chars(
            truth.suspicious.span.start,
            truth.suspicious.span.length,
            det.suspicious.span.start,
            det.suspicious.span.length,
        )
        .is_empty()
        && !common_chars(t_src.span.start, t_src.span.length, d_src.span.start, d_src.span.length)
            .is_empty()
}

fn case_chars(case: &ReuseCase) -> usize {
    case.suspicious.span.length + case.source.as_ref().map(|s| s.span.length).unwrap_or(0)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn evaluate(truth: &[ReuseCase], detections: &[ReuseCase]) -> OracleReport {
    let truth: Vec<&ReuseCase> = truth
        .iter()
        .filter(|c| c.kind == CaseKind::Plagiarism)
        .collect();
    let det: Vec<&ReuseCase> = detections.iter().filter(|d| d.source.is_some()).collect();

    // Per-truth and per-detection covered-character sets, plus the global
    // matched set feeding both micro numerators.
    let mut matched = CharSets::default();
    let mut truth_covered: Vec<CharSets> = (0..truth.len()).map(|_| CharSets::default()).collect();
    let mut det_covered: Vec<CharSets> = (0..det.len()).map(|_| CharSets::default()).collect();
    let mut match_count_per_truth = vec![0usize; truth.len()];

    for (i, t) in truth.iter().enumerate() {
        let t_src = t.source.as_ref().unwrap();
        for (j, d) in det.iter().enumerate() {
            if !matches(t, d) {
                continue;
            }
            match_count_per_truth[i] += 1;
            let d_src = d.source.as_ref().unwrap();
            let susp_shared = common_chars(
                t.suspicious.span.start,
                t.suspicious.span.length,
                d.suspicious.span.start,
                d.suspicious.span.length,
            );
            for set in [
                matched.set(&t.suspicious.doc.0, false),
                truth_covered[i].set(&t.suspicious.doc.0, false),
                det_covered[j].set(&t.suspicious.doc.0, false),
            ] {
                for &idx in &susp_shared {
                    mark(set, idx);
                }
            }
            let src_shared = common_chars(
                t_src.span.start,
                t_src.span.length,
                d_src.span.start,
                d_src.span.length,
            );
            for set in [
                matched.set(&t_src.doc.0, true),
                truth_covered[i].set(&t_src.doc.0, true),
                det_covered[j].set(&t_src.doc.0, true),
            ] {
                for &idx in &src_shared {
                    mark(set, idx);
                }
            }
        }
    }

    let mut truth_chars = CharSets::default();
    for t in &truth {
        truth_chars.mark_span(&t.suspicious.doc.0, false, t.suspicious.span.start, t.suspicious.span.length);
        let src = t.source.as_ref().unwrap();
        truth_chars.mark_span(&src.doc.0, true, src.span.start, src.span.length);
    }
    let mut det_chars = CharSets::default();
    for d in &det {
        det_chars.mark_span(&d.suspicious.doc.0, false, d.suspicious.span.start, d.suspicious.span.length);
        let src = d.source.as_ref().unwrap();
        det_chars.mark_span(&src.doc.0, true, src.span.start, src.span.length);
    }

    let numerator = matched.total() as f64;
    let truth_total = truth_chars.total() as f64;
    let det_total = det_chars.total() as f64;
    let micro_recall = if truth_total == 0.0 { 0.0 } else { numerator / truth_total };
    let micro_precision = if det_total == 0.0 { 0.0 } else { numerator / det_total };

    let macro_recall = if truth.is_empty() {
        0.0
    } else {
        truth
            .iter()
            .enumerate()
            .map(|(i, t)| truth_covered[i].total() as f64 / case_chars(t) as f64)
            .sum::<f64>()
            / truth.len() as f64
    };
    let macro_precision = if det.is_empty() {
        0.0
    } else {
        det.iter()
            .enumerate()
            .map(|(j, d)| det_covered[j].total() as f64 / case_chars(d) as f64)
            .sum::<f64>()
            / det.len() as f64
    };

    let matched_cases = match_count_per_truth.iter().filter(|&&n| n > 0).count();
    let granularity = if matched_cases == 0 {
        1.0
    } else {
        match_count_per_truth.iter().sum::<usize>() as f64 / matched_cases as f64
    };

    OracleReport {
        micro_precision,
        micro_recall,
        macro_precision,
        macro_recall,
        granularity,
        micro_plagdet: f1(micro_precision, micro_recall) / (1.0 + granularity).log2(),
        macro_plagdet: f1(macro_precision, macro_recall) / (1.0 + granularity).log2(),
    }
}
