//! Character-span algebra and the truth/detection case model.
//!
//! Offsets count Unicode scalar values from the document start, never bytes.
//! Spans are half-open `[start, start + length)`, so adjacent spans are
//! disjoint and `offset + length` serialization round-trips exactly.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A non-empty character interval inside one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub length: usize,
}

impl Span {
    /// `length` must be ≥ 1; zero-length spans carry no metric weight and are
    /// rejected wherever spans are parsed.
    pub fn new(start: usize, length: usize) -> Span {
        debug_assert!(length >= 1, "zero-length span");
        Span { start, length }
    }

    /// Exclusive end offset.
    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end()
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

/// Opaque name of a document file within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocumentRef(pub String);

impl DocumentRef {
    pub fn new(id: impl Into<String>) -> DocumentRef {
        DocumentRef(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocumentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    /// Ground-truth reuse with a source alignment.
    Plagiarism,
    /// Paraphrased in place from the document's own prior text; no source
    /// alignment exists, and detecting one is a false positive.
    Altered,
    /// Reported by a detector.
    Detected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorModel {
    Llama,
    Deepseek,
    Mistral,
}

impl GeneratorModel {
    pub const ALL: [GeneratorModel; 3] = [
        GeneratorModel::Llama,
        GeneratorModel::Deepseek,
        GeneratorModel::Mistral,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorModel::Llama => "llama",
            GeneratorModel::Deepseek => "deepseek",
            GeneratorModel::Mistral => "mistral",
        }
    }

    pub fn parse(s: &str) -> Option<GeneratorModel> {
        match s {
            "llama" => Some(GeneratorModel::Llama),
            "deepseek" => Some(GeneratorModel::Deepseek),
            "mistral" => Some(GeneratorModel::Mistral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptType {
    Simple,
    Default,
    Complex,
}

impl PromptType {
    pub const ALL: [PromptType; 3] = [PromptType::Simple, PromptType::Default, PromptType::Complex];

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptType::Simple => "simple",
            PromptType::Default => "default",
            PromptType::Complex => "complex",
        }
    }

    pub fn parse(s: &str) -> Option<PromptType> {
        match s {
            "simple" => Some(PromptType::Simple),
            "default" => Some(PromptType::Default),
            "complex" => Some(PromptType::Complex),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Low, Severity::Medium, Severity::High];

    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        match s {
            "low" => Some(Severity::Low),
            "medium" => Some(Severity::Medium),
            "high" => Some(Severity::High),
            _ => None,
        }
    }

    /// Inclusive bounds on the fraction of paragraphs replaced.
    pub fn band(&self) -> (f64, f64) {
        match self {
            Severity::Low => (0.20, 0.40),
            Severity::Medium => (0.40, 0.60),
            Severity::High => (0.70, 1.00),
        }
    }
}

/// Provenance carried by generated truth cases and used for slice reports.
/// All three fields are set on generated plagiarism cases; altered cases carry
/// only the prompt type; detections carry none.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaseMeta {
    pub model: Option<GeneratorModel>,
    pub prompt: Option<PromptType>,
    pub severity: Option<Severity>,
}

impl CaseMeta {
    pub const NONE: CaseMeta = CaseMeta {
        model: None,
        prompt: None,
        severity: None,
    };
}

/// One end of a case: a span inside a named document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DocSpan {
    pub doc: DocumentRef,
    pub span: Span,
}

impl DocSpan {
    pub fn new(doc: DocumentRef, span: Span) -> DocSpan {
        DocSpan { doc, span }
    }
}

/// One truth or detected alignment. `source` is absent exactly when
/// `kind == Altered`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReuseCase {
    pub kind: CaseKind,
    pub suspicious: DocSpan,
    pub source: Option<DocSpan>,
    pub meta: CaseMeta,
}

impl ReuseCase {
    pub fn plagiarism(suspicious: DocSpan, source: DocSpan, meta: CaseMeta) -> ReuseCase {
        ReuseCase {
            kind: CaseKind::Plagiarism,
            suspicious,
            source: Some(source),
            meta,
        }
    }

    pub fn detected(suspicious: DocSpan, source: DocSpan) -> ReuseCase {
        ReuseCase {
            kind: CaseKind::Detected,
            suspicious,
            source: Some(source),
            meta: CaseMeta::NONE,
        }
    }

    /// Altered cases never carry a source or a severity.
    pub fn altered(suspicious: DocSpan, meta: CaseMeta) -> ReuseCase {
        ReuseCase {
            kind: CaseKind::Altered,
            suspicious,
            source: None,
            meta: CaseMeta {
                severity: None,
                ..meta
            },
        }
    }
}

/// Size of the intersection of two spans, in characters. Commutative;
/// disjoint or merely adjacent spans yield 0.
pub fn overlap_length(a: Span, b: Span) -> usize {
    let lo = a.start.max(b.start);
    let hi = a.end().min(b.end());
    hi.saturating_sub(lo)
}

/// The intersection span, or None when the spans do not overlap.
pub fn intersection(a: Span, b: Span) -> Option<Span> {
    let lo = a.start.max(b.start);
    let hi = a.end().min(b.end());
    (hi > lo).then(|| Span::new(lo, hi - lo))
}

/// A detection counts toward a truth case only when it overlaps the case on
/// both ends: same suspicious document with overlapping suspicious spans, and
/// same source document with overlapping source spans.
pub fn cases_match(truth: &ReuseCase, det: &ReuseCase) -> bool {
    let (Some(ts), Some(ds)) = (&truth.source, &det.source) else {
        return false;
    };
    truth.suspicious.doc == det.suspicious.doc
        && overlap_length(truth.suspicious.span, det.suspicious.span) > 0
        && ts.doc == ds.doc
        && overlap_length(ts.span, ds.span) > 0
}

/// Suspicious-side variant of [`cases_match`] used when the truth case has no
/// source alignment (altered paragraphs).
pub fn suspicious_sides_match(truth: &ReuseCase, det: &ReuseCase) -> bool {
    truth.suspicious.doc == det.suspicious.doc
        && overlap_length(truth.suspicious.span, det.suspicious.span) > 0
}

/// Merge spans within one document: any two inputs separated by at most
/// `max_gap` characters (overlapping counts as gap 0) end up in one output
/// span. Output is sorted and pairwise separated by more than `max_gap`.
pub fn merge_spans(spans: &[Span], max_gap: usize) -> Vec<Span> {
    if spans.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<Span> = spans.to_vec();
    sorted.sort();
    let mut out: Vec<Span> = Vec::with_capacity(sorted.len());
    let mut cur = sorted[0];
    for &s in &sorted[1..] {
        let gap = s.start.saturating_sub(cur.end());
        if gap <= max_gap {
            let end = cur.end().max(s.end());
            cur.length = end - cur.start;
        } else {
            out.push(cur);
            cur = s;
        }
    }
    out.push(cur);
    out
}
