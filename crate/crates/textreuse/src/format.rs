//! Reader/writer for the on-disk corpus layout: a `pairs` file listing
//! (suspicious, source) document names, `susp/` and `src/` text directories,
//! and one XML annotation file per suspicious document holding truth cases or
//! detections.
//!
//! The XML schema is the historical text-alignment one: a `<document
//! reference="...">` root with self-closing `<feature .../>` children. Feature
//! names `plagiarism`, `detected-plagiarism`, and `altered` map to case kinds;
//! spans are carried as `this_offset`/`this_length` plus
//! `source_reference`/`source_offset`/`source_length` (absent on altered
//! cases). Generator provenance rides along as optional `model`/`prompt`/
//! `severity` attributes that legacy tooling ignores.
//!
//! Output is canonical so golden tests and determinism checks can compare
//! bytes: features sorted by offset, fixed attribute order, UTF-8, LF.

use crate::error::{Error, Result};
use crate::span::{
    CaseKind, CaseMeta, DocSpan, DocumentRef, GeneratorModel, PromptType, ReuseCase, Severity, Span,
};
use crate::text;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// A loaded document: its corpus-visible name and full text.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: DocumentRef,
    pub text: String,
    chars: usize,
}

impl Document {
    pub fn new(id: DocumentRef, text: String) -> Document {
        let chars = text::char_len(&text);
        Document { id, text, chars }
    }

    /// Length in Unicode scalar values, the unit of all span offsets.
    pub fn char_len(&self) -> usize {
        self.chars
    }
}

/// Read a UTF-8 document; the file name becomes its id.
pub fn load_document(path: &Path) -> Result<Document> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        byte_offset: e.utf8_error().valid_up_to(),
    })?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("{}: not a readable file name", path.display())))?;
    Ok(Document::new(DocumentRef::new(name), text))
}

/// Parse the `pairs` file: one suspicious and one source document name per
/// line, whitespace separated. Duplicate pairs are legal but reported.
pub fn parse_pairs(path: &Path) -> Result<Vec<(DocumentRef, DocumentRef)>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::MalformedPairs {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected two file names, found {}", fields.len()),
            });
        }
        let pair = (DocumentRef::new(fields[0]), DocumentRef::new(fields[1]));
        if !seen.insert(pair.clone()) {
            log::warn!(
                "{}:{}: duplicate pair {} {}",
                path.display(),
                idx + 1,
                pair.0,
                pair.1
            );
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// The annotation set of one suspicious document.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDocument {
    pub reference: DocumentRef,
    pub cases: Vec<ReuseCase>,
}

fn xml_escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn feature_name(kind: CaseKind) -> &'static str {
    match kind {
        CaseKind::Plagiarism => "plagiarism",
        CaseKind::Detected => "detected-plagiarism",
        CaseKind::Altered => "altered",
    }
}

/// Render the canonical form: features sorted by span, attributes in schema
/// order, two-space indent, LF endings, trailing newline.
pub fn render_annotations(doc: &AnnotationDocument) -> String {
    let mut cases: Vec<&ReuseCase> = doc.cases.iter().collect();
    cases.sort_by_key(|c| {
        (
            c.suspicious.span.start,
            c.suspicious.span.length,
            c.source.as_ref().map(|s| s.doc.0.clone()).unwrap_or_default(),
            c.source.as_ref().map(|s| s.span.start).unwrap_or(0),
            c.source.as_ref().map(|s| s.span.length).unwrap_or(0),
            feature_name(c.kind),
        )
    });
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<document reference=\"{}\">",
        xml_escape(doc.reference.as_str())
    );
    for case in cases {
        let _ = write!(
            out,
            "  <feature name=\"{}\" this_offset=\"{}\" this_length=\"{}\"",
            feature_name(case.kind),
            case.suspicious.span.start,
            case.suspicious.span.length
        );
        if let Some(src) = &case.source {
            let _ = write!(
                out,
                " source_reference=\"{}\" source_offset=\"{}\" source_length=\"{}\"",
                xml_escape(src.doc.as_str()),
                src.span.start,
                src.span.length
            );
        }
        if let Some(model) = case.meta.model {
            let _ = write!(out, " model=\"{}\"", model.as_str());
        }
        if let Some(prompt) = case.meta.prompt {
            let _ = write!(out, " prompt=\"{}\"", prompt.as_str());
        }
        if let Some(severity) = case.meta.severity {
            let _ = write!(out, " severity=\"{}\"", severity.as_str());
        }
        out.push_str("/>\n");
    }
    out.push_str("</document>\n");
    out
}

pub fn write_annotations(doc: &AnnotationDocument, path: &Path) -> Result<()> {
    text::atomic_write(path, render_annotations(doc).as_bytes())
}

struct FeatureAttrs {
    map: BTreeMap<String, String>,
}

impl FeatureAttrs {
    fn required(&self, path: &Path, key: &str) -> Result<&str> {
        self.map.get(key).map(|s| s.as_str()).ok_or_else(|| Error::MissingAttribute {
            path: path.to_path_buf(),
            attribute: key.to_string(),
        })
    }

    fn number(&self, path: &Path, key: &str) -> Result<usize> {
        let raw = self.required(path, key)?;
        raw.parse().map_err(|_| Error::MalformedXml {
            path: path.to_path_buf(),
            reason: format!("attribute `{key}` is not a non-negative integer: `{raw}`"),
        })
    }
}

fn collect_attrs(path: &Path, element: &BytesStart) -> Result<FeatureAttrs> {
    let mut map = BTreeMap::new();
    for attr in element.attributes() {
        let attr = attr.map_err(|e| Error::MalformedXml {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| Error::MalformedXml {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .into_owned();
        map.insert(key, value);
    }
    Ok(FeatureAttrs { map })
}

fn parse_span(attrs: &FeatureAttrs, path: &Path, offset_key: &str, length_key: &str) -> Result<Span> {
    let start = attrs.number(path, offset_key)?;
    let length = attrs.number(path, length_key)?;
    if length == 0 {
        return Err(Error::MalformedXml {
            path: path.to_path_buf(),
            reason: format!("zero-length span at {offset_key}={start}"),
        });
    }
    Ok(Span::new(start, length))
}

fn parse_feature(path: &Path, reference: &DocumentRef, element: &BytesStart) -> Result<Option<ReuseCase>> {
    let attrs = collect_attrs(path, element)?;
    let name = attrs.required(path, "name")?;
    let kind = match name {
        "plagiarism" => CaseKind::Plagiarism,
        "detected-plagiarism" => CaseKind::Detected,
        "altered" => CaseKind::Altered,
        other => {
            log::warn!("{}: skipping unknown feature `{}`", path.display(), other);
            return Ok(None);
        }
    };
    let suspicious = DocSpan::new(
        reference.clone(),
        parse_span(&attrs, path, "this_offset", "this_length")?,
    );
    let source = if kind == CaseKind::Altered {
        if attrs.map.contains_key("source_reference") {
            log::warn!(
                "{}: altered feature carries source attributes; ignoring them",
                path.display()
            );
        }
        None
    } else {
        let source_ref = attrs.required(path, "source_reference")?;
        if source_ref.is_empty() {
            return Err(Error::MalformedXml {
                path: path.to_path_buf(),
                reason: "empty source_reference".into(),
            });
        }
        Some(DocSpan::new(
            DocumentRef::new(source_ref),
            parse_span(&attrs, path, "source_offset", "source_length")?,
        ))
    };
    let parse_meta = |key: &str| attrs.map.get(key).map(|s| s.as_str());
    let meta = CaseMeta {
        model: parse_meta("model").and_then(|v| {
            let parsed = GeneratorModel::parse(v);
            if parsed.is_none() {
                log::warn!("{}: unknown model tag `{}`", path.display(), v);
            }
            parsed
        }),
        prompt: parse_meta("prompt").and_then(|v| {
            let parsed = PromptType::parse(v);
            if parsed.is_none() {
                log::warn!("{}: unknown prompt tag `{}`", path.display(), v);
            }
            parsed
        }),
        severity: parse_meta("severity").and_then(|v| {
            let parsed = Severity::parse(v);
            if parsed.is_none() {
                log::warn!("{}: unknown severity tag `{}`", path.display(), v);
            }
            parsed
        }),
    };
    Ok(Some(ReuseCase {
        kind,
        suspicious,
        source,
        meta,
    }))
}

/// Parse annotation XML from a string; `path` is used in error messages only.
pub fn parse_annotations_str(xml: &str, path: &Path) -> Result<AnnotationDocument> {
    let mut reader = Reader::from_str(xml);
    let mut reference: Option<DocumentRef> = None;
    let mut cases = Vec::new();
    loop {
        let event = reader.read_event().map_err(|e| Error::MalformedXml {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        match event {
            Event::Start(e) | Event::Empty(e) => match e.name().as_ref() {
                b"document" => {
                    let attrs = collect_attrs(path, &e)?;
                    let value = attrs.required(path, "reference")?;
                    if value.is_empty() {
                        return Err(Error::MalformedXml {
                            path: path.to_path_buf(),
                            reason: "empty document reference".into(),
                        });
                    }
                    reference = Some(DocumentRef::new(value));
                }
                b"feature" => {
                    let reference = reference.as_ref().ok_or_else(|| Error::MalformedXml {
                        path: path.to_path_buf(),
                        reason: "feature outside a <document> element".into(),
                    })?;
                    if let Some(case) = parse_feature(path, reference, &e)? {
                        cases.push(case);
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    let reference = reference.ok_or_else(|| Error::MalformedXml {
        path: path.to_path_buf(),
        reason: "no <document> element".into(),
    })?;
    Ok(AnnotationDocument { reference, cases })
}

pub fn parse_annotations(path: &Path) -> Result<AnnotationDocument> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let xml = String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        byte_offset: e.utf8_error().valid_up_to(),
    })?;
    parse_annotations_str(&xml, path)
}

/// Document name minus its final extension; annotation files are named
/// `<stem>.xml`.
pub fn doc_stem(doc: &DocumentRef) -> &str {
    match doc.as_str().rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() => stem,
        _ => doc.as_str(),
    }
}

/// Directory layout of one corpus (or one split of a generated corpus).
#[derive(Debug, Clone)]
pub struct CorpusLayout {
    pub root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> CorpusLayout {
        CorpusLayout { root: root.into() }
    }

    pub fn pairs_file(&self) -> PathBuf {
        self.root.join("pairs")
    }

    pub fn susp_dir(&self) -> PathBuf {
        self.root.join("susp")
    }

    pub fn src_dir(&self) -> PathBuf {
        self.root.join("src")
    }

    pub fn truth_dir(&self) -> PathBuf {
        self.root.join("truth")
    }

    /// Truth annotations for one suspicious document: `truth/<stem>.xml`,
    /// falling back to `<stem>.xml` beside the pairs file for corpora that
    /// keep annotations in the root.
    pub fn truth_file(&self, susp: &DocumentRef) -> PathBuf {
        let name = format!("{}.xml", doc_stem(susp));
        let in_truth_dir = self.truth_dir().join(&name);
        if in_truth_dir.exists() || !self.root.join(&name).exists() {
            in_truth_dir
        } else {
            self.root.join(&name)
        }
    }
}

/// Annotation file for one suspicious document inside a detections directory.
pub fn detection_file(dir: &Path, susp: &DocumentRef) -> PathBuf {
    dir.join(format!("{}.xml", doc_stem(susp)))
}

/// A fully loaded corpus: the pair list plus every referenced document.
#[derive(Debug)]
pub struct Corpus {
    pub layout: CorpusLayout,
    pub pairs: Vec<(DocumentRef, DocumentRef)>,
    pub susp: BTreeMap<DocumentRef, Document>,
    pub src: BTreeMap<DocumentRef, Document>,
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Corpus> {
        let layout = CorpusLayout::new(root);
        if !root.is_dir() {
            return Err(Error::MissingInput(format!(
                "corpus directory {} does not exist",
                root.display()
            )));
        }
        let pairs_path = layout.pairs_file();
        if !pairs_path.is_file() {
            return Err(Error::MissingInput(format!(
                "pairs file {} does not exist",
                pairs_path.display()
            )));
        }
        let pairs = parse_pairs(&pairs_path)?;
        let mut susp = BTreeMap::new();
        let mut src = BTreeMap::new();
        for (susp_ref, src_ref) in &pairs {
            if !susp.contains_key(susp_ref) {
                let path = layout.susp_dir().join(susp_ref.as_str());
                if !path.is_file() {
                    return Err(Error::MissingInput(format!(
                        "suspicious document {} does not exist",
                        path.display()
                    )));
                }
                susp.insert(susp_ref.clone(), load_document(&path)?);
            }
            if !src.contains_key(src_ref) {
                let path = layout.src_dir().join(src_ref.as_str());
                if !path.is_file() {
                    return Err(Error::MissingInput(format!(
                        "source document {} does not exist",
                        path.display()
                    )));
                }
                src.insert(src_ref.clone(), load_document(&path)?);
            }
        }
        Ok(Corpus {
            layout,
            pairs,
            susp,
            src,
        })
    }

    /// Unique suspicious documents in first-appearance order.
    pub fn suspicious_order(&self) -> Vec<DocumentRef> {
        let mut seen = std::collections::BTreeSet::new();
        let mut order = Vec::new();
        for (susp_ref, _) in &self.pairs {
            if seen.insert(susp_ref.clone()) {
                order.push(susp_ref.clone());
            }
        }
        order
    }

    fn validate_case(&self, case: &ReuseCase, path: &Path) -> Result<()> {
        let susp_doc = self.susp.get(&case.suspicious.doc).ok_or_else(|| {
            Error::MalformedXml {
                path: path.to_path_buf(),
                reason: format!("unknown suspicious document `{}`", case.suspicious.doc),
            }
        })?;
        let span = case.suspicious.span;
        if span.end() > susp_doc.char_len() {
            return Err(Error::SpanOutOfBounds {
                doc: case.suspicious.doc.to_string(),
                start: span.start,
                end: span.end(),
                doc_len: susp_doc.char_len(),
            });
        }
        if let Some(src_side) = &case.source {
            let src_doc = self.src.get(&src_side.doc).ok_or_else(|| Error::MalformedXml {
                path: path.to_path_buf(),
                reason: format!("unknown source document `{}`", src_side.doc),
            })?;
            if src_side.span.end() > src_doc.char_len() {
                return Err(Error::SpanOutOfBounds {
                    doc: src_side.doc.to_string(),
                    start: src_side.span.start,
                    end: src_side.span.end(),
                    doc_len: src_doc.char_len(),
                });
            }
        }
        Ok(())
    }

    /// Load and validate truth cases for every suspicious document in the
    /// pair list. A missing truth file is a missing input (blind splits have
    /// none).
    pub fn load_truth(&self) -> Result<Vec<ReuseCase>> {
        self.load_truth_files(|susp_ref| self.layout.truth_file(susp_ref))
    }

    /// Load truth from an explicit directory of `<stem>.xml` files instead
    /// of the corpus's own truth location.
    pub fn load_truth_in(&self, dir: &Path) -> Result<Vec<ReuseCase>> {
        self.load_truth_files(|susp_ref| detection_file(dir, susp_ref))
    }

    fn load_truth_files(
        &self,
        path_for: impl Fn(&DocumentRef) -> PathBuf,
    ) -> Result<Vec<ReuseCase>> {
        let mut cases = Vec::new();
        for susp_ref in self.suspicious_order() {
            let path = path_for(&susp_ref);
            if !path.is_file() {
                return Err(Error::MissingInput(format!(
                    "truth file {} does not exist",
                    path.display()
                )));
            }
            let doc = parse_annotations(&path)?;
            if doc.reference != susp_ref {
                return Err(Error::MalformedXml {
                    path,
                    reason: format!(
                        "document reference `{}` does not match file for `{}`",
                        doc.reference, susp_ref
                    ),
                });
            }
            for case in &doc.cases {
                self.validate_case(case, &path)?;
            }
            cases.extend(doc.cases);
        }
        Ok(cases)
    }

    /// Load detections for every suspicious document. Cases are coerced to
    /// kind `Detected` (a detections directory holds detections whatever the
    /// feature name says), which lets a truth directory double as a perfect
    /// detector. Altered features carry no source alignment and are skipped.
    /// A missing per-document file means that document has no detections.
    pub fn load_detections(&self, dir: &Path) -> Result<Vec<ReuseCase>> {
        if !dir.is_dir() {
            return Err(Error::MissingInput(format!(
                "detections directory {} does not exist",
                dir.display()
            )));
        }
        let mut cases = Vec::new();
        for susp_ref in self.suspicious_order() {
            let path = detection_file(dir, &susp_ref);
            if !path.is_file() {
                log::warn!(
                    "{}: no detection file for {}; treating as zero detections",
                    path.display(),
                    susp_ref
                );
                continue;
            }
            let doc = parse_annotations(&path)?;
            if doc.reference != susp_ref {
                return Err(Error::MalformedXml {
                    path,
                    reason: format!(
                        "document reference `{}` does not match file for `{}`",
                        doc.reference, susp_ref
                    ),
                });
            }
            for mut case in doc.cases {
                if case.source.is_none() {
                    log::warn!(
                        "{}: skipping sourceless feature in detections",
                        path.display()
                    );
                    continue;
                }
                self.validate_case(&case, &path)?;
                case.kind = CaseKind::Detected;
                cases.push(case);
            }
        }
        Ok(cases)
    }
}
