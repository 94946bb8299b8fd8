//! Similarity-based detector family: chunk both documents, vectorize the
//! chunks (internal TF-IDF or externally computed embeddings), align each
//! suspicious chunk to its most similar source chunk, keep alignments above a
//! threshold, optionally second-stage filter by token Jaccard overlap, and
//! merge nearby detections into blocks. Threshold calibration sweeps a grid
//! and keeps the macro-plagdet maximizer.

use crate::error::{Error, Result};
use crate::eval;
use crate::exec;
use crate::format::{Corpus, Document};
use crate::lexical::tokenize_normalize;
use crate::span::{CaseKind, CaseMeta, DocSpan, DocumentRef, ReuseCase, Span};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

/// A contiguous text unit with its character extent in the original document.
/// The span is trimmed to the non-whitespace content; `text` is the exact
/// substring it addresses.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub span: Span,
    pub text: String,
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkMode {
    Paragraph,
    Sentence,
}

impl ChunkMode {
    pub fn parse(s: &str) -> Option<ChunkMode> {
        match s {
            "paragraph" => Some(ChunkMode::Paragraph),
            "sentence" => Some(ChunkMode::Sentence),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ChunkMode::Paragraph => "paragraph",
            ChunkMode::Sentence => "sentence",
        }
    }
}

/// Char ranges of the lines of `text`, excluding terminators; both LF and
/// CRLF line endings are understood without rewriting the text.
fn line_ranges(chars: &[char]) -> Vec<(usize, usize)> {
    let mut lines = Vec::new();
    let mut line_start = 0usize;
    for i in 0..=chars.len() {
        if i == chars.len() || chars[i] == '\n' {
            let mut end = i;
            if end > line_start && chars[end - 1] == '\r' {
                end -= 1;
            }
            lines.push((line_start, end));
            line_start = i + 1;
        }
    }
    lines
}

fn trimmed_extent(chars: &[char], start: usize, end: usize) -> Option<(usize, usize)> {
    let first = (start..end).find(|&i| !chars[i].is_whitespace())?;
    let last = (start..end).rev().find(|&i| !chars[i].is_whitespace())?;
    Some((first, last + 1))
}

fn chunk_from_extent(chars: &[char], start: usize, end: usize) -> Chunk {
    Chunk {
        span: Span::new(start, end - start),
        text: chars[start..end].iter().collect(),
        vector: None,
    }
}

fn paragraph_extents(chars: &[char]) -> Vec<(usize, usize)> {
    let lines = line_ranges(chars);
    let mut extents = Vec::new();
    let mut block_start: Option<usize> = None;
    let mut block_end = 0usize;
    for &(ls, le) in &lines {
        let blank = (ls..le).all(|i| chars[i].is_whitespace());
        if blank {
            if let Some(bs) = block_start.take() {
                if let Some(extent) = trimmed_extent(chars, bs, block_end) {
                    extents.push(extent);
                }
            }
        } else {
            block_start.get_or_insert(ls);
            block_end = le;
        }
    }
    if let Some(bs) = block_start {
        if let Some(extent) = trimmed_extent(chars, bs, block_end) {
            extents.push(extent);
        }
    }
    extents
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn sentence_extents(chars: &[char]) -> Vec<(usize, usize)> {
    let mut extents = Vec::new();
    let mut sent_start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if is_sentence_end(chars[i]) {
            let mut punct_end = i + 1;
            while punct_end < chars.len() && is_sentence_end(chars[punct_end]) {
                punct_end += 1;
            }
            let mut next = punct_end;
            while next < chars.len() && chars[next].is_whitespace() {
                next += 1;
            }
            let boundary = next > punct_end
                && next < chars.len()
                && (chars[next].is_uppercase() || chars[next].is_ascii_digit());
            if boundary {
                if let Some(extent) = trimmed_extent(chars, sent_start, punct_end) {
                    extents.push(extent);
                }
                sent_start = next;
                i = next;
                continue;
            }
            i = punct_end;
        } else {
            i += 1;
        }
    }
    if let Some(extent) = trimmed_extent(chars, sent_start, chars.len()) {
        extents.push(extent);
    }
    extents
}

/// Split a document into chunks (vectors unset). Paragraph mode splits on one
/// or more blank lines; sentence mode splits after sentence-ending
/// punctuation followed by whitespace and an uppercase letter or digit.
/// Chunks shorter than `min_chunk_chars` are attached to the preceding chunk
/// (a short leading chunk joins the one after it).
pub fn chunk_document(text: &str, mode: ChunkMode, min_chunk_chars: usize) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    let extents = match mode {
        ChunkMode::Paragraph => paragraph_extents(&chars),
        ChunkMode::Sentence => sentence_extents(&chars),
    };
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(extents.len());
    for (start, end) in extents {
        let short = end - start < min_chunk_chars;
        match merged.last_mut() {
            Some(last) if short => last.1 = end,
            _ => merged.push((start, end)),
        }
    }
    if merged.len() > 1 && merged[0].1 - merged[0].0 < min_chunk_chars {
        let (first, second) = (merged[0], merged[1]);
        merged[1] = (first.0, second.1);
        merged.remove(0);
    }
    merged
        .into_iter()
        .map(|(s, e)| chunk_from_extent(&chars, s, e))
        .collect()
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Assign TF-IDF vectors over the combined vocabulary of both documents'
/// chunks: raw term counts weighted by `ln((1 + N) / (1 + df)) + 1` where N
/// counts all chunks on both sides, then L2-normalized.
pub fn tfidf_vectors(src_chunks: &mut [Chunk], susp_chunks: &mut [Chunk]) {
    let token_counts = |chunk: &Chunk| -> HashMap<String, usize> {
        let mut counts = HashMap::new();
        for token in tokenize_normalize(&chunk.text) {
            *counts.entry(token.text).or_insert(0) += 1;
        }
        counts
    };
    let all_counts: Vec<HashMap<String, usize>> = src_chunks
        .iter()
        .chain(susp_chunks.iter())
        .map(token_counts)
        .collect();

    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    let mut df: Vec<usize> = Vec::new();
    for counts in &all_counts {
        let mut terms: Vec<&str> = counts.keys().map(|s| s.as_str()).collect();
        terms.sort_unstable();
        for term in terms {
            let next_id = vocab.len();
            let id = *vocab.entry(term).or_insert(next_id);
            if id == df.len() {
                df.push(0);
            }
            df[id] += 1;
        }
    }
    let n = all_counts.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let dim = vocab.len();
    for (chunk, counts) in src_chunks
        .iter_mut()
        .chain(susp_chunks.iter_mut())
        .zip(&all_counts)
    {
        let mut v = vec![0.0; dim];
        for (term, &count) in counts {
            let id = vocab[term.as_str()];
            v[id] = count as f64 * idf[id];
        }
        l2_normalize(&mut v);
        chunk.vector = Some(v);
    }
}

#[derive(Debug, Deserialize)]
struct VectorRecord {
    doc: String,
    chunk: usize,
    vector: Vec<f64>,
}

/// Externally computed chunk vectors, keyed by (document id, chunk index).
/// The file holds one JSON record per line: `{"doc": ..., "chunk": ...,
/// "vector": [...]}`. Vectors are L2-normalized on load.
#[derive(Debug, Clone)]
pub struct VectorStore {
    map: HashMap<(String, usize), Vec<f64>>,
    pub dim: usize,
}

impl VectorStore {
    pub fn load(path: &Path) -> Result<VectorStore> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = HashMap::new();
        let mut dim: Option<usize> = None;
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: VectorRecord =
                serde_json::from_str(line).map_err(|e| Error::Config(format!(
                    "{}:{}: bad vector record: {e}",
                    path.display(),
                    idx + 1
                )))?;
            if record.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::BadVector {
                    doc: record.doc,
                    chunk: record.chunk,
                    reason: format!("non-finite component ({}:{})", path.display(), idx + 1),
                });
            }
            let expected = *dim.get_or_insert(record.vector.len());
            if record.vector.len() != expected {
                return Err(Error::VectorDimension {
                    doc: record.doc,
                    chunk: record.chunk,
                    got: record.vector.len(),
                    expected,
                });
            }
            let mut v = record.vector;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::BadVector {
                    doc: record.doc,
                    chunk: record.chunk,
                    reason: "zero vector cannot be normalized".into(),
                });
            }
            l2_normalize(&mut v);
            map.insert((record.doc, record.chunk), v);
        }
        Ok(VectorStore {
            map,
            dim: dim.unwrap_or(0),
        })
    }

    /// Look up one stored vector by (document id, chunk index).
    pub fn get(&self, doc: &DocumentRef, chunk: usize) -> Result<&Vec<f64>> {
        self.map
            .get(&(doc.as_str().to_string(), chunk))
            .ok_or_else(|| Error::MissingVector {
                doc: doc.as_str().to_string(),
                chunk,
            })
    }

    /// Attach this store's vectors to a document's chunks by index.
    pub fn assign(&self, doc: &DocumentRef, chunks: &mut [Chunk]) -> Result<()> {
        for (idx, chunk) in chunks.iter_mut().enumerate() {
            chunk.vector = Some(self.get(doc, idx)?.clone());
        }
        Ok(())
    }
}

/// Where chunk vectors come from.
#[derive(Debug, Clone)]
pub enum VectorSource {
    TfIdf,
    External(VectorStore),
}

/// Best-source alignment of one suspicious chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentCandidate {
    pub susp: usize,
    pub src: usize,
    pub similarity: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// For every suspicious chunk, its most similar source chunk (ties broken
/// toward the lower source index). No threshold is applied here.
pub fn align_candidates(src_chunks: &[Chunk], susp_chunks: &[Chunk]) -> Vec<AlignmentCandidate> {
    let mut candidates = Vec::new();
    for (j, susp) in susp_chunks.iter().enumerate() {
        let Some(susp_vec) = &susp.vector else { continue };
        let mut best: Option<(usize, f64)> = None;
        for (i, src) in src_chunks.iter().enumerate() {
            let Some(src_vec) = &src.vector else { continue };
            let sim = cosine(src_vec, susp_vec);
            if best.map_or(true, |(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
        if let Some((i, sim)) = best {
            candidates.push(AlignmentCandidate {
                susp: j,
                src: i,
                similarity: sim,
            });
        }
    }
    candidates
}

/// Thresholded alignment: each candidate at or above `threshold` becomes a
/// detected case whose spans are the chunk extents.
pub fn align(
    src_chunks: &[Chunk],
    susp_chunks: &[Chunk],
    threshold: f64,
    src_doc: &DocumentRef,
    susp_doc: &DocumentRef,
) -> Vec<ReuseCase> {
    align_candidates(src_chunks, susp_chunks)
        .into_iter()
        .filter(|c| c.similarity >= threshold)
        .map(|c| {
            ReuseCase::detected(
                DocSpan::new(susp_doc.clone(), susp_chunks[c.susp].span),
                DocSpan::new(src_doc.clone(), src_chunks[c.src].span),
            )
        })
        .collect()
}

fn token_set(text: &str) -> HashSet<String> {
    tokenize_normalize(text).into_iter().map(|t| t.text).collect()
}

fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Keep cases whose span texts share enough vocabulary: word-set Jaccard
/// similarity at or above `min_jaccard`.
pub fn jaccard_filter(
    cases: Vec<ReuseCase>,
    src_text: &str,
    susp_text: &str,
    min_jaccard: f64,
) -> Vec<ReuseCase> {
    cases
        .into_iter()
        .filter(|case| {
            let Some(src_side) = &case.source else { return false };
            let susp_tokens = crate::text::slice(susp_text, case.suspicious.span)
                .map(token_set)
                .unwrap_or_default();
            let src_tokens = crate::text::slice(src_text, src_side.span)
                .map(token_set)
                .unwrap_or_default();
            jaccard(&susp_tokens, &src_tokens) >= min_jaccard
        })
        .collect()
}

fn span_gap(a: Span, b: Span) -> usize {
    if a.start > b.end() {
        a.start - b.end()
    } else if b.start > a.end() {
        b.start - a.end()
    } else {
        0
    }
}

fn hull(a: Span, b: Span) -> Span {
    let start = a.start.min(b.start);
    let end = a.end().max(b.end());
    Span::new(start, end - start)
}

/// Merge detections whose suspicious spans AND source spans are both within
/// `char_gap` of each other (transitively), replacing each cluster with the
/// span hulls on both sides. Merging repeats until stable, since grown hulls
/// can come within the gap of further cases; the result is idempotent.
/// Merged cases shorter than `min_len_chars` on the suspicious side are
/// dropped at the end.
pub fn merge_detections(
    cases: Vec<ReuseCase>,
    char_gap: usize,
    min_len_chars: usize,
) -> Vec<ReuseCase> {
    // Group by document pair so unrelated pairs never merge.
    let mut by_pair: BTreeMap<(DocumentRef, DocumentRef), Vec<ReuseCase>> = BTreeMap::new();
    for case in cases {
        let Some(src) = &case.source else { continue };
        by_pair
            .entry((case.suspicious.doc.clone(), src.doc.clone()))
            .or_default()
            .push(case);
    }

    let mut out = Vec::new();
    for ((susp_doc, src_doc), group) in by_pair {
        let mut spans: Vec<(Span, Span)> = group
            .iter()
            .map(|c| (c.suspicious.span, c.source.as_ref().unwrap().span))
            .collect();
        loop {
            let mut uf: Vec<usize> = (0..spans.len()).collect();
            fn find(uf: &mut [usize], x: usize) -> usize {
                if uf[x] != x {
                    let root = find(uf, uf[x]);
                    uf[x] = root;
                }
                uf[x]
            }
            let mut changed = false;
            for i in 0..spans.len() {
                for j in (i + 1)..spans.len() {
                    if span_gap(spans[i].0, spans[j].0) <= char_gap
                        && span_gap(spans[i].1, spans[j].1) <= char_gap
                    {
                        let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
                        if ri != rj {
                            uf[ri] = rj;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
            let mut clusters: BTreeMap<usize, (Span, Span)> = BTreeMap::new();
            for i in 0..spans.len() {
                let root = find(&mut uf, i);
                clusters
                    .entry(root)
                    .and_modify(|(s, o)| {
                        *s = hull(*s, spans[i].0);
                        *o = hull(*o, spans[i].1);
                    })
                    .or_insert(spans[i]);
            }
            spans = clusters.into_values().collect();
        }
        spans.sort();
        for (susp_span, src_span) in spans {
            if susp_span.length < min_len_chars {
                continue;
            }
            out.push(ReuseCase {
                kind: CaseKind::Detected,
                suspicious: DocSpan::new(susp_doc.clone(), susp_span),
                source: Some(DocSpan::new(src_doc.clone(), src_span)),
                meta: CaseMeta::NONE,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorParams {
    pub chunk_mode: ChunkMode,
    /// Chunks below this length are attached to their neighbor before
    /// vectorization; 1 disables the attachment.
    pub min_chunk_chars: usize,
    pub threshold: f64,
    /// Second-stage word-overlap filter; None disables it.
    pub min_jaccard: Option<f64>,
    pub char_gap: usize,
    pub min_len_chars: usize,
}

impl Default for VectorParams {
    fn default() -> Self {
        VectorParams {
            chunk_mode: ChunkMode::Paragraph,
            min_chunk_chars: 1,
            threshold: 0.75,
            min_jaccard: None,
            char_gap: 30,
            min_len_chars: 100,
        }
    }
}

/// One thresholdable alignment: chunk spans, similarity, and whether the
/// Jaccard filter (threshold-independent) lets it through.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub susp_span: Span,
    pub src_span: Span,
    pub similarity: f64,
    pub jaccard_ok: bool,
}

/// Chunk, vectorize, and align one document pair, without applying the
/// similarity threshold. Calibration reuses these across the whole grid.
pub fn pair_candidates(
    src: &Document,
    susp: &Document,
    params: &VectorParams,
    source: &VectorSource,
) -> Result<Vec<Candidate>> {
    let mut src_chunks = chunk_document(&src.text, params.chunk_mode, params.min_chunk_chars);
    let mut susp_chunks = chunk_document(&susp.text, params.chunk_mode, params.min_chunk_chars);
    match source {
        VectorSource::TfIdf => tfidf_vectors(&mut src_chunks, &mut susp_chunks),
        VectorSource::External(store) => {
            store.assign(&src.id, &mut src_chunks)?;
            store.assign(&susp.id, &mut susp_chunks)?;
        }
    }
    Ok(align_candidates(&src_chunks, &susp_chunks)
        .into_iter()
        .map(|c| {
            let susp_span = susp_chunks[c.susp].span;
            let src_span = src_chunks[c.src].span;
            let jaccard_ok = match params.min_jaccard {
                None => true,
                Some(min) => {
                    let susp_tokens = token_set(&susp_chunks[c.susp].text);
                    let src_tokens = token_set(&src_chunks[c.src].text);
                    jaccard(&susp_tokens, &src_tokens) >= min
                }
            };
            Candidate {
                susp_span,
                src_span,
                similarity: c.similarity,
                jaccard_ok,
            }
        })
        .collect())
}

/// Apply a threshold to precomputed candidates and merge the survivors.
pub fn cases_at_threshold(
    candidates: &[Candidate],
    threshold: f64,
    params: &VectorParams,
    src_doc: &DocumentRef,
    susp_doc: &DocumentRef,
) -> Vec<ReuseCase> {
    let kept: Vec<ReuseCase> = candidates
        .iter()
        .filter(|c| c.similarity >= threshold && c.jaccard_ok)
        .map(|c| {
            ReuseCase::detected(
                DocSpan::new(susp_doc.clone(), c.susp_span),
                DocSpan::new(src_doc.clone(), c.src_span),
            )
        })
        .collect();
    merge_detections(kept, params.char_gap, params.min_len_chars)
}

/// The full vector pipeline for one document pair at `params.threshold`.
pub fn detect_vector(
    src: &Document,
    susp: &Document,
    params: &VectorParams,
    source: &VectorSource,
) -> Result<Vec<ReuseCase>> {
    let candidates = pair_candidates(src, susp, params, source)?;
    Ok(cases_at_threshold(
        &candidates,
        params.threshold,
        params,
        &src.id,
        &susp.id,
    ))
}

/// Inclusive threshold grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            start: 0.50,
            end: 0.99,
            step: 0.01,
        }
    }
}

impl CalibrationGrid {
    pub fn values(&self) -> Vec<f64> {
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let v = self.start + f64::from(k) * self.step;
            if v > self.end + 1e-9 {
                break;
            }
            values.push(v);
            k += 1;
        }
        values
    }
}

/// Sweep the grid on a truth-annotated corpus and return the threshold that
/// maximizes macro plagdet, ties resolved toward the higher threshold.
pub fn calibrate_threshold(
    corpus: &Corpus,
    truth: &[ReuseCase],
    params: &VectorParams,
    source: &VectorSource,
    grid: &CalibrationGrid,
) -> Result<f64> {
    if corpus.pairs.is_empty() {
        return Err(Error::Config("calibration corpus has no pairs".into()));
    }
    let per_pair: Vec<Result<Vec<Candidate>>> = exec::map_items(&corpus.pairs, |(susp_ref, src_ref)| {
        pair_candidates(&corpus.src[src_ref], &corpus.susp[susp_ref], params, source)
    });
    let mut candidates: Vec<(&DocumentRef, &DocumentRef, Vec<Candidate>)> = Vec::new();
    for ((susp_ref, src_ref), result) in corpus.pairs.iter().zip(per_pair) {
        candidates.push((susp_ref, src_ref, result?));
    }

    let scores: Vec<f64> = exec::map_items(&grid.values(), |&threshold| {
        let mut detections = Vec::new();
        for (susp_ref, src_ref, cands) in &candidates {
            detections.extend(cases_at_threshold(cands, threshold, params, src_ref, susp_ref));
        }
        eval::evaluate(truth, &detections).macro_plagdet
    });

    let mut best = grid.values()[0];
    let mut best_score = f64::NEG_INFINITY;
    for (threshold, score) in grid.values().into_iter().zip(scores) {
        if score >= best_score {
            best_score = score;
            best = threshold;
        }
    }
    Ok(best)
}
