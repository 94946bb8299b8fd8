//! Synthetic reuse-corpus generation: pair semantically similar documents
//! from a source pool, pick paragraphs to replace according to a severity
//! band, align each target paragraph to its best source paragraph by a
//! weighted semantic/lexical/title score, paraphrase the source paragraphs,
//! and emit an annotated corpus split into train/validation/test.

use crate::error::{Error, Result};
use crate::exec;
use crate::format::{self, AnnotationDocument, CorpusLayout};
use crate::paraphrase::{paraphrase, Paraphraser};
use crate::span::{
    CaseMeta, DocSpan, DocumentRef, GeneratorModel, PromptType, ReuseCase, Severity, Span,
};
use crate::text::{fnv1a64, Fnv1a};
use crate::vector::{cosine, tfidf_vectors, Chunk, ChunkMode, VectorStore};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

const VECTOR_BUCKETS: usize = 256;

/// Deterministic bag-of-words vector: token counts hashed into a fixed
/// number of buckets, L2-normalized. Stands in when no externally computed
/// embeddings are supplied.
pub fn hash_vector(text: &str) -> Vec<f64> {
    let mut v = vec![0.0f64; VECTOR_BUCKETS];
    for token in crate::lexical::tokenize_normalize(text) {
        let bucket = (fnv1a64(token.text.as_bytes()) % VECTOR_BUCKETS as u64) as usize;
        v[bucket] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

#[derive(Debug, Deserialize)]
struct SidecarSection {
    title: String,
    first_paragraph: usize,
    last_paragraph: usize,
}

#[derive(Debug, Deserialize)]
struct Sidecar {
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    sections: Vec<SidecarSection>,
}

/// One ingested pool document: text, paragraph extents, subject tag, and
/// unit vectors for the document, each paragraph, and each paragraph's
/// section title (where a sidecar provides sections).
#[derive(Debug, Clone)]
pub struct PoolDocument {
    pub id: String,
    pub text: String,
    pub paragraphs: Vec<Span>,
    pub category: Option<String>,
    pub doc_vector: Vec<f64>,
    pub para_vectors: Vec<Vec<f64>>,
    pub title_vectors: Vec<Option<Vec<f64>>>,
}

impl PoolDocument {
    pub fn paragraph_text(&self, idx: usize) -> &str {
        crate::text::slice(&self.text, self.paragraphs[idx]).unwrap_or("")
    }
}

/// Documents eligible for pairing, sorted by id. Documents with fewer than
/// three paragraphs are rejected at ingestion.
#[derive(Debug, Clone)]
pub struct SourcePool {
    pub docs: Vec<PoolDocument>,
}

impl SourcePool {
    /// Load every `.txt` file in `dir`. A `<stem>.json` sidecar may carry a
    /// subject tag and section-title ranges. When `vectors` is given,
    /// paragraph vectors come from it (key: document id, paragraph index)
    /// and the document vector is their normalized sum; otherwise the
    /// hashing vectorizer is used throughout.
    pub fn load(dir: &Path, vectors: Option<&VectorStore>) -> Result<SourcePool> {
        if !dir.is_dir() {
            return Err(Error::MissingInput(format!(
                "source pool directory {} not found",
                dir.display()
            )));
        }
        let mut names: Vec<String> = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name.ends_with(".txt") {
                names.push(name);
            }
        }
        names.sort();
        let mut docs = Vec::new();
        for name in names {
            let doc = format::load_document(&dir.join(&name))?;
            let chunks = crate::vector::chunk_document(&doc.text, ChunkMode::Paragraph, 1);
            if chunks.len() < 3 {
                log::warn!(
                    "pool document {name} has {} paragraphs (minimum 3); skipped",
                    chunks.len()
                );
                continue;
            }
            let paragraphs: Vec<Span> = chunks.iter().map(|c| c.span).collect();

            let sidecar_path = dir.join(format!("{}.json", format::doc_stem(&doc.id)));
            let sidecar: Option<Sidecar> = if sidecar_path.is_file() {
                let raw = std::fs::read_to_string(&sidecar_path)
                    .map_err(|e| Error::io(&sidecar_path, e))?;
                Some(serde_json::from_str(&raw).map_err(|e| {
                    Error::Config(format!("{}: bad sidecar: {e}", sidecar_path.display()))
                })?)
            } else {
                None
            };

            let para_vectors: Vec<Vec<f64>> = match vectors {
                Some(store) => (0..paragraphs.len())
                    .map(|idx| store.get(&doc.id, idx).cloned())
                    .collect::<Result<Vec<_>>>()?,
                None => chunks.iter().map(|c| hash_vector(&c.text)).collect(),
            };
            let doc_vector = match vectors {
                Some(_) => {
                    let dim = para_vectors.first().map_or(0, |v| v.len());
                    let mut sum = vec![0.0; dim];
                    for v in &para_vectors {
                        for (a, b) in sum.iter_mut().zip(v) {
                            *a += b;
                        }
                    }
                    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        for x in &mut sum {
                            *x /= norm;
                        }
                    }
                    sum
                }
                None => hash_vector(&doc.text),
            };

            let mut title_vectors: Vec<Option<Vec<f64>>> = vec![None; paragraphs.len()];
            if let Some(sidecar) = &sidecar {
                for section in &sidecar.sections {
                    let tv = hash_vector(&section.title);
                    for slot in title_vectors
                        .iter_mut()
                        .take(section.last_paragraph + 1)
                        .skip(section.first_paragraph)
                    {
                        *slot = Some(tv.clone());
                    }
                }
            }

            docs.push(PoolDocument {
                id: doc.id.as_str().to_string(),
                text: doc.text,
                paragraphs,
                category: sidecar.and_then(|s| s.category),
                doc_vector,
                para_vectors,
                title_vectors,
            });
        }
        Ok(SourcePool { docs })
    }
}

/// For every pool document S, the index of its most similar other document
/// (cosine over document vectors, ties toward the lexicographically smaller
/// id). Returned as (source index, base index) pairs in pool order.
pub fn pair_documents(pool: &SourcePool) -> Result<Vec<(usize, usize)>> {
    if pool.docs.len() < 2 {
        return Err(Error::Config(format!(
            "pairing needs at least 2 pool documents, found {}",
            pool.docs.len()
        )));
    }
    let mut pairs = Vec::with_capacity(pool.docs.len());
    for (i, s) in pool.docs.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, p) in pool.docs.iter().enumerate() {
            if i == j {
                continue;
            }
            let sim = cosine(&s.doc_vector, &p.doc_vector);
            let better = match best {
                None => true,
                Some((bj, bs)) => {
                    sim > bs || (sim == bs && pool.docs[j].id < pool.docs[bj].id && j != bj)
                }
            };
            if better {
                best = Some((j, sim));
            }
        }
        pairs.push((i, best.expect("pool has a second document").0));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCategory {
    Original,
    Altered,
    Plagiarized,
    PlagiarizedPlusAltered,
}

impl PairCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairCategory::Original => "original",
            PairCategory::Altered => "altered",
            PairCategory::Plagiarized => "plagiarized",
            PairCategory::PlagiarizedPlusAltered => "plagiarized-plus-altered",
        }
    }

    /// The top-level class used for distribution accounting, where both
    /// plagiarized variants count as plagiarized.
    pub fn base(&self) -> &'static str {
        match self {
            PairCategory::Original => "original",
            PairCategory::Altered => "altered",
            _ => "plagiarized",
        }
    }
}

/// Draw a pair's category, and for plagiarized pairs the altered add-on
/// flag and severity. Probabilities: category (0.05 original, 0.20 altered,
/// 0.75 plagiarized); add-on 0.5; severity (0.30 low, 0.40 medium,
/// 0.30 high).
pub fn sample_category(rng: &mut ChaCha8Rng) -> (PairCategory, Option<Severity>) {
    let roll: f64 = rng.random();
    if roll < 0.05 {
        return (PairCategory::Original, None);
    }
    if roll < 0.25 {
        return (PairCategory::Altered, None);
    }
    let addon = rng.random_bool(0.5);
    let severity_roll: f64 = rng.random();
    let severity = if severity_roll < 0.30 {
        Severity::Low
    } else if severity_roll < 0.70 {
        Severity::Medium
    } else {
        Severity::High
    };
    let category = if addon {
        PairCategory::PlagiarizedPlusAltered
    } else {
        PairCategory::Plagiarized
    };
    (category, Some(severity))
}

/// Weighted paragraph-alignment score: 0.5 semantic + 0.4 lexical +
/// 0.1 title, each component a cosine clamped to [0, 1].
pub fn score_alignment(sem: f64, lex: f64, title: f64) -> f64 {
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    0.5 * clamp(sem) + 0.4 * clamp(lex) + 0.1 * clamp(title)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    /// Paragraph index in the base document P that gets replaced.
    pub target: usize,
    /// Paragraph index in the source document S that gets paraphrased.
    pub source_para: usize,
    pub prompt: PromptType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlteredParagraph {
    pub target: usize,
    pub prompt: PromptType,
}

/// Everything needed to realize one suspicious document from its base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairPlan {
    pub source_id: String,
    pub base_id: String,
    pub category: PairCategory,
    pub severity: Option<Severity>,
    pub model: Option<GeneratorModel>,
    pub replacements: Vec<Replacement>,
    pub altered: Vec<AlteredParagraph>,
}

fn draw_prompt(rng: &mut ChaCha8Rng) -> PromptType {
    let roll: f64 = rng.random();
    if roll < 0.60 {
        PromptType::Simple
    } else if roll < 0.90 {
        PromptType::Default
    } else {
        PromptType::Complex
    }
}

/// The marker string whose presence in a paragraph of P marks it as citing
/// the source document. `pattern` contains `{stem}`, replaced by the source
/// document's file stem.
pub fn citation_marker(pattern: &str, source_id: &str) -> String {
    pattern.replace("{stem}", format::doc_stem(&DocumentRef::new(source_id)))
}

/// Select the paragraphs of P to replace and align each to a distinct
/// source paragraph of S. The replaced count is uniform over the severity
/// band's integer range; paragraphs of P citing S are always selected; the
/// alignment is greedy one-to-one by descending score. Also draws the
/// pair's model tag and a prompt type per replacement.
pub fn plan_replacements(
    s: &PoolDocument,
    p: &PoolDocument,
    severity: Severity,
    citation_pattern: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Replacement>, GeneratorModel)> {
    if s.id == p.id {
        return Err(Error::PairUnsatisfiable {
            source_doc: s.id.clone(),
            suspicious_doc: p.id.clone(),
            reason: "source and base are the same document".into(),
        });
    }
    let n = p.paragraphs.len();
    let (lo, hi) = severity.band();
    let k_min = ((lo * n as f64).ceil() as usize).max(1);
    let k_max = (hi * n as f64).floor() as usize;
    if k_min > k_max {
        return Err(Error::PairUnsatisfiable {
            source_doc: s.id.clone(),
            suspicious_doc: p.id.clone(),
            reason: format!(
                "{n} paragraphs cannot satisfy the {} band [{lo}, {hi}]",
                severity.as_str()
            ),
        });
    }
    let k = rng.random_range(k_min..=k_max);

    let marker = citation_marker(citation_pattern, &s.id);
    let mut selected: Vec<usize> = (0..n)
        .filter(|&i| p.paragraph_text(i).contains(&marker))
        .collect();
    let mut rest: Vec<usize> = (0..n).filter(|i| !selected.contains(i)).collect();
    rest.shuffle(rng);
    for idx in rest {
        if selected.len() >= k {
            break;
        }
        selected.push(idx);
    }
    selected.sort_unstable();

    let model = *GeneratorModel::ALL
        .get(rng.random_range(0..GeneratorModel::ALL.len()))
        .expect("model list is non-empty");

    // Lexical component: TF-IDF over the two documents' paragraphs.
    let to_chunks = |doc: &PoolDocument| -> Vec<Chunk> {
        doc.paragraphs
            .iter()
            .map(|&span| Chunk {
                span,
                text: crate::text::slice(&doc.text, span).unwrap_or("").to_string(),
                vector: None,
            })
            .collect()
    };
    let mut s_chunks = to_chunks(s);
    let mut p_chunks = to_chunks(p);
    tfidf_vectors(&mut s_chunks, &mut p_chunks);

    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for &target in &selected {
        for source_para in 0..s.paragraphs.len() {
            let sem = cosine(&p.para_vectors[target], &s.para_vectors[source_para]);
            let lex = cosine(
                p_chunks[target].vector.as_ref().unwrap(),
                s_chunks[source_para].vector.as_ref().unwrap(),
            );
            let title = match (&p.title_vectors[target], &s.title_vectors[source_para]) {
                (Some(a), Some(b)) => cosine(a, b),
                _ => 0.0,
            };
            scored.push((score_alignment(sem, lex, title), target, source_para));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut target_done = vec![false; n];
    let mut source_used = vec![false; s.paragraphs.len()];
    let mut aligned: Vec<(usize, usize)> = Vec::new();
    for (_, target, source_para) in scored {
        if target_done[target] || source_used[source_para] {
            continue;
        }
        target_done[target] = true;
        source_used[source_para] = true;
        aligned.push((target, source_para));
    }
    if aligned.len() < selected.len() {
        log::warn!(
            "pair ({}, {}): {} selected paragraphs left unaligned (source has {} paragraphs)",
            s.id,
            p.id,
            selected.len() - aligned.len(),
            s.paragraphs.len()
        );
    }
    aligned.sort_unstable();

    let replacements = aligned
        .into_iter()
        .map(|(target, source_para)| Replacement {
            target,
            source_para,
            prompt: draw_prompt(rng),
        })
        .collect();
    Ok((replacements, model))
}

/// Pick paragraphs for the altered add-on: `fraction` of the document's
/// paragraphs (rounded up, at least one), chosen among those not already
/// selected for replacement.
fn plan_altered(
    n: usize,
    taken: &[usize],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<AlteredParagraph> {
    let mut free: Vec<usize> = (0..n).filter(|i| !taken.contains(i)).collect();
    if free.is_empty() {
        return Vec::new();
    }
    let want = ((fraction * n as f64).ceil() as usize).max(1).min(free.len());
    free.shuffle(rng);
    let mut chosen: Vec<usize> = free.into_iter().take(want).collect();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|target| AlteredParagraph {
            target,
            prompt: draw_prompt(rng),
        })
        .collect()
}

/// Per-pair RNG stream, derived from the global seed and the pair index so
/// pairs are independent and order of realization does not matter.
pub fn pair_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut h = Fnv1a::new();
    h.update(&seed.to_le_bytes());
    h.update(&(index as u64).to_le_bytes());
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Build the full plan for pair `index`: category draw, then replacement
/// and altered-paragraph selection as the category requires.
pub fn plan_pair(
    pool: &SourcePool,
    s_idx: usize,
    p_idx: usize,
    index: usize,
    seed: u64,
    citation_pattern: &str,
    altered_fraction: f64,
) -> Result<PairPlan> {
    let mut rng = pair_rng(seed, index);
    let (category, severity) = sample_category(&mut rng);
    let s = &pool.docs[s_idx];
    let p = &pool.docs[p_idx];
    let mut plan = PairPlan {
        source_id: s.id.clone(),
        base_id: p.id.clone(),
        category,
        severity,
        model: None,
        replacements: Vec::new(),
        altered: Vec::new(),
    };
    match category {
        PairCategory::Original => {}
        PairCategory::Altered => {
            plan.model = Some(
                *GeneratorModel::ALL
                    .get(rng.random_range(0..GeneratorModel::ALL.len()))
                    .expect("model list is non-empty"),
            );
            plan.altered = plan_altered(p.paragraphs.len(), &[], altered_fraction, &mut rng);
        }
        PairCategory::Plagiarized | PairCategory::PlagiarizedPlusAltered => {
            let (replacements, model) =
                plan_replacements(s, p, severity.expect("plagiarized has severity"), citation_pattern, &mut rng)?;
            plan.model = Some(model);
            if category == PairCategory::PlagiarizedPlusAltered {
                let taken: Vec<usize> = replacements.iter().map(|r| r.target).collect();
                plan.altered =
                    plan_altered(p.paragraphs.len(), &taken, altered_fraction, &mut rng);
            }
            plan.replacements = replacements;
        }
    }
    Ok(plan)
}

/// Produce the suspicious text for a plan plus its truth cases. Replaced
/// paragraphs carry the paraphrase of their aligned source paragraph;
/// altered paragraphs carry a paraphrase of their own prior text; all other
/// characters are copied verbatim. Complex prompts receive the realized
/// preceding paragraph as context (empty for a leading paragraph).
pub fn realize_pair(
    s: &PoolDocument,
    p: &PoolDocument,
    plan: &PairPlan,
    susp_ref: &DocumentRef,
    src_ref: &DocumentRef,
    paraphraser: &dyn Paraphraser,
) -> Result<(String, Vec<ReuseCase>)> {
    let replacement_by_target: BTreeMap<usize, &Replacement> =
        plan.replacements.iter().map(|r| (r.target, r)).collect();
    let altered_by_target: BTreeMap<usize, &AlteredParagraph> =
        plan.altered.iter().map(|a| (a.target, a)).collect();

    let chars: Vec<char> = p.text.chars().collect();
    let mut out = String::new();
    let mut out_chars = 0usize;
    let mut cursor = 0usize;
    let mut cases: Vec<ReuseCase> = Vec::new();
    let mut prev_paragraph: Option<String> = None;

    let push = |out: &mut String, out_chars: &mut usize, piece: &str| {
        out.push_str(piece);
        *out_chars += piece.chars().count();
    };

    for (idx, &span) in p.paragraphs.iter().enumerate() {
        let separator: String = chars[cursor..span.start].iter().collect();
        push(&mut out, &mut out_chars, &separator);
        cursor = span.end();
        let original: String = chars[span.start..span.end()].iter().collect();

        let realized: String = if let Some(replacement) = replacement_by_target.get(&idx) {
            let source_text = s.paragraph_text(replacement.source_para);
            let context = (replacement.prompt == PromptType::Complex)
                .then(|| prev_paragraph.clone().unwrap_or_default());
            let new_text =
                paraphrase(source_text, replacement.prompt, context.as_deref(), paraphraser)?;
            let meta = CaseMeta {
                model: plan.model,
                prompt: Some(replacement.prompt),
                severity: plan.severity,
            };
            cases.push(ReuseCase::plagiarism(
                DocSpan::new(susp_ref.clone(), Span::new(out_chars, new_text.chars().count())),
                DocSpan::new(src_ref.clone(), s.paragraphs[replacement.source_para]),
                meta,
            ));
            new_text
        } else if let Some(altered) = altered_by_target.get(&idx) {
            let context = (altered.prompt == PromptType::Complex)
                .then(|| prev_paragraph.clone().unwrap_or_default());
            let new_text = paraphrase(&original, altered.prompt, context.as_deref(), paraphraser)?;
            let meta = CaseMeta {
                model: plan.model,
                prompt: Some(altered.prompt),
                severity: None,
            };
            cases.push(ReuseCase::altered(
                DocSpan::new(susp_ref.clone(), Span::new(out_chars, new_text.chars().count())),
                meta,
            ));
            new_text
        } else {
            original.clone()
        };
        push(&mut out, &mut out_chars, &realized);
        prev_paragraph = Some(realized);
    }
    let tail: String = chars[cursor..].iter().collect();
    push(&mut out, &mut out_chars, &tail);

    Ok((out, cases))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
    pub const FRACTIONS: [f64; 3] = [0.80, 0.10, 0.10];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub pairs: usize,
    pub seed: u64,
    /// Citation marker template; `{stem}` is replaced by the source
    /// document's file stem. Marker presence in a paragraph is a plain
    /// substring test, an approximation of structured citation detection.
    pub citation_pattern: String,
    /// Fraction of paragraphs the altered add-on rewrites (rounded up).
    pub altered_fraction: f64,
    /// Withhold truth files for the test split.
    pub blind: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            pairs: 0,
            seed: 0,
            citation_pattern: "[{stem}]".into(),
            altered_fraction: 0.10,
            blind: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRow {
    pub index: usize,
    pub suspicious: String,
    pub source: String,
    pub pool_source: String,
    pub pool_base: String,
    pub split: Split,
    pub category: PairCategory,
    pub severity: Option<Severity>,
    pub model: Option<GeneratorModel>,
    pub replacement_count: usize,
    pub altered_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GeneratorConfig,
    pub rows: Vec<ManifestRow>,
}

/// One fully realized pair, ready to write.
pub struct RealizedPair {
    pub index: usize,
    pub plan: PairPlan,
    pub s_idx: usize,
    pub suspicious_name: DocumentRef,
    pub source_name: DocumentRef,
    pub suspicious_text: String,
    pub cases: Vec<ReuseCase>,
}

fn suspicious_name(index: usize) -> DocumentRef {
    DocumentRef::new(format!("suspicious-document{:05}.txt", index + 1))
}

fn source_name(pool_idx: usize) -> DocumentRef {
    DocumentRef::new(format!("source-document{:05}.txt", pool_idx + 1))
}

/// Deterministic stratified split assignment: within each (category, model)
/// stratum, counts follow the 80/10/10 fractions by largest remainder and
/// membership is decided by a seeded shuffle.
fn assign_splits(pairs: &[RealizedPair], seed: u64) -> Vec<Split> {
    let mut strata: BTreeMap<(PairCategory, Option<GeneratorModel>), Vec<usize>> = BTreeMap::new();
    for (i, pair) in pairs.iter().enumerate() {
        strata
            .entry((pair.plan.category, pair.plan.model))
            .or_default()
            .push(i);
    }
    let mut h = Fnv1a::new();
    h.update(&seed.to_le_bytes());
    h.update(b"split");
    let mut rng = ChaCha8Rng::seed_from_u64(h.finish());

    let mut out = vec![Split::Train; pairs.len()];
    for (_, mut members) in strata {
        members.shuffle(&mut rng);
        let total = members.len();
        let mut counts: Vec<usize> = Split::FRACTIONS
            .iter()
            .map(|f| (f * total as f64).floor() as usize)
            .collect();
        let mut leftover = total - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = Split::FRACTIONS[a] * total as f64 - counts[a] as f64;
            let rb = Split::FRACTIONS[b] * total as f64 - counts[b] as f64;
            rb.total_cmp(&ra)
        });
        for &slot in &order {
            if leftover == 0 {
                break;
            }
            counts[slot] += 1;
            leftover -= 1;
        }
        let mut it = members.into_iter();
        for (slot, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                if let Some(member) = it.next() {
                    out[member] = Split::ALL[slot];
                }
            }
        }
    }
    out
}

/// Write one split's corpus in the standard layout. Returns the rows
/// written, in pair-index order.
pub fn emit_corpus(
    pool: &SourcePool,
    pairs: &[RealizedPair],
    splits: &[Split],
    out_dir: &Path,
    blind: bool,
) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::with_capacity(pairs.len());
    let mut per_split: BTreeMap<Split, Vec<&RealizedPair>> = BTreeMap::new();
    for (pair, &split) in pairs.iter().zip(splits) {
        per_split.entry(split).or_default().push(pair);
    }
    for split in Split::ALL {
        let members = per_split.get(&split).map(Vec::as_slice).unwrap_or(&[]);
        let layout = CorpusLayout::new(&out_dir.join(split.as_str()));
        let mut pairs_lines = String::new();
        let mut sources_written: BTreeMap<&str, ()> = BTreeMap::new();
        for pair in members {
            pairs_lines.push_str(&format!(
                "{} {}\n",
                pair.suspicious_name.as_str(),
                pair.source_name.as_str()
            ));
            crate::text::atomic_write(
                &layout.susp_dir().join(pair.suspicious_name.as_str()),
                pair.suspicious_text.as_bytes(),
            )?;
            if sources_written.insert(pair.source_name.as_str(), ()).is_none() {
                crate::text::atomic_write(
                    &layout.src_dir().join(pair.source_name.as_str()),
                    pool.docs[pair.s_idx].text.as_bytes(),
                )?;
            }
            let withhold = blind && split == Split::Test;
            if !withhold {
                format::write_annotations(
                    &AnnotationDocument {
                        reference: pair.suspicious_name.clone(),
                        cases: pair.cases.clone(),
                    },
                    &layout.truth_file(&pair.suspicious_name),
                )?;
            }
        }
        crate::text::atomic_write(&layout.pairs_file(), pairs_lines.as_bytes())?;
    }
    for (pair, &split) in pairs.iter().zip(splits) {
        rows.push(ManifestRow {
            index: pair.index,
            suspicious: pair.suspicious_name.as_str().to_string(),
            source: pair.source_name.as_str().to_string(),
            pool_source: pair.plan.source_id.clone(),
            pool_base: pair.plan.base_id.clone(),
            split,
            category: pair.plan.category,
            severity: pair.plan.severity,
            model: pair.plan.model,
            replacement_count: pair.plan.replacements.len(),
            altered_count: pair.plan.altered.len(),
        });
    }
    Ok(rows)
}

/// End-to-end generation: pair the pool, plan and realize `config.pairs`
/// pairs (cycling over the pool pairing when more pairs are requested than
/// the pool has documents), assign splits, write the corpus, and return the
/// manifest. Discarded pairs are reported in the generation log.
pub fn generate_corpus(
    pool: &SourcePool,
    config: &GeneratorConfig,
    paraphraser: &(dyn Paraphraser + Sync),
    out_dir: &Path,
) -> Result<Manifest> {
    let base_pairs = pair_documents(pool)?;
    let indices: Vec<usize> = (0..config.pairs).collect();
    let realized: Vec<Result<RealizedPair>> = exec::map_items(&indices, |&index| {
        let (s_idx, p_idx) = base_pairs[index % base_pairs.len()];
        let plan = plan_pair(
            pool,
            s_idx,
            p_idx,
            index,
            config.seed,
            &config.citation_pattern,
            config.altered_fraction,
        )?;
        let susp_name = suspicious_name(index);
        let src_name = source_name(s_idx);
        let (text, cases) = realize_pair(
            &pool.docs[s_idx],
            &pool.docs[p_idx],
            &plan,
            &susp_name,
            &src_name,
            paraphraser,
        )?;
        Ok(RealizedPair {
            index,
            plan,
            s_idx,
            suspicious_name: susp_name,
            source_name: src_name,
            suspicious_text: text,
            cases,
        })
    });

    let mut pairs = Vec::new();
    let mut log_lines = Vec::new();
    for (index, result) in realized.into_iter().enumerate() {
        match result {
            Ok(pair) => pairs.push(pair),
            Err(Error::PairUnsatisfiable {
                source_doc,
                suspicious_doc,
                reason,
            }) => {
                log_lines.push(format!(
                    "pair {index}: discarded ({source_doc}, {suspicious_doc}): {reason}"
                ));
            }
            Err(other) => return Err(other),
        }
    }

    let splits = assign_splits(&pairs, config.seed);
    let rows = emit_corpus(pool, &pairs, &splits, out_dir, config.blind)?;
    let manifest = Manifest {
        seed: config.seed,
        config: config.clone(),
        rows,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    crate::text::atomic_write(&out_dir.join("manifest.json"), manifest_json.as_bytes())?;
    let mut log_text = log_lines.join("\n");
    if !log_text.is_empty() {
        log_text.push('\n');
    }
    crate::text::atomic_write(&out_dir.join("generation.log"), log_text.as_bytes())?;
    Ok(manifest)
}
