//! Hermetic fixture builders shared by the acceptance criteria: random
//! span-level micro-corpora, verbatim-copy pairs, paraphrased pairs, and an
//! on-disk corpus with a controlled similarity separation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use textreuse::error::Result;
use textreuse::format::{write_annotations, AnnotationDocument, Document};
use textreuse::paraphrase::Paraphraser;
use textreuse::span::{CaseMeta, DocSpan, DocumentRef, PromptType, ReuseCase, Span};
use textreuse::text::fnv1a64;

pub const DOC_LEN: usize = 2000;

fn random_span(rng: &mut ChaCha8Rng) -> Span {
    let start = rng.random_range(0..DOC_LEN - 1);
    let max_len = (DOC_LEN - start).min(250);
    Span::new(start, rng.random_range(1..=max_len))
}

fn random_doc(rng: &mut ChaCha8Rng, names: &[&str]) -> DocumentRef {
    DocumentRef::new(names[rng.random_range(0..names.len())])
}

fn jitter(rng: &mut ChaCha8Rng, span: Span) -> Span {
    let shift = rng.random_range(0..=60) as i64 - 30;
    let start = (span.start as i64 + shift).clamp(0, (DOC_LEN - 1) as i64) as usize;
    let stretch = rng.random_range(0..=60) as i64 - 30;
    let length = (span.length as i64 + stretch).clamp(1, (DOC_LEN - start) as i64) as usize;
    Span::new(start, length)
}

/// Random truth and detection sets over a handful of short documents, with a
/// bias toward detections derived from truth cases so both matched and
/// unmatched configurations occur. Some truth entries are altered (excluded
/// from the main metrics) and some detections lack a source (dropped).
pub fn random_micro_corpus(rng: &mut ChaCha8Rng) -> (Vec<ReuseCase>, Vec<ReuseCase>) {
    let susp_names = ["s0", "s1", "s2"];
    let src_names = ["r0", "r1", "r2"];
    let n_susp = rng.random_range(1..=3);
    let n_src = rng.random_range(1..=3);

    let mut truth = Vec::new();
    for _ in 0..rng.random_range(0..=10) {
        let susp = DocSpan::new(random_doc(rng, &susp_names[..n_susp]), random_span(rng));
        if rng.random_bool(0.15) {
            truth.push(ReuseCase::altered(susp, CaseMeta::NONE));
        } else {
            let src = DocSpan::new(random_doc(rng, &src_names[..n_src]), random_span(rng));
            truth.push(ReuseCase::plagiarism(susp, src, CaseMeta::NONE));
        }
    }

    let mut detections = Vec::new();
    for _ in 0..rng.random_range(0..=15) {
        if !truth.is_empty() && rng.random_bool(0.6) {
            let base = &truth[rng.random_range(0..truth.len())];
            let susp = DocSpan::new(base.suspicious.doc.clone(), jitter(rng, base.suspicious.span));
            let src = match &base.source {
                Some(s) => DocSpan::new(s.doc.clone(), jitter(rng, s.span)),
                None => DocSpan::new(random_doc(rng, &src_names[..n_src]), random_span(rng)),
            };
            detections.push(ReuseCase::detected(susp, src));
        } else if rng.random_bool(0.1) {
            let susp = DocSpan::new(random_doc(rng, &susp_names[..n_susp]), random_span(rng));
            detections.push(ReuseCase::altered(susp, CaseMeta::NONE));
        } else {
            let susp = DocSpan::new(random_doc(rng, &susp_names[..n_susp]), random_span(rng));
            let src = DocSpan::new(random_doc(rng, &src_names[..n_src]), random_span(rng));
            detections.push(ReuseCase::detected(susp, src));
        }
    }
    (truth, detections)
}

/// Truth cases with pairwise-disjoint spans on both sides, suitable for
/// exact granularity arithmetic. Suspicious spans are at least 6 chars long.
pub fn disjoint_truth(rng: &mut ChaCha8Rng) -> Vec<ReuseCase> {
    let n = rng.random_range(1..=8);
    let mut susp_cursor = rng.random_range(0..20);
    let mut src_cursor = rng.random_range(0..20);
    let mut truth = Vec::new();
    for _ in 0..n {
        let s_len = rng.random_range(6..=60);
        let r_len = rng.random_range(6..=60);
        truth.push(ReuseCase::plagiarism(
            DocSpan::new(DocumentRef::new("s0"), Span::new(susp_cursor, s_len)),
            DocSpan::new(DocumentRef::new("r0"), Span::new(src_cursor, r_len)),
            CaseMeta::NONE,
        ));
        susp_cursor += s_len + rng.random_range(1..30);
        src_cursor += r_len + rng.random_range(1..30);
    }
    truth
}

/// Split each truth case's suspicious span into three disjoint nonempty
/// parts; each part becomes a detection paired with the full source span.
pub fn split_into_thirds(truth: &[ReuseCase]) -> Vec<ReuseCase> {
    let mut detections = Vec::new();
    for case in truth {
        let src = case.source.as_ref().expect("plagiarism case").clone();
        let span = case.suspicious.span;
        let third = span.length / 3;
        let cuts = [
            Span::new(span.start, third),
            Span::new(span.start + third, third),
            Span::new(span.start + 2 * third, span.length - 2 * third),
        ];
        for cut in cuts {
            detections.push(ReuseCase::detected(
                DocSpan::new(case.suspicious.doc.clone(), cut),
                src.clone(),
            ));
        }
    }
    detections
}

/// Lowercase base-26 rendering, padded to three letters. Fixture vocabulary
/// must be purely alphabetic or the offline paraphraser's substitution pass
/// skips every word.
pub fn alpha(mut n: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    while s.len() < 3 {
        s.push('q');
    }
    s
}

fn word_paragraph(prefix: &str, words: usize) -> String {
    (0..words)
        .map(|w| format!("{prefix}{}", alpha(w)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Character offset of each paragraph when paragraphs are joined by blank
/// lines. ASCII input, so chars equal bytes.
fn paragraph_offsets(paragraphs: &[String]) -> Vec<(usize, usize)> {
    let mut offsets = Vec::new();
    let mut cursor = 0;
    for (i, p) in paragraphs.iter().enumerate() {
        if i > 0 {
            cursor += 2;
        }
        offsets.push((cursor, p.len()));
        cursor += p.len();
    }
    offsets
}

/// One pair whose suspicious document embeds verbatim copies of three source
/// paragraphs between unrelated filler paragraphs. Filler is long enough
/// that neighboring copies never merge into one detection.
pub fn verbatim_pair(i: usize) -> (Document, Document, Vec<ReuseCase>) {
    let src_paras: Vec<String> = (0..8).map(|j| word_paragraph(&format!("p{}s{}", alpha(i), alpha(j)), 25)).collect();
    let copied = [1usize, 4, 6];
    let mut susp_paras = Vec::new();
    let mut copied_positions = Vec::new();
    for (slot, &src_idx) in copied.iter().enumerate() {
        susp_paras.push(word_paragraph(&format!("p{}f{}", alpha(i), alpha(slot)), 30));
        copied_positions.push((susp_paras.len(), src_idx));
        susp_paras.push(src_paras[src_idx].clone());
    }
    susp_paras.push(word_paragraph(&format!("p{}f{}", alpha(i), alpha(copied.len())), 30));

    let src_offsets = paragraph_offsets(&src_paras);
    let susp_offsets = paragraph_offsets(&susp_paras);
    let susp_ref = DocumentRef::new(format!("susp-{i:03}.txt"));
    let src_ref = DocumentRef::new(format!("src-{i:03}.txt"));

    let truth = copied_positions
        .iter()
        .map(|&(susp_idx, src_idx)| {
            let (s_start, s_len) = susp_offsets[susp_idx];
            let (r_start, r_len) = src_offsets[src_idx];
            ReuseCase::plagiarism(
                DocSpan::new(susp_ref.clone(), Span::new(s_start, s_len)),
                DocSpan::new(src_ref.clone(), Span::new(r_start, r_len)),
                CaseMeta::NONE,
            )
        })
        .collect();

    (
        Document::new(src_ref, src_paras.join("\n\n")),
        Document::new(susp_ref, susp_paras.join("\n\n")),
        truth,
    )
}

/// One pair whose suspicious document embeds paraphrases of two source
/// paragraphs, produced by the given paraphraser at the given prompt type.
pub fn paraphrased_pair(
    i: usize,
    prompt: PromptType,
    paraphraser: &dyn Paraphraser,
) -> Result<(Document, Document, Vec<ReuseCase>)> {
    let src_paras: Vec<String> = (0..6).map(|j| word_paragraph(&format!("p{}a{}", alpha(i), alpha(j)), 30)).collect();
    let replaced = [1usize, 4];
    let mut susp_paras = Vec::new();
    let mut spans = Vec::new();
    for (slot, &src_idx) in replaced.iter().enumerate() {
        susp_paras.push(word_paragraph(&format!("p{}b{}", alpha(i), alpha(slot)), 30));
        let context = src_paras[src_idx - 1].clone();
        let rewritten = paraphraser.paraphrase(
            &src_paras[src_idx],
            prompt,
            if prompt == PromptType::Complex { Some(&context) } else { None },
        )?;
        spans.push((susp_paras.len(), src_idx));
        susp_paras.push(rewritten);
    }
    susp_paras.push(word_paragraph(&format!("p{}b{}", alpha(i), alpha(replaced.len())), 30));

    let src_offsets = paragraph_offsets(&src_paras);
    let susp_offsets = paragraph_offsets(&susp_paras);
    let susp_ref = DocumentRef::new(format!("susp-{i:03}.txt"));
    let src_ref = DocumentRef::new(format!("src-{i:03}.txt"));

    let truth = spans
        .iter()
        .map(|&(susp_idx, src_idx)| {
            let (s_start, s_len) = susp_offsets[susp_idx];
            let (r_start, r_len) = src_offsets[src_idx];
            ReuseCase::plagiarism(
                DocSpan::new(susp_ref.clone(), Span::new(s_start, s_len)),
                DocSpan::new(src_ref.clone(), Span::new(r_start, r_len)),
                CaseMeta {
                    model: None,
                    prompt: Some(prompt),
                    severity: None,
                },
            )
        })
        .collect();

    Ok((
        Document::new(src_ref, src_paras.join("\n\n")),
        Document::new(susp_ref, susp_paras.join("\n\n")),
        truth,
    ))
}

/// On-disk corpus with a controlled cosine separation: truth-pair chunks sit
/// at similarity >= 0.955 to their source chunk, noise-pair chunks at
/// <= 0.555. Returns the corpus root and the chunk-vector file.
pub fn separation_corpus(dir: &Path, seed: u64, pairs: usize) -> Result<(PathBuf, PathBuf)> {
    let root = dir.join(format!("separation-{seed}"));
    std::fs::create_dir_all(root.join("susp")).unwrap();
    std::fs::create_dir_all(root.join("src")).unwrap();
    std::fs::create_dir_all(root.join("truth")).unwrap();

    let truth_sims = [0.955, 0.965, 0.975, 0.985];
    let noise_sims = [0.555, 0.50, 0.45, 0.40];

    let mut pair_lines = String::new();
    let mut vector_lines = String::new();
    // 3-D unit vectors; the second source chunk is orthogonal to the plane
    // every suspicious chunk lives in, so only the intended chunk pair can
    // score above zero.
    let mut emit_vector = |doc: &str, chunk: usize, v: [f64; 3]| {
        vector_lines.push_str(&format!(
            "{}\n",
            serde_json::json!({ "doc": doc, "chunk": chunk, "vector": v })
        ));
    };

    for i in 0..pairs {
        let susp_name = format!("susp-{seed}-{i:03}.txt");
        let src_name = format!("src-{seed}-{i:03}.txt");
        let token = fnv1a64(format!("{seed}:{i}").as_bytes());
        let paras: Vec<String> = (0..2)
            .map(|j| word_paragraph(&format!("d{token:x}q{j}"), 16))
            .collect();
        let text = paras.join("\n\n");
        let offsets = paragraph_offsets(&paras);
        std::fs::write(root.join("susp").join(&susp_name), &text).unwrap();
        std::fs::write(root.join("src").join(&src_name), &text).unwrap();
        pair_lines.push_str(&format!("{susp_name} {src_name}\n"));

        let is_truth = i % 2 == 0;
        let sim = if is_truth {
            truth_sims[i % truth_sims.len()]
        } else {
            noise_sims[i % noise_sims.len()]
        };
        emit_vector(&src_name, 0, [1.0, 0.0, 0.0]);
        emit_vector(&src_name, 1, [0.0, 0.0, 1.0]);
        emit_vector(&susp_name, 0, [sim, (1.0 - sim * sim).sqrt(), 0.0]);
        emit_vector(&susp_name, 1, [0.0, -1.0, 0.0]);

        let susp_ref = DocumentRef::new(susp_name.clone());
        let cases = if is_truth {
            let (s, l) = offsets[0];
            vec![ReuseCase::plagiarism(
                DocSpan::new(susp_ref.clone(), Span::new(s, l)),
                DocSpan::new(DocumentRef::new(src_name.clone()), Span::new(s, l)),
                CaseMeta::NONE,
            )]
        } else {
            Vec::new()
        };
        let stem = susp_name.trim_end_matches(".txt");
        write_annotations(
            &AnnotationDocument {
                reference: susp_ref,
                cases,
            },
            &root.join("truth").join(format!("{stem}.xml")),
        )?;
    }
    std::fs::write(root.join("pairs"), pair_lines).unwrap();
    let vectors = dir.join(format!("vectors-{seed}.jsonl"));
    std::fs::write(&vectors, vector_lines).unwrap();
    Ok((root, vectors))
}

/// Plain-text pool documents for generator-driven criteria.
pub fn write_pool(dir: &Path, docs: usize, paragraphs: usize, words: usize) {
    for d in 0..docs {
        let paras: Vec<String> = (0..paragraphs)
            .map(|j| word_paragraph(&format!("pool{}p{}", alpha(d), alpha(j)), words))
            .collect();
        std::fs::write(dir.join(format!("pool-{d:02}.txt")), paras.join("\n\n")).unwrap();
    }
}

/// FNV digest of every file under a directory, keyed by relative path.
pub fn dir_digest(root: &Path) -> BTreeMap<String, u64> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, u64>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().to_string();
                out.insert(rel, fnv1a64(&std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
