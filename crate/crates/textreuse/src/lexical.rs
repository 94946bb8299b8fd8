//! Lexical baseline detector: normalize tokens, find exact n-gram matches
//! between source and suspicious documents (seeds), then merge nearby seeds
//! into character-span reuse cases.

use crate::format::Document;
use crate::span::{CaseMeta, DocSpan, ReuseCase, Span};
use crate::text::Fnv1a;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A normalized word and the character extent it was cut from (punctuation
/// trimmed from both ends, original casing in the document).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

/// Split on whitespace, strip leading/trailing non-alphanumeric characters,
/// lowercase, drop words that vanish. Inner punctuation (hyphens,
/// apostrophes) survives.
pub fn tokenize_normalize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut word_start = 0usize;
    let mut in_word = false;
    for i in 0..=chars.len() {
        let is_boundary = i == chars.len() || chars[i].is_whitespace();
        if !is_boundary && !in_word {
            word_start = i;
            in_word = true;
        }
        if is_boundary && in_word {
            let mut s = word_start;
            let mut e = i;
            while s < e && !chars[s].is_alphanumeric() {
                s += 1;
            }
            while e > s && !chars[e - 1].is_alphanumeric() {
                e -= 1;
            }
            if e > s {
                let word: String = chars[s..e].iter().collect();
                tokens.push(Token {
                    text: word.to_lowercase(),
                    span: Span::new(s, e - s),
                });
            }
            in_word = false;
        }
    }
    tokens
}

/// A pair of aligned n-gram window start positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedMatch {
    pub src: usize,
    pub susp: usize,
    pub n: usize,
}

fn window_hash(tokens: &[Token], start: usize, n: usize) -> u64 {
    let mut h = Fnv1a::new();
    for token in &tokens[start..start + n] {
        h.update(token.text.as_bytes());
        h.update(&[0]);
    }
    h.finish()
}

fn windows_equal(a: &[Token], ai: usize, b: &[Token], bi: usize, n: usize) -> bool {
    (0..n).all(|k| a[ai + k].text == b[bi + k].text)
}

/// Every (source, suspicious) position pair whose n-token windows carry equal
/// normalized tokens. Candidates come from a hash index and are verified by
/// exact comparison, so collisions cannot produce false seeds.
pub fn find_seeds(src_tokens: &[Token], susp_tokens: &[Token], n: usize) -> Vec<SeedMatch> {
    if n == 0 || src_tokens.len() < n || susp_tokens.len() < n {
        return Vec::new();
    }
    let mut src_by_hash: HashMap<u64, Vec<usize>> = HashMap::new();
    for i in 0..=src_tokens.len() - n {
        src_by_hash
            .entry(window_hash(src_tokens, i, n))
            .or_default()
            .push(i);
    }
    let mut seeds = Vec::new();
    for j in 0..=susp_tokens.len() - n {
        let Some(candidates) = src_by_hash.get(&window_hash(susp_tokens, j, n)) else {
            continue;
        };
        for &i in candidates {
            if windows_equal(src_tokens, i, susp_tokens, j, n) {
                seeds.push(SeedMatch { src: i, susp: j, n });
            }
        }
    }
    seeds
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LexicalParams {
    /// Word-gram order for seeding.
    pub n: usize,
    /// Two seeds join one cluster when both their source and suspicious
    /// positions differ by at most this many tokens (single linkage).
    pub max_token_gap: usize,
    /// Clusters spanning fewer suspicious-side tokens are noise and dropped.
    pub min_case_tokens: usize,
}

impl Default for LexicalParams {
    fn default() -> Self {
        LexicalParams {
            n: 5,
            max_token_gap: 24,
            min_case_tokens: 15,
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> UnionFind {
        UnionFind {
            parent: (0..len).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Merge seeds into cases: single-linkage clusters on the (source position,
/// suspicious position) lattice with the gap bound applied per axis, then cut
/// character extents from the first token start to the last token end on each
/// side. Clusters narrower than `min_case_tokens` suspicious tokens are
/// discarded.
pub fn extend_and_merge(
    seeds: &[SeedMatch],
    src_tokens: &[Token],
    susp_tokens: &[Token],
    params: &LexicalParams,
    src_doc: &Document,
    susp_doc: &Document,
) -> Vec<ReuseCase> {
    if seeds.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by_key(|&i| (seeds[i].susp, seeds[i].src));

    let gap = params.max_token_gap;
    let mut uf = UnionFind::new(seeds.len());
    // Sweep in suspicious order; every pair within the gap on that axis is
    // checked on the source axis, which is all possible cluster edges.
    let mut window_start = 0usize;
    for (pos, &i) in order.iter().enumerate() {
        while seeds[order[window_start]].susp + gap < seeds[i].susp {
            window_start += 1;
        }
        for &j in &order[window_start..pos] {
            if seeds[i].src.abs_diff(seeds[j].src) <= gap {
                uf.union(i, j);
            }
        }
    }

    let mut clusters: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..seeds.len() {
        let root = uf.find(i);
        clusters.entry(root).or_default().push(i);
    }

    let mut cases = Vec::new();
    for members in clusters.values() {
        let first = &seeds[members[0]];
        let n = first.n;
        let susp_lo = members.iter().map(|&i| seeds[i].susp).min().unwrap();
        let susp_hi = members.iter().map(|&i| seeds[i].susp).max().unwrap();
        let src_lo = members.iter().map(|&i| seeds[i].src).min().unwrap();
        let src_hi = members.iter().map(|&i| seeds[i].src).max().unwrap();
        if (susp_hi + n) - susp_lo < params.min_case_tokens {
            continue;
        }
        let susp_start = susp_tokens[susp_lo].span.start;
        let susp_end = susp_tokens[susp_hi + n - 1].span.end();
        let src_start = src_tokens[src_lo].span.start;
        let src_end = src_tokens[src_hi + n - 1].span.end();
        cases.push(ReuseCase {
            kind: crate::span::CaseKind::Detected,
            suspicious: DocSpan::new(
                susp_doc.id.clone(),
                Span::new(susp_start, susp_end - susp_start),
            ),
            source: Some(DocSpan::new(
                src_doc.id.clone(),
                Span::new(src_start, src_end - src_start),
            )),
            meta: CaseMeta::NONE,
        });
    }
    cases.sort_by_key(|c| {
        (
            c.suspicious.span.start,
            c.suspicious.span.length,
            c.source.as_ref().unwrap().span.start,
        )
    });
    cases
}

/// The full lexical pipeline for one document pair.
pub fn detect_lexical(src: &Document, susp: &Document, params: &LexicalParams) -> Vec<ReuseCase> {
    let src_tokens = tokenize_normalize(&src.text);
    let susp_tokens = tokenize_normalize(&susp.text);
    let seeds = find_seeds(&src_tokens, &susp_tokens, params.n);
    extend_and_merge(&seeds, &src_tokens, &susp_tokens, params, src, susp)
}
