//! Pluggable paraphrase providers. The offline provider is a deterministic
//! surface rewriter used by tests and hermetic corpus generation; the HTTP
//! provider talks to a generic chat-completion style endpoint; the replay
//! provider answers from a recorded request log.

use crate::error::{Error, Result};
use crate::text::{fnv1a64, Fnv1a};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use crate::span::PromptType;

/// Instruction preset for one paraphrase intensity. Only the complex preset
/// carries a context slot.
#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub prompt_type: PromptType,
    pub text: &'static str,
    pub has_context_slot: bool,
}

const SIMPLE_PROMPT: &str = "Paraphrase the given paragraph for a professional audience.";
const DEFAULT_PROMPT: &str = "Reformulate the given paragraph in a sophisticated manner while preserving its meaning. Modify sentence structure, reword phrases, and incorporate elements of general knowledge to ensure coherence. The less token overlap, the better.";
const COMPLEX_PROMPT: &str = "Completely rephrase the given paragraph in your own words. Feel free to incorporate elements from general knowledge to ensure coherence, flow, and better understanding.\n\n{context_before}";

/// Appended to every rendered prompt so providers return bare paraphrase
/// text. This sentence is this tool's own wording, not a quoted preset.
pub const OUTPUT_ONLY_SUFFIX: &str =
    "Return only the paraphrased paragraph and nothing else.";

pub const TEMPLATES: [PromptTemplate; 3] = [
    PromptTemplate {
        prompt_type: PromptType::Simple,
        text: SIMPLE_PROMPT,
        has_context_slot: false,
    },
    PromptTemplate {
        prompt_type: PromptType::Default,
        text: DEFAULT_PROMPT,
        has_context_slot: false,
    },
    PromptTemplate {
        prompt_type: PromptType::Complex,
        text: COMPLEX_PROMPT,
        has_context_slot: true,
    },
];

impl PromptTemplate {
    pub fn for_type(prompt_type: PromptType) -> &'static PromptTemplate {
        TEMPLATES
            .iter()
            .find(|t| t.prompt_type == prompt_type)
            .expect("every prompt type has a template")
    }
}

/// The full prompt sent to a provider: instruction preset (with the context
/// slot filled for complex prompts), the output-only instruction, then the
/// paragraph to paraphrase.
pub fn render_prompt(prompt_type: PromptType, text: &str, context: Option<&str>) -> Result<String> {
    if text.trim().is_empty() {
        return Err(Error::Paraphrase("empty input text".into()));
    }
    let template = PromptTemplate::for_type(prompt_type);
    let instruction = if template.has_context_slot {
        let context = context.ok_or_else(|| {
            Error::Paraphrase("complex prompts require a context paragraph".into())
        })?;
        template.text.replace("{context_before}", context)
    } else {
        template.text.to_string()
    };
    Ok(format!("{instruction}\n\n{OUTPUT_ONLY_SUFFIX}\n\n{text}"))
}

/// A paraphrase backend. Implementations are safe to call from worker
/// threads concurrently.
pub trait Paraphraser: Sync {
    fn paraphrase(&self, text: &str, prompt_type: PromptType, context: Option<&str>)
        -> Result<String>;
}

/// Paraphrase `text` under `prompt_type` using `provider`. Validates inputs:
/// text must be non-blank and complex prompts need a context (pass "" for a
/// leading paragraph).
pub fn paraphrase(
    text: &str,
    prompt_type: PromptType,
    context: Option<&str>,
    provider: &dyn Paraphraser,
) -> Result<String> {
    if text.trim().is_empty() {
        return Err(Error::Paraphrase("empty input text".into()));
    }
    if prompt_type == PromptType::Complex && context.is_none() {
        return Err(Error::Paraphrase(
            "complex prompts require a context paragraph".into(),
        ));
    }
    let out = provider.paraphrase(text, prompt_type, context)?;
    if out.trim().is_empty() {
        return Err(Error::Paraphrase("provider returned empty output".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Offline provider

/// Replacement vocabulary for words outside the synonym table. Entries are
/// generic enough to keep output looking like prose.
const FALLBACK_WORDS: [&str; 32] = [
    "aspect", "framework", "notion", "element", "process", "structure", "pattern", "feature",
    "context", "measure", "factor", "domain", "setting", "signal", "criterion", "outcome",
    "variant", "segment", "property", "instance", "construct", "mechanism", "premise", "account",
    "scheme", "basis", "facet", "layer", "medium", "phase", "strand", "vector",
];

const SYNONYMS: [(&str, &str); 24] = [
    ("big", "large"),
    ("small", "little"),
    ("fast", "quick"),
    ("slow", "gradual"),
    ("show", "demonstrate"),
    ("shows", "demonstrates"),
    ("use", "employ"),
    ("uses", "employs"),
    ("used", "employed"),
    ("make", "produce"),
    ("makes", "produces"),
    ("made", "produced"),
    ("new", "novel"),
    ("old", "earlier"),
    ("good", "sound"),
    ("bad", "poor"),
    ("many", "numerous"),
    ("method", "approach"),
    ("methods", "approaches"),
    ("result", "finding"),
    ("results", "findings"),
    ("important", "significant"),
    ("because", "since"),
    ("however", "nevertheless"),
];

/// Deterministic surface rewriter. Output is a pure function of
/// (text, prompt type, context, seed). Aggressiveness grows with the prompt
/// type: simple substitutes a small share of words; default also rotates
/// comma-separated clauses; complex additionally shuffles sentence order.
/// Newlines are never added or removed, so paragraph boundaries survive.
#[derive(Debug, Clone, Copy)]
pub struct OfflineParaphraser {
    pub seed: u64,
}

impl OfflineParaphraser {
    pub fn new(seed: u64) -> OfflineParaphraser {
        OfflineParaphraser { seed }
    }

    fn rng_for(&self, text: &str, prompt_type: PromptType, context: Option<&str>) -> ChaCha8Rng {
        let mut h = Fnv1a::new();
        h.update(&self.seed.to_le_bytes());
        h.update(prompt_type.as_str().as_bytes());
        h.update(&[0]);
        h.update(text.as_bytes());
        h.update(&[0]);
        if let Some(c) = context {
            h.update(c.as_bytes());
        }
        ChaCha8Rng::seed_from_u64(h.finish())
    }

    fn substitution_rate(prompt_type: PromptType, rng: &mut ChaCha8Rng) -> f64 {
        let base = match prompt_type {
            PromptType::Simple => 0.15,
            PromptType::Default => 0.35,
            PromptType::Complex => 0.60,
        };
        // Narrow per-call jitter: the three rate bands stay disjoint, so the
        // token-overlap ordering simple > default > complex is preserved.
        base * rng.random_range(0.85..1.15)
    }

    fn substitute_word(word: &str, rng: &mut ChaCha8Rng) -> String {
        let lower = word.to_lowercase();
        let replacement = SYNONYMS
            .iter()
            .find(|(k, _)| *k == lower)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| {
                let mut idx = (fnv1a64(lower.as_bytes()) % FALLBACK_WORDS.len() as u64) as usize;
                if FALLBACK_WORDS[idx] == lower {
                    idx = (idx + 1) % FALLBACK_WORDS.len();
                }
                let _ = rng.random::<u32>();
                FALLBACK_WORDS[idx]
            });
        if word.chars().next().is_some_and(|c| c.is_uppercase()) {
            let mut chars = replacement.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
                None => replacement.to_string(),
            }
        } else {
            replacement.to_string()
        }
    }

    fn rewrite_sentence(sentence: &str, rate: f64, reorder: bool, rng: &mut ChaCha8Rng) -> String {
        let mut body = sentence.trim().to_string();
        if reorder {
            let clauses: Vec<&str> = body.split(", ").collect();
            if clauses.len() >= 2 {
                let k = rng.random_range(1..clauses.len());
                let mut rotated: Vec<&str> = Vec::with_capacity(clauses.len());
                rotated.extend_from_slice(&clauses[k..]);
                rotated.extend_from_slice(&clauses[..k]);
                body = rotated.join(", ");
            }
        }
        let words: Vec<String> = body
            .split_whitespace()
            .map(|w| {
                let eligible = w.len() >= 3 && w.chars().all(|c| c.is_alphabetic());
                if eligible && rng.random_bool(rate) {
                    Self::substitute_word(w, rng)
                } else {
                    w.to_string()
                }
            })
            .collect();
        words.join(" ")
    }

    fn split_sentences(line: &str) -> Vec<String> {
        let chars: Vec<char> = line.chars().collect();
        let mut sentences = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            if matches!(chars[i], '.' | '!' | '?') {
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j], '.' | '!' | '?') {
                    j += 1;
                }
                let mut k = j;
                while k < chars.len() && chars[k].is_whitespace() {
                    k += 1;
                }
                if k > j && k < chars.len() {
                    sentences.push(chars[start..j].iter().collect());
                    start = k;
                    i = k;
                    continue;
                }
                i = j;
            } else {
                i += 1;
            }
        }
        if start < chars.len() {
            sentences.push(chars[start..].iter().collect());
        }
        sentences
    }
}

impl Paraphraser for OfflineParaphraser {
    fn paraphrase(
        &self,
        text: &str,
        prompt_type: PromptType,
        context: Option<&str>,
    ) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::Paraphrase("empty input text".into()));
        }
        let mut rng = self.rng_for(text, prompt_type, context);
        let rate = Self::substitution_rate(prompt_type, &mut rng);
        let reorder = prompt_type != PromptType::Simple;
        let shuffle = prompt_type == PromptType::Complex;

        let lines: Vec<String> = text
            .split('\n')
            .map(|line| {
                if line.trim().is_empty() {
                    return line.to_string();
                }
                let mut sentences = Self::split_sentences(line);
                if shuffle && sentences.len() >= 2 {
                    let before = sentences.clone();
                    sentences.shuffle(&mut rng);
                    if sentences == before {
                        sentences.rotate_left(1);
                    }
                }
                let rewritten: Vec<String> = sentences
                    .iter()
                    .map(|s| Self::rewrite_sentence(s, rate, reorder, &mut rng))
                    .collect();
                rewritten.join(" ")
            })
            .collect();
        let mut out = lines.join("\n");
        if out == text {
            out = format!("Indeed, {out}");
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Output cleanup shared by the remote providers

/// Remove reasoning regions delimited by the configured token pairs, then
/// drop leading explanatory-preamble lines. An opening token with no closer
/// drops everything from the opener to the end (reported, not fatal).
pub fn strip_reasoning(raw: &str, suppression: &[(String, String)]) -> String {
    let mut text = raw.to_string();
    for (open, close) in suppression {
        if open.is_empty() || close.is_empty() {
            continue;
        }
        loop {
            let Some(start) = text.find(open.as_str()) else { break };
            match text[start + open.len()..].find(close.as_str()) {
                Some(rel_end) => {
                    let end = start + open.len() + rel_end + close.len();
                    text.replace_range(start..end, "");
                }
                None => {
                    log::warn!("unclosed reasoning delimiter {open:?}; dropping trailing text");
                    text.truncate(start);
                    break;
                }
            }
        }
    }

    // Preamble heuristic: a short leading line that announces the answer
    // ("Sure, here is ...") rather than being the answer.
    const PREAMBLE_STARTS: [&str; 8] = [
        "sure", "certainly", "here", "of course", "okay", "below", "the following", "as requested",
    ];
    let mut lines: Vec<&str> = text.lines().collect();
    let mut dropped = 0;
    while dropped < 3 && lines.len() > 1 {
        let first = lines[0].trim();
        let lower = first.to_lowercase();
        let announces = PREAMBLE_STARTS.iter().any(|p| lower.starts_with(p));
        let marker = first.ends_with(':')
            || ((first.ends_with('.') || first.ends_with('!')) && first.len() <= 80);
        if first.is_empty() || (announces && marker) {
            lines.remove(0);
            dropped += 1;
        } else {
            break;
        }
    }
    lines.join("\n").trim().to_string()
}

/// Truncate at the second occurrence of any repeated run of `n` consecutive
/// words, the telltale of a generation loop. Returns the text unchanged when
/// no repetition exists.
pub fn truncate_loops(text: &str, n: usize) -> String {
    let words: Vec<(usize, &str)> = {
        let mut v = Vec::new();
        let mut offset = 0;
        for part in text.split_inclusive(char::is_whitespace) {
            let trimmed = part.trim_end_matches(char::is_whitespace);
            if !trimmed.is_empty() {
                v.push((offset, trimmed));
            }
            offset += part.len();
        }
        v
    };
    if words.len() < n * 2 {
        return text.to_string();
    }
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for i in 0..=(words.len() - n) {
        let mut h = Fnv1a::new();
        for (_, w) in &words[i..i + n] {
            h.update(w.as_bytes());
            h.update(&[0]);
        }
        let key = h.finish();
        if let Some(&first) = seen.get(&key) {
            let matches = (0..n).all(|k| words[first + k].1 == words[i + k].1);
            if matches {
                log::warn!("repeated {n}-word run detected; truncating looped output");
                return text[..words[i].0].trim_end().to_string();
            }
        }
        seen.entry(key).or_insert(i);
    }
    text.to_string()
}

// ---------------------------------------------------------------------------
// HTTP provider

/// Connection settings for a chat-completion style JSON endpoint. The
/// request body template substitutes `{{prompt}}` and `{{model}}` in any
/// string value; the response text is read at `text_out_pointer`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth.
    pub auth_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub max_in_flight: usize,
    /// Open/close token pairs whose regions are cut from model output.
    pub suppression: Vec<(String, String)>,
    /// Custom request body; None selects the standard chat-completion shape.
    pub request_template: Option<serde_json::Value>,
    pub text_out_pointer: String,
    /// When set, every (prompt, response) pair is appended here as a JSON
    /// line for later replay.
    pub replay_log: Option<PathBuf>,
    pub max_output_chars: usize,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig {
            endpoint: String::new(),
            model: String::new(),
            auth_env: None,
            timeout_secs: 60,
            retries: 2,
            max_in_flight: 4,
            suppression: vec![("<thinking>".into(), "</thinking>".into())],
            request_template: None,
            text_out_pointer: "/choices/0/message/content".into(),
            replay_log: None,
            max_output_chars: 20_000,
        }
    }
}

impl HttpProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint.is_empty() {
            return Err(Error::Config("http provider requires an endpoint".into()));
        }
        if self.model.is_empty() {
            return Err(Error::Config("http provider requires a model name".into()));
        }
        Ok(())
    }
}

struct Gate {
    lock: Mutex<usize>,
    cv: Condvar,
    max: usize,
}

impl Gate {
    fn new(max: usize) -> Gate {
        Gate {
            lock: Mutex::new(0),
            cv: Condvar::new(),
            max: max.max(1),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut count = self.lock.lock().unwrap();
        while *count >= self.max {
            count = self.cv.wait(count).unwrap();
        }
        *count += 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut count = self.gate.lock.lock().unwrap();
        *count -= 1;
        self.gate.cv.notify_one();
    }
}

fn substitute_placeholders(value: &serde_json::Value, prompt: &str, model: &str) -> serde_json::Value {
    match value {
        serde_json::Value::String(s) => serde_json::Value::String(
            s.replace("{{prompt}}", prompt).replace("{{model}}", model),
        ),
        serde_json::Value::Array(items) => serde_json::Value::Array(
            items.iter().map(|v| substitute_placeholders(v, prompt, model)).collect(),
        ),
        serde_json::Value::Object(map) => serde_json::Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), substitute_placeholders(v, prompt, model)))
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Remote paraphraser for a JSON chat endpoint, with bounded in-flight
/// requests, retry with backoff, reasoning-block stripping, loop
/// truncation, and optional request/response logging for replay.
pub struct HttpParaphraser {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
    log_lock: Mutex<()>,
}

impl HttpParaphraser {
    pub fn new(config: HttpProviderConfig) -> Result<HttpParaphraser> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let gate = Gate::new(config.max_in_flight);
        Ok(HttpParaphraser {
            config,
            client,
            gate,
            log_lock: Mutex::new(()),
        })
    }

    fn request_body(&self, prompt: &str) -> serde_json::Value {
        match &self.config.request_template {
            Some(template) => substitute_placeholders(template, prompt, &self.config.model),
            None => serde_json::json!({
                "model": self.config.model,
                "messages": [{"role": "user", "content": prompt}],
            }),
        }
    }

    fn send_once(&self, body: &serde_json::Value) -> std::result::Result<String, String> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(var) = &self.config.auth_env {
            if let Ok(token) = std::env::var(var) {
                req = req.bearer_auth(token);
            }
        }
        let resp = req.send().map_err(|e| format!("transport: {e}"))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let value: serde_json::Value = resp.json().map_err(|e| format!("bad json: {e}"))?;
        value
            .pointer(&self.config.text_out_pointer)
            .and_then(|v| v.as_str())
            .map(|s| s.to_string())
            .ok_or_else(|| format!("no text at {}", self.config.text_out_pointer))
    }

    fn record(&self, prompt: &str, response: &str) {
        let Some(path) = &self.config.replay_log else { return };
        let line = serde_json::json!({"prompt": prompt, "response": response});
        let _guard = self.log_lock.lock().unwrap();
        let appended = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = appended {
            log::warn!("could not append to replay log {}: {e}", path.display());
        }
    }

    fn clean(&self, raw: &str) -> String {
        let mut text = strip_reasoning(raw, &self.config.suppression);
        if text.chars().count() > self.config.max_output_chars {
            log::warn!(
                "model output over {} chars; truncating",
                self.config.max_output_chars
            );
            text = text.chars().take(self.config.max_output_chars).collect();
        }
        truncate_loops(&text, 20)
    }
}

impl Paraphraser for HttpParaphraser {
    fn paraphrase(
        &self,
        text: &str,
        prompt_type: PromptType,
        context: Option<&str>,
    ) -> Result<String> {
        let prompt = render_prompt(prompt_type, text, context)?;
        let body = self.request_body(&prompt);
        let _slot = self.gate.acquire();
        let mut last_error = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 * (1 << (attempt - 1))));
            }
            match self.send_once(&body) {
                Ok(raw) => {
                    let cleaned = self.clean(&raw);
                    if cleaned.is_empty() {
                        return Err(Error::Paraphrase("empty model output".into()));
                    }
                    self.record(&prompt, &cleaned);
                    return Ok(cleaned);
                }
                Err(e) => {
                    log::warn!("paraphrase request attempt {} failed: {e}", attempt + 1);
                    last_error = e;
                }
            }
        }
        Err(Error::Paraphrase(format!(
            "request failed after {} attempts: {last_error}",
            self.config.retries + 1
        )))
    }
}

// ---------------------------------------------------------------------------
// Replay provider

#[derive(Debug, Deserialize)]
struct ReplayRecord {
    prompt: String,
    response: String,
}

/// Answers paraphrase calls from a recorded JSON-lines log of
/// (prompt, response) pairs, keyed by the fully rendered prompt.
pub struct ReplayParaphraser {
    responses: HashMap<String, String>,
}

impl ReplayParaphraser {
    pub fn load(path: &Path) -> Result<ReplayParaphraser> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut responses = HashMap::new();
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(line).map_err(|e| {
                Error::Config(format!("{}:{}: bad replay record: {e}", path.display(), idx + 1))
            })?;
            responses.insert(record.prompt, record.response);
        }
        Ok(ReplayParaphraser { responses })
    }
}

impl Paraphraser for ReplayParaphraser {
    fn paraphrase(
        &self,
        text: &str,
        prompt_type: PromptType,
        context: Option<&str>,
    ) -> Result<String> {
        let prompt = render_prompt(prompt_type, text, context)?;
        self.responses
            .get(&prompt)
            .cloned()
            .ok_or_else(|| Error::Paraphrase("prompt not present in replay log".into()))
    }
}

// ---------------------------------------------------------------------------

/// Provider selection as it appears in run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Offline { seed: u64 },
    Http(HttpProviderConfig),
    Replay { log: PathBuf },
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn Paraphraser + Send + Sync>> {
        match self {
            ProviderConfig::Offline { seed } => Ok(Box::new(OfflineParaphraser::new(*seed))),
            ProviderConfig::Http(config) => Ok(Box::new(HttpParaphraser::new(config.clone())?)),
            ProviderConfig::Replay { log } => Ok(Box::new(ReplayParaphraser::load(log)?)),
        }
    }
}
