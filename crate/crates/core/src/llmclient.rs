//! Sentence paraphrasing through an OpenAI-compatible chat-completions endpoint,
//! plus offline stand-ins.
//!
//! Remote requests send a single user message, `prompt_template + sentence`, at
//! the configured temperature. Outputs are cached on disk keyed by a SHA-256 of
//! `(model, temperature, pass, prompt_template, input)`, so a warm cache
//! replays a run with no network traffic.
//!
//! Cache file format (version 1), JSON lines:
//!
//! ```text
//! {"format":"hybriddetect-paraphrase-cache","version":1}
//! {"key":"<hex sha256>","output":"<text>","timestamp":1700000000}
//! ```

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Rewrite prompt; the sentence is appended directly after the trailing newline.
pub const DEFAULT_PROMPT: &str = "Make re-writes to the following sentence without changing the meaning. Only return the sentence, no other information of any kind:\n";
pub const DEFAULT_TEMPERATURE: f64 = 0.9;
pub const MAX_PASSES: u32 = 2;
pub const API_KEY_ENV: &str = "HYBRIDDETECT_API_KEY";
pub const FALLBACK_API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const CACHE_FORMAT: &str = "hybriddetect-paraphrase-cache";
pub const CACHE_VERSION: u32 = 1;
pub const CACHE_FILE: &str = "paraphrase-cache.jsonl";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParaphraseError {
    #[error("input sentence is empty")]
    EmptyInput,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("model returned an empty response")]
    EmptyResponse,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("response of {output} chars exceeds {limit:.0} chars allowed for a {input}-char input")]
    TooLong { input: usize, output: usize, limit: f64 },
    #[error("cache: {0}")]
    Cache(String),
    #[error("invalid paraphrase configuration: {0}")]
    InvalidConfig(String),
}

impl ParaphraseError {
    pub fn is_network(&self) -> bool {
        matches!(
            self,
            ParaphraseError::Transport(_)
                | ParaphraseError::Status { .. }
                | ParaphraseError::MalformedResponse(_)
        )
    }

    fn is_retryable(&self) -> bool {
        match self {
            ParaphraseError::Transport(_) => true,
            ParaphraseError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

type Result<T, E = ParaphraseError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParaphraseConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub passes: u32,
    pub prompt_template: String,
    pub timeout_secs: u64,
    /// Maximum number of attempts per request, including the first.
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    /// Outputs longer than this multiple of the input length are rejected.
    pub max_length_ratio: f64,
    /// Bounded number of in-flight requests.
    pub concurrency: usize,
    /// Shared request rate limit; `None` disables it.
    pub requests_per_second: Option<f64>,
}

impl Default for ParaphraseConfig {
    fn default() -> Self {
        ParaphraseConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "llama-3.1-8b-instruct".into(),
            temperature: DEFAULT_TEMPERATURE,
            passes: MAX_PASSES,
            prompt_template: DEFAULT_PROMPT.into(),
            timeout_secs: 60,
            max_retries: 4,
            backoff_base_ms: 500,
            max_length_ratio: 4.0,
            concurrency: 4,
            requests_per_second: None,
        }
    }
}

impl ParaphraseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ParaphraseError::InvalidConfig(m));
        if !(1..=MAX_PASSES).contains(&self.passes) {
            return bad(format!("passes must be 1 or 2, got {}", self.passes));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature must be finite and >= 0, got {}", self.temperature));
        }
        if self.max_retries == 0 {
            return bad("max_retries must be at least 1".into());
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.max_length_ratio.is_nan() || self.max_length_ratio <= 0.0 {
            return bad("max_length_ratio must be positive".into());
        }
        if let Some(rps) = self.requests_per_second {
            if !(rps > 0.0 && rps.is_finite()) {
                return bad("requests_per_second must be positive".into());
            }
        }
        Ok(())
    }

    pub fn prompt_overridden(&self) -> bool {
        self.prompt_template != DEFAULT_PROMPT
    }

    /// Resolves the endpoint to a chat-completions URL, appending the path when
    /// only an API base such as `http://host/v1` is given.
    pub fn completions_url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Rewrites one sentence for one pass. Implementations must be total: a non-empty
/// input yields a non-empty output or an error.
pub trait Paraphraser: Send + Sync {
    fn name(&self) -> String;

    /// `pass` is 1-based.
    fn rewrite(&self, text: &str, pass: u32, config: &ParaphraseConfig) -> Result<String>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Paraphraser for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn rewrite(&self, text: &str, _pass: u32, _config: &ParaphraseConfig) -> Result<String> {
        Ok(text.to_string())
    }
}

const SYNONYMS: &[(&str, &str)] = &[
    ("important", "significant"),
    ("crucial", "vital"),
    ("note", "observe"),
    ("plays", "serves"),
    ("role", "part"),
    ("rapidly", "quickly"),
    ("evolving", "changing"),
    ("landscape", "environment"),
    ("testament", "tribute"),
    ("highlighting", "emphasizing"),
    ("importance", "value"),
    ("underscores", "stresses"),
    ("significance", "weight"),
    ("realm", "domain"),
    ("powerful", "strong"),
    ("reminder", "signal"),
    ("fostering", "building"),
    ("navigating", "handling"),
    ("complexities", "difficulties"),
    ("paving", "clearing"),
    ("brighter", "better"),
    ("pivotal", "decisive"),
    ("moment", "point"),
    ("demonstrates", "shows"),
    ("findings", "results"),
    ("suggest", "indicate"),
    ("comprehensive", "thorough"),
    ("framework", "structure"),
    ("further", "additional"),
    ("needed", "required"),
    ("insights", "understanding"),
    ("valuable", "useful"),
    ("novel", "new"),
    ("approach", "method"),
    ("enables", "allows"),
    ("said", "stated"),
    ("told", "informed"),
    ("announced", "declared"),
    ("big", "large"),
    ("help", "assist"),
    ("many", "numerous"),
    ("also", "additionally"),
    ("however", "nevertheless"),
    ("because", "since"),
    ("about", "regarding"),
    ("start", "begin"),
    ("buy", "purchase"),
    ("that", "which"),
    ("in", "within"),
    ("to", "toward"),
];

/// Seeded rule-based rewriter: swaps words from a fixed synonym table. The swap
/// decisions depend only on `(seed, pass, text)`, so results do not depend on
/// call order or concurrency.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicLocal {
    pub seed: u64,
    pub swap_probability: f64,
}

impl DeterministicLocal {
    pub fn new(seed: u64) -> Self {
        DeterministicLocal {
            seed,
            swap_probability: 0.7,
        }
    }

    fn rng(&self, text: &str, pass: u32) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(pass.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}

fn lookup_synonym(word: &str) -> Option<&'static str> {
    SYNONYMS.iter().find_map(|&(a, b)| {
        if a == word {
            Some(b)
        } else if b == word {
            Some(a)
        } else {
            None
        }
    })
}

fn match_case(template: &str, word: &str) -> String {
    let mut chars = template.chars();
    match chars.next() {
        Some(c) if c.is_uppercase() => {
            let mut out: String = word.chars().next().into_iter().flat_map(char::to_uppercase).collect();
            out.extend(word.chars().skip(1));
            out
        }
        _ => word.to_string(),
    }
}

impl Paraphraser for DeterministicLocal {
    fn name(&self) -> String {
        format!("local(seed={})", self.seed)
    }

    fn rewrite(&self, text: &str, pass: u32, _config: &ParaphraseConfig) -> Result<String> {
        let mut rng = self.rng(text, pass);
        let words: Vec<String> = text
            .split_whitespace()
            .map(|raw| {
                let start = raw.find(|c: char| c.is_alphanumeric()).unwrap_or(raw.len());
                let end = raw
                    .rfind(|c: char| c.is_alphanumeric())
                    .map_or(start, |i| i + raw[i..].chars().next().map_or(1, char::len_utf8));
                let core = &raw[start..end.max(start)];
                let swap = rng.gen_bool(self.swap_probability);
                match lookup_synonym(&core.to_lowercase()) {
                    Some(replacement) if swap => {
                        format!("{}{}{}", &raw[..start], match_case(core, replacement), &raw[end..])
                    }
                    _ => raw.to_string(),
                }
            })
            .collect();
        let out = words.join(" ");
        if out.is_empty() {
            Ok(text.to_string())
        } else {
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Blocking JSON POST; swapped for an instrumented fake in tests.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value) -> Result<HttpResponse>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value) -> Result<HttpResponse> {
        let mut request = self.agent.post(url);
        for (k, v) in headers {
            request = request.header(k.as_str(), v.as_str());
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| ParaphraseError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ParaphraseError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub output: String,
    pub timestamp: u64,
}

/// Append-only on-disk cache. The first value stored under a key wins.
pub struct ParaphraseCache {
    path: PathBuf,
    state: Mutex<(HashMap<String, String>, File)>,
}

impl ParaphraseCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let err = |e: std::io::Error| ParaphraseError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        let exists = path.exists() && fs::metadata(&path).map_err(err)?.len() > 0;
        if exists {
            let reader = BufReader::new(File::open(&path).map_err(err)?);
            let mut lines = reader.lines();
            let header_line = lines.next().transpose().map_err(err)?.unwrap_or_default();
            let header: CacheHeader = serde_json::from_str(&header_line)
                .map_err(|e| ParaphraseError::Cache(format!("{}: bad header: {e}", path.display())))?;
            if header.format != CACHE_FORMAT || header.version != CACHE_VERSION {
                return Err(ParaphraseError::Cache(format!(
                    "{}: unsupported cache {} v{}",
                    path.display(),
                    header.format,
                    header.version
                )));
            }
            for line in lines {
                let line = line.map_err(err)?;
                // a torn trailing line is ignored
                if let Ok(entry) = serde_json::from_str::<CacheEntry>(&line) {
                    entries.entry(entry.key).or_insert(entry.output);
                }
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(err)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(err)?;
        if !exists {
            let header = serde_json::to_string(&CacheHeader {
                format: CACHE_FORMAT.into(),
                version: CACHE_VERSION,
            })
            .expect("header serializes");
            writeln!(file, "{header}").map_err(err)?;
        }
        Ok(ParaphraseCache {
            path,
            state: Mutex::new((entries, file)),
        })
    }

    pub fn key(config: &ParaphraseConfig, pass: u32, input: &str) -> String {
        let mut hasher = Sha256::new();
        let mut field = |bytes: &[u8]| {
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        };
        field(config.model.as_bytes());
        field(&config.temperature.to_bits().to_le_bytes());
        field(&pass.to_le_bytes());
        field(config.prompt_template.as_bytes());
        field(input.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        state.0.get(key).cloned()
    }

    pub fn insert(&self, key: &str, output: &str) -> Result<()> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if state.0.contains_key(key) {
            return Ok(());
        }
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let line = serde_json::to_string(&CacheEntry {
            key: key.to_string(),
            output: output.to_string(),
            timestamp,
        })
        .map_err(|e| ParaphraseError::Cache(e.to_string()))?;
        writeln!(state.1, "{line}")
            .and_then(|_| state.1.flush())
            .map_err(|e| ParaphraseError::Cache(format!("{}: {e}", self.path.display())))?;
        state.0.insert(key.to_string(), output.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct RateLimiter {
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait(&self, requests_per_second: Option<f64>) {
        let Some(rps) = requests_per_second else { return };
        let interval = Duration::from_secs_f64(1.0 / rps);
        let sleep_until = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if sleep_until > now {
            std::thread::sleep(sleep_until - now);
        }
    }
}

/// Client for an OpenAI-compatible `chat/completions` endpoint.
pub struct Remote {
    transport: Box<dyn Transport>,
    api_key: Option<String>,
    cache: Option<ParaphraseCache>,
    limiter: RateLimiter,
}

impl Remote {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Remote {
            transport,
            api_key: None,
            cache: None,
            limiter: RateLimiter {
                next_slot: Mutex::new(None),
            },
        }
    }

    /// HTTP client with the API key taken from the environment.
    pub fn from_env(config: &ParaphraseConfig) -> Self {
        let key = std::env::var(API_KEY_ENV)
            .or_else(|_| std::env::var(FALLBACK_API_KEY_ENV))
            .ok()
            .filter(|k| !k.is_empty());
        let mut remote = Remote::new(Box::new(UreqTransport::new(Duration::from_secs(config.timeout_secs))));
        remote.api_key = key;
        remote
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_cache(mut self, cache: ParaphraseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn cache(&self) -> Option<&ParaphraseCache> {
        self.cache.as_ref()
    }

    pub fn request_body(text: &str, config: &ParaphraseConfig) -> Value {
        json!({
            "model": config.model,
            "messages": [
                {"role": "user", "content": format!("{}{}", config.prompt_template, text)}
            ],
            "temperature": config.temperature,
        })
    }

    fn request_once(&self, body: &Value, config: &ParaphraseConfig) -> Result<String> {
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(key) = &self.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {key}")));
        }
        self.limiter.wait(config.requests_per_second);
        let response = self.transport.post_json(&config.completions_url(), &headers, body)?;
        if !(200..300).contains(&response.status) {
            let mut snippet = response.body;
            snippet.truncate(200);
            return Err(ParaphraseError::Status {
                status: response.status,
                body: snippet,
            });
        }
        if response.body.trim().is_empty() {
            return Err(ParaphraseError::EmptyResponse);
        }
        let parsed: Value = serde_json::from_str(&response.body)
            .map_err(|e| ParaphraseError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .pointer("/choices/0/message/content")
            .ok_or_else(|| ParaphraseError::MalformedResponse("missing choices[0].message.content".into()))?;
        match content {
            Value::String(s) => Ok(s.clone()),
            Value::Null => Err(ParaphraseError::EmptyResponse),
            other => Err(ParaphraseError::MalformedResponse(format!("content is not a string: {other}"))),
        }
    }

    fn request_with_retry(&self, body: &Value, config: &ParaphraseConfig) -> Result<String> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.request_once(body, config) {
                Err(e) if e.is_retryable() && attempt < config.max_retries => {
                    let delay = config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                    log::warn!("request failed ({e}); retry {attempt} in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                }
                other => return other,
            }
        }
    }
}

/// Trims whitespace, one optional `Sentence:` prefix and wrapping quotation marks.
pub fn clean_response(raw: &str) -> String {
    const QUOTES: &[char] = &['"', '\'', '\u{201C}', '\u{201D}', '\u{2018}', '\u{2019}', '`'];
    let mut text = raw.trim();
    if text.len() >= 9 && text[..9].eq_ignore_ascii_case("sentence:") {
        text = text[9..].trim_start();
    }
    text.trim_matches(|c: char| QUOTES.contains(&c) || c.is_whitespace())
        .to_string()
}

impl Paraphraser for Remote {
    fn name(&self) -> String {
        "remote".into()
    }

    fn rewrite(&self, text: &str, pass: u32, config: &ParaphraseConfig) -> Result<String> {
        let key = ParaphraseCache::key(config, pass, text);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let raw = self.request_with_retry(&Self::request_body(text, config), config)?;
        let cleaned = clean_response(&raw);
        if cleaned.is_empty() {
            return Err(ParaphraseError::EmptyResponse);
        }
        if let Some(cache) = &self.cache {
            cache.insert(&key, &cleaned)?;
        }
        Ok(cleaned)
    }
}

/// Applies up to `passes` rewrites, feeding each output into the next pass.
/// Returns the outputs that succeeded and the error that stopped the chain, if any.
pub fn paraphrase_chain(
    p: &dyn Paraphraser,
    sentence: &str,
    config: &ParaphraseConfig,
    passes: u32,
) -> (Vec<String>, Option<ParaphraseError>) {
    let mut outputs = Vec::new();
    if sentence.trim().is_empty() {
        return (outputs, Some(ParaphraseError::EmptyInput));
    }
    let mut current = sentence.to_string();
    for pass in 1..=passes {
        let result = p.rewrite(&current, pass, config).and_then(|out| {
            if out.trim().is_empty() {
                return Err(ParaphraseError::EmptyResponse);
            }
            let (input, output) = (current.chars().count(), out.chars().count());
            let limit = config.max_length_ratio * input.max(1) as f64;
            if output as f64 > limit {
                return Err(ParaphraseError::TooLong { input, output, limit });
            }
            Ok(out)
        });
        match result {
            Ok(out) => {
                current = out.clone();
                outputs.push(out);
            }
            Err(e) => return (outputs, Some(e)),
        }
    }
    (outputs, None)
}

/// Rewrites `sentence` `config.passes` times and returns the final text.
pub fn paraphrase(p: &dyn Paraphraser, sentence: &str, config: &ParaphraseConfig) -> Result<String> {
    config.validate()?;
    match paraphrase_chain(p, sentence, config, config.passes) {
        (_, Some(e)) => Err(e),
        (mut outputs, None) => Ok(outputs.pop().expect("at least one pass")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Replays scripted responses and counts calls.
    struct Scripted {
        calls: Arc<AtomicUsize>,
        script: Mutex<VecDeque<Result<HttpResponse>>>,
        bodies: Arc<Mutex<Vec<Value>>>,
    }

    impl Scripted {
        fn new(script: Vec<Result<HttpResponse>>) -> (Self, Arc<AtomicUsize>, Arc<Mutex<Vec<Value>>>) {
            let calls = Arc::new(AtomicUsize::new(0));
            let bodies = Arc::new(Mutex::new(Vec::new()));
            (
                Scripted {
                    calls: calls.clone(),
                    script: Mutex::new(script.into()),
                    bodies: bodies.clone(),
                },
                calls,
                bodies,
            )
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, _url: &str, _headers: &[(String, String)], body: &Value) -> Result<HttpResponse> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.bodies.lock().unwrap().push(body.clone());
            self.script
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| Err(ParaphraseError::Transport("script exhausted".into())))
        }
    }

    fn ok(content: &str) -> Result<HttpResponse> {
        Ok(HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpResponse> {
        Ok(HttpResponse {
            status: code,
            body: "err".into(),
        })
    }

    fn fast_config() -> ParaphraseConfig {
        ParaphraseConfig {
            backoff_base_ms: 0,
            max_retries: 3,
            ..ParaphraseConfig::default()
        }
    }

    #[test]
    fn default_prompt_and_body() {
        assert!(DEFAULT_PROMPT.ends_with("of any kind:\n"));
        let cfg = ParaphraseConfig::default();
        assert_eq!(cfg.temperature, 0.9);
        let body = Remote::request_body("The cat sat.", &cfg);
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(
            body["messages"][0]["content"].as_str().unwrap(),
            format!("{DEFAULT_PROMPT}The cat sat.")
        );
        assert_eq!(body["temperature"], 0.9);
        assert!(!cfg.prompt_overridden());
    }

    #[test]
    fn completions_url() {
        let mut cfg = ParaphraseConfig {
            endpoint: "http://h:1/v1/".into(),
            ..ParaphraseConfig::default()
        };
        assert_eq!(cfg.completions_url(), "http://h:1/v1/chat/completions");
        cfg.endpoint = "http://h:1/v1/chat/completions".into();
        assert_eq!(cfg.completions_url(), "http://h:1/v1/chat/completions");
    }

    #[test]
    fn identity_two_passes() {
        let cfg = ParaphraseConfig::default();
        let s = "\"Quoted,\" she said.";
        assert_eq!(paraphrase(&Identity, s, &cfg).unwrap(), s);
        assert_eq!(paraphrase(&Identity, "  ", &cfg), Err(ParaphraseError::EmptyInput));
    }

    #[test]
    fn config_validation() {
        let cfg = ParaphraseConfig { passes: 3, ..ParaphraseConfig::default() };
        assert!(paraphrase(&Identity, "x", &cfg).is_err());
        let cfg = ParaphraseConfig { temperature: f64::NAN, ..ParaphraseConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cleaning() {
        assert_eq!(clean_response("  \"The dog ran.\" \n"), "The dog ran.");
        assert_eq!(clean_response("Sentence: The dog ran."), "The dog ran.");
        assert_eq!(clean_response("sentence: “The dog ran.”"), "The dog ran.");
        assert_eq!(clean_response("\"\""), "");
    }

    #[test]
    fn local_is_deterministic_and_changes_text() {
        let cfg = ParaphraseConfig::default();
        let p = DeterministicLocal::new(3);
        let s = "It is important to note that the crucial role of funding, however, is big.";
        let a = paraphrase(&p, s, &cfg).unwrap();
        assert_eq!(a, paraphrase(&p, s, &cfg).unwrap());
        assert_ne!(a, s);
        assert!(a.ends_with('.'));
        assert_eq!(p.rewrite("Hello world", 1, &cfg).unwrap(), "Hello world");
    }

    #[test]
    fn remote_cleans_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join(CACHE_FILE);
        let cfg = fast_config();
        let (transport, calls, bodies) = Scripted::new(vec![ok("\"First rewrite.\""), ok("Sentence: Second rewrite.")]);
        let remote = Remote::new(Box::new(transport)).with_cache(ParaphraseCache::open(&cache_path).unwrap());
        let out = paraphrase(&remote, "Original sentence.", &cfg).unwrap();
        assert_eq!(out, "Second rewrite.");
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        let sent = bodies.lock().unwrap();
        assert!(sent[1]["messages"][0]["content"].as_str().unwrap().ends_with("First rewrite."));
        drop(sent);

        // warm cache from disk: zero requests
        let (silent, silent_calls, _) = Scripted::new(vec![]);
        let warm = Remote::new(Box::new(silent)).with_cache(ParaphraseCache::open(&cache_path).unwrap());
        assert_eq!(warm.cache().unwrap().len(), 2);
        assert_eq!(paraphrase(&warm, "Original sentence.", &cfg).unwrap(), out);
        assert_eq!(silent_calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn cache_keys_distinguish_passes_and_settings() {
        let cfg = ParaphraseConfig::default();
        let k1 = ParaphraseCache::key(&cfg, 1, "x");
        assert_ne!(k1, ParaphraseCache::key(&cfg, 2, "x"));
        assert_ne!(k1, ParaphraseCache::key(&ParaphraseConfig { temperature: 0.5, ..cfg.clone() }, 1, "x"));
        assert_ne!(k1, ParaphraseCache::key(&ParaphraseConfig { model: "m".into(), ..cfg.clone() }, 1, "x"));
        assert_eq!(k1, ParaphraseCache::key(&cfg, 1, "x"));
    }

    #[test]
    fn cache_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let cache = ParaphraseCache::open(&path).unwrap();
        cache.insert("k", "first").unwrap();
        cache.insert("k", "second").unwrap();
        assert_eq!(cache.get("k").unwrap(), "first");
        drop(cache);
        let lines = fs::read_to_string(&path).unwrap();
        assert_eq!(lines.lines().count(), 2);
        assert_eq!(ParaphraseCache::open(&path).unwrap().get("k").unwrap(), "first");

        fs::write(&path, "{\"format\":\"other\",\"version\":1}\n").unwrap();
        assert!(ParaphraseCache::open(&path).is_err());
    }

    #[test]
    fn empty_response_is_typed() {
        let cfg = fast_config();
        let (t, _, _) = Scripted::new(vec![Ok(HttpResponse { status: 200, body: String::new() })]);
        let remote = Remote::new(Box::new(t));
        assert_eq!(remote.rewrite("Keep me.", 1, &cfg), Err(ParaphraseError::EmptyResponse));

        let (t, _, _) = Scripted::new(vec![ok("  \"\" ")]);
        let remote = Remote::new(Box::new(t));
        assert_eq!(remote.rewrite("Keep me.", 1, &cfg), Err(ParaphraseError::EmptyResponse));

        let (t, _, _) = Scripted::new(vec![Ok(HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"content": null}}]}).to_string(),
        })]);
        let remote = Remote::new(Box::new(t));
        assert_eq!(remote.rewrite("Keep me.", 1, &cfg), Err(ParaphraseError::EmptyResponse));
    }

    #[test]
    fn retries_transient_failures() {
        let cfg = fast_config();
        let (t, calls, _) = Scripted::new(vec![status(503), status(429), ok("Fine.")]);
        let remote = Remote::new(Box::new(t));
        assert_eq!(remote.rewrite("x y z", 1, &cfg).unwrap(), "Fine.");
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let cfg = fast_config();
        let (t, calls, _) = Scripted::new(vec![status(500), status(500), status(500), ok("late")]);
        let remote = Remote::new(Box::new(t));
        let err = remote.rewrite("x", 1, &cfg).unwrap_err();
        assert!(matches!(err, ParaphraseError::Status { status: 500, .. }));
        assert!(err.is_network());
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_fail_immediately() {
        let cfg = fast_config();
        let (t, calls, _) = Scripted::new(vec![status(401), ok("never")]);
        let remote = Remote::new(Box::new(t));
        assert!(matches!(
            remote.rewrite("x", 1, &cfg),
            Err(ParaphraseError::Status { status: 401, .. })
        ));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn runaway_output_rejected() {
        let cfg = ParaphraseConfig { max_length_ratio: 2.0, ..fast_config() };
        let (t, _, _) = Scripted::new(vec![ok(&"word ".repeat(50))]);
        let remote = Remote::new(Box::new(t));
        let (outputs, err) = paraphrase_chain(&remote, "short one", &cfg, 2);
        assert!(outputs.is_empty());
        assert!(matches!(err, Some(ParaphraseError::TooLong { .. })));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter { next_slot: Mutex::new(None) };
        let start = Instant::now();
        for _ in 0..3 {
            limiter.wait(Some(50.0));
        }
        assert!(start.elapsed() >= Duration::from_millis(39));
    }
}
