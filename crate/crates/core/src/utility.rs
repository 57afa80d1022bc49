//! Utility supervision: answer metrics, generator clients, and per-document
//! utility labeling.
//!
//! The utility of a document for a query is the answer metric the generator
//! reaches when it sees that single document as context.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{tokenize, Index, Query};
use crate::error::{Error, Result};
use crate::prompt::PromptTemplate;

/// Lowercase, turn punctuation into spaces, drop `a`/`an`/`the`, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn require_golds(golds: &[String]) -> Result<()> {
    if golds.is_empty() {
        Err(Error::Empty("gold answer set".into()))
    } else {
        Ok(())
    }
}

/// 1 when the normalized prediction contains some normalized gold answer.
pub fn accuracy(prediction: &str, golds: &[String]) -> Result<f64> {
    require_golds(golds)?;
    let pred = normalize_answer(prediction);
    let hit = golds.iter().any(|g| {
        let g = normalize_answer(g);
        if g.is_empty() {
            pred.is_empty()
        } else {
            pred.contains(&g)
        }
    });
    Ok(if hit { 1.0 } else { 0.0 })
}

fn token_f1(pred: &[&str], gold: &[&str]) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / pred.len() as f64;
    let r = common as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Token-level F1 against the best-matching gold answer.
pub fn f1_score(prediction: &str, golds: &[String]) -> Result<f64> {
    require_golds(golds)?;
    let pred = normalize_answer(prediction);
    let pred: Vec<&str> = pred.split_whitespace().collect();
    Ok(golds
        .iter()
        .map(|g| {
            let g = normalize_answer(g);
            let g: Vec<&str> = g.split_whitespace().collect();
            token_f1(&pred, &g)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    F1,
}

impl Metric {
    pub fn score(self, prediction: &str, golds: &[String]) -> Result<f64> {
        match self {
            Metric::Accuracy => accuracy(prediction, golds),
            Metric::F1 => f1_score(prediction, golds),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "f1" => Ok(Metric::F1),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
        })
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("request to {endpoint} failed after {attempts} attempt(s): {message}")]
    Network {
        endpoint: String,
        attempts: usize,
        message: String,
    },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("{0}")]
    Other(String),
}

/// A black-box text generator.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, GenerateError>;
}

pub const MOCK_UNKNOWN: &str = "i do not know";

/// Offline generator that answers only from planted facts.
///
/// A fact is written `fact(subject → answer)` (or with `->`). If a fact in
/// the context part of the prompt (everything before the last `Question:`)
/// has a subject whose tokens occur contiguously in the question, its answer
/// is returned; otherwise the reply is [`MOCK_UNKNOWN`].
#[derive(Debug, Clone)]
pub struct MockGenerator {
    fact: Regex,
}

impl Default for MockGenerator {
    fn default() -> Self {
        MockGenerator {
            fact: Regex::new(r"fact\(\s*([^()]+?)\s*(?:→|->)\s*([^()]+?)\s*\)").unwrap(),
        }
    }
}

impl MockGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn answer(&self, prompt: &str) -> String {
        let (context, question) = match prompt.rfind("Question:") {
            Some(i) => (&prompt[..i], &prompt[i + "Question:".len()..]),
            None => ("", prompt),
        };
        let question = question.split("Answer:").next().unwrap_or_default();
        let q_tokens = tokenize(question);
        for cap in self.fact.captures_iter(context) {
            let subject = tokenize(&cap[1]);
            if !subject.is_empty() && q_tokens.windows(subject.len()).any(|w| w == subject) {
                return cap[2].to_string();
            }
        }
        MOCK_UNKNOWN.to_string()
    }
}

impl Generator for MockGenerator {
    fn generate(&self, prompt: &str) -> Result<String, GenerateError> {
        Ok(self.answer(prompt))
    }
}

pub const API_KEY_ENV: &str = "GENERATOR_API_KEY";

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    endpoint: String,
    model_name: String,
    max_retries: usize,
    api_key: Option<String>,
    seed: Option<u64>,
    client: reqwest::blocking::Client,
}

impl RemoteGenerator {
    pub fn new(
        endpoint: impl Into<String>,
        model_name: impl Into<String>,
        timeout: Duration,
        max_retries: usize,
    ) -> Result<Self> {
        let endpoint = endpoint.into().trim_end_matches('/').to_string();
        let model_name = model_name.into();
        if endpoint.is_empty() || model_name.is_empty() {
            return Err(Error::Config(
                "remote generator needs a non-empty endpoint and model name".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(RemoteGenerator {
            endpoint,
            model_name,
            max_retries,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            seed: None,
            client,
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint)
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        let mut body = json!({
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0.0,
        });
        if let Some(seed) = self.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

fn excerpt(s: &str) -> String {
    const MAX: usize = 200;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, prompt: &str) -> Result<String, GenerateError> {
        let url = self.url();
        let body = self.request_body(prompt);
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let backoff = 100u64 << (attempt - 1).min(6);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    last_error = e.to_string();
                    log::warn!("generator attempt {} failed: {last_error}", attempt + 1);
                    continue;
                }
            };
            let status = resp.status();
            let text = resp
                .text()
                .map_err(|e| GenerateError::Decode(e.to_string()))?;
            if status.is_server_error() || status.as_u16() == 429 {
                last_error = format!("HTTP {}: {}", status.as_u16(), excerpt(&text));
                log::warn!("generator attempt {} failed: {last_error}", attempt + 1);
                continue;
            }
            if !status.is_success() {
                return Err(GenerateError::Status {
                    status: status.as_u16(),
                    body: excerpt(&text),
                });
            }
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| GenerateError::Decode(e.to_string()))?;
            return value["choices"][0]["message"]["content"]
                .as_str()
                .map(|s| s.trim().to_string())
                .ok_or_else(|| GenerateError::Decode(format!("no message content in {}", excerpt(&text))));
        }
        Err(GenerateError::Network {
            endpoint: url,
            attempts: self.max_retries + 1,
            message: last_error,
        })
    }
}

#[derive(Debug, Clone)]
pub enum GeneratorClient {
    Mock(MockGenerator),
    Remote(RemoteGenerator),
}

impl Generator for GeneratorClient {
    fn generate(&self, prompt: &str) -> Result<String, GenerateError> {
        match self {
            GeneratorClient::Mock(g) => g.generate(prompt),
            GeneratorClient::Remote(g) => g.generate(prompt),
        }
    }
}

/// Utility label of one (query, document) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRecord {
    pub query_id: String,
    pub doc_id: String,
    pub utility: f64,
    pub grade: u32,
    /// 1-based first-stage retrieval rank.
    pub rank: usize,
    #[serde(rename = "output")]
    pub generator_output: String,
}

pub fn grade_for(utility: f64, g_max: u32) -> u32 {
    (utility.clamp(0.0, 1.0) * f64::from(g_max)).round() as u32
}

#[derive(Debug, Clone)]
pub struct LabelConfig {
    pub n_retrieve: usize,
    pub metric: Metric,
    pub g_max: u32,
    pub template: PromptTemplate,
    pub max_in_flight: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            n_retrieve: 10,
            metric: Metric::F1,
            g_max: 4,
            template: PromptTemplate::default(),
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Default)]
pub struct LabelOutcome {
    pub records: Vec<UtilityRecord>,
    /// Queries dropped because the generator failed on one of their documents.
    pub skipped: Vec<(String, String)>,
}

/// Runs `f` over `0..n` on up to `workers` threads; results keep input order.
pub(crate) fn run_indexed<T: Send>(
    n: usize,
    workers: usize,
    f: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

/// Labels the top `n_retrieve` BM25 documents of every query with the
/// generator's single-document utility.
///
/// Records come grouped by query in input order; within a query they are
/// sorted by utility descending, ties by retrieval rank.
pub fn label_utilities(
    generator: &dyn Generator,
    queries: &[Query],
    index: &Index,
    config: &LabelConfig,
) -> Result<LabelOutcome> {
    if config.n_retrieve == 0 {
        return Err(Error::InvalidArgument("n_retrieve must be at least 1".into()));
    }
    if let Some(q) = queries.iter().find(|q| q.gold_answers.is_empty()) {
        return Err(Error::Empty("gold answer set".into()).in_query(&q.query_id));
    }

    let jobs: Vec<(usize, usize, String)> = queries
        .iter()
        .enumerate()
        .flat_map(|(qi, q)| {
            index
                .retrieve(q, config.n_retrieve)
                .into_iter()
                .enumerate()
                .map(move |(r, (doc_id, _))| (qi, r + 1, doc_id))
        })
        .collect();

    let outputs = run_indexed(jobs.len(), config.max_in_flight, |i| {
        let (qi, _, doc_id) = &jobs[i];
        let q = &queries[*qi];
        let doc = index.doc(doc_id).expect("retrieved ids are indexed");
        let prompt = config.template.render(&q.text, &[doc.text.as_str()]);
        generator.generate(&prompt)
    });

    let mut per_query: Vec<Vec<(usize, String, String)>> = vec![Vec::new(); queries.len()];
    let mut failed: Vec<Option<String>> = vec![None; queries.len()];
    for ((qi, rank, doc_id), out) in jobs.into_iter().zip(outputs) {
        match out {
            Ok(text) => per_query[qi].push((rank, doc_id, text)),
            Err(e) => {
                failed[qi].get_or_insert_with(|| e.to_string());
            }
        }
    }

    let mut outcome = LabelOutcome::default();
    for (qi, q) in queries.iter().enumerate() {
        if let Some(err) = failed[qi].take() {
            log::warn!("skipping query {}: {err}", q.query_id);
            outcome.skipped.push((q.query_id.clone(), err));
            continue;
        }
        let mut group = Vec::with_capacity(per_query[qi].len());
        for (rank, doc_id, output) in per_query[qi].drain(..) {
            let utility = config.metric.score(&output, &q.gold_answers)?;
            group.push(UtilityRecord {
                query_id: q.query_id.clone(),
                doc_id,
                utility,
                grade: grade_for(utility, config.g_max),
                rank,
                generator_output: output,
            });
        }
        group.sort_by(|a, b| b.utility.total_cmp(&a.utility).then(a.rank.cmp(&b.rank)));
        outcome.records.extend(group);
    }
    Ok(outcome)
}

pub fn write_utility_records(path: &std::path::Path, records: &[UtilityRecord]) -> Result<()> {
    crate::corpus::write_jsonl(path, records)
}

pub fn read_utility_records(path: &std::path::Path) -> Result<Vec<UtilityRecord>> {
    crate::corpus::read_jsonl(path)
}
