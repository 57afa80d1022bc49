//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors. In `prompt_template`, `\n` stands for a newline.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::corpus::Bm25Params;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::prompt::{PromptTemplate, DEFAULT_TEMPLATE};
use crate::reranker::{LambdaMartConfig, LinearConfig};
use crate::topics::LdaConfig;
use crate::utility::{GeneratorClient, LabelConfig, Metric, MockGenerator, RemoteGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub n_retrieve: usize,
    pub context_size: usize,
    pub metric: Metric,
    pub g_max: u32,
    pub topic_a: usize,
    pub num_topics: usize,
    pub lda_iterations: usize,
    pub fold_in_iterations: usize,
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub lda_subset: Option<usize>,
    pub prompt_template: String,
    pub doc_char_budget: usize,
    pub seed: u64,
    pub train_top_k: Option<usize>,
    pub bm25_k1: f64,
    pub bm25_b: f64,

    pub generator: GeneratorKind,
    pub endpoint: String,
    pub model_name: String,
    pub timeout_secs: u64,
    pub max_retries: usize,
    pub max_in_flight: usize,

    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_rows_per_leaf: usize,
    pub sigma: f64,
    pub sigma_outer: bool,
    pub ndcg_cutoff: usize,
    pub early_stop_rounds: usize,
    pub validation_fraction: f64,
    pub linear_learning_rate: f64,
    pub linear_epochs: usize,

    pub corpus: PathBuf,
    pub dataset: PathBuf,
    pub test_dataset: PathBuf,
    pub index: PathBuf,
    pub topic_model: PathBuf,
    pub features: PathBuf,
    pub utilities: PathBuf,
    pub model: PathBuf,
    pub linear_model: PathBuf,
    pub run: PathBuf,
    pub predictions: PathBuf,
    pub report: PathBuf,
    pub run_tag: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lm = LambdaMartConfig::default();
        let lin = LinearConfig::default();
        PipelineConfig {
            n_retrieve: 10,
            context_size: 5,
            metric: Metric::F1,
            g_max: 4,
            topic_a: 20,
            num_topics: 100,
            lda_iterations: 500,
            fold_in_iterations: 50,
            lda_alpha: None,
            lda_beta: 0.01,
            lda_subset: None,
            prompt_template: DEFAULT_TEMPLATE.to_string(),
            doc_char_budget: 1500,
            seed: 42,
            train_top_k: None,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            generator: GeneratorKind::Mock,
            endpoint: String::new(),
            model_name: String::new(),
            timeout_secs: 60,
            max_retries: 3,
            max_in_flight: 8,
            num_trees: lm.num_trees,
            learning_rate: lm.learning_rate,
            max_leaves: lm.max_leaves,
            min_rows_per_leaf: lm.min_rows_per_leaf,
            sigma: lm.sigma,
            sigma_outer: lm.sigma_outer,
            ndcg_cutoff: lm.ndcg_cutoff,
            early_stop_rounds: lm.early_stop_rounds,
            validation_fraction: 0.1,
            linear_learning_rate: lin.learning_rate,
            linear_epochs: lin.epochs,
            corpus: "corpus.jsonl".into(),
            dataset: "train.jsonl".into(),
            test_dataset: "test.jsonl".into(),
            index: "index.json".into(),
            topic_model: "topics.lda".into(),
            features: "features.txt".into(),
            utilities: "utilities.jsonl".into(),
            model: "lambdamart.json".into(),
            linear_model: "linear.json".into(),
            run: "run.trec".into(),
            predictions: "predictions.jsonl".into(),
            report: "report.json".into(),
            run_tag: "utilrank".into(),
        }
    }
}

/// Every configuration key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("n_retrieve", "first-stage candidates per query (N)"),
    ("context_size", "documents placed in the prompt (k)"),
    ("metric", "utility metric: accuracy | f1"),
    ("g_max", "largest relevance grade"),
    ("topic_a", "number of top query topics for coverage"),
    ("num_topics", "LDA topics (M)"),
    ("lda_iterations", "Gibbs sweeps for LDA training"),
    ("fold_in_iterations", "Gibbs sweeps for topic inference"),
    ("lda_alpha", "doc-topic prior, or `auto` for 50/M"),
    ("lda_beta", "topic-word prior"),
    ("lda_subset", "train LDA on this many random documents, or `all`"),
    ("prompt_template", "prompt with {contexts} and {question}"),
    ("doc_char_budget", "characters kept per document in prompts"),
    ("seed", "seed for every random choice"),
    ("train_top_k", "keep only the top-k utility documents per query, or `all`"),
    ("bm25_k1", "BM25 term-frequency saturation"),
    ("bm25_b", "BM25 length normalization"),
    ("generator", "mock | remote"),
    ("endpoint", "base URL of an OpenAI-compatible API"),
    ("model_name", "generator model name"),
    ("timeout_secs", "per-request timeout"),
    ("max_retries", "retries after a failed request"),
    ("max_in_flight", "concurrent generator calls"),
    ("num_trees", "boosting rounds"),
    ("learning_rate", "shrinkage per tree"),
    ("max_leaves", "leaves per tree"),
    ("min_rows_per_leaf", "smallest leaf"),
    ("sigma", "sigmoid scale of the pairwise lambdas"),
    ("sigma_outer", "multiply lambdas by sigma: true | false"),
    ("ndcg_cutoff", "NDCG cutoff used in training"),
    ("early_stop_rounds", "rounds without validation gain before stopping"),
    ("validation_fraction", "share of training queries held out"),
    ("linear_learning_rate", "gradient step of the linear ranker"),
    ("linear_epochs", "gradient steps of the linear ranker"),
    ("corpus", "corpus JSON-lines file"),
    ("dataset", "training questions JSON-lines file"),
    ("test_dataset", "evaluation questions JSON-lines file"),
    ("index", "index file"),
    ("topic_model", "topic model file"),
    ("features", "ranking feature file"),
    ("utilities", "utility records JSON-lines file"),
    ("model", "LambdaMART model file"),
    ("linear_model", "linear ranker model file"),
    ("run", "TREC run output"),
    ("predictions", "answers JSON-lines output"),
    ("report", "evaluation report output (JSON)"),
    ("run_tag", "tag written in TREC runs"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>> {
    if value.trim() == none {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<T: ToString>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), T::to_string)
}

impl PipelineConfig {
    pub fn is_key(key: &str) -> bool {
        KEYS.iter().any(|(k, _)| *k == key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_retrieve" => self.n_retrieve = parse(key, value)?,
            "context_size" => self.context_size = parse(key, value)?,
            "metric" => self.metric = value.trim().parse()?,
            "g_max" => self.g_max = parse(key, value)?,
            "topic_a" => self.topic_a = parse(key, value)?,
            "num_topics" => self.num_topics = parse(key, value)?,
            "lda_iterations" => self.lda_iterations = parse(key, value)?,
            "fold_in_iterations" => self.fold_in_iterations = parse(key, value)?,
            "lda_alpha" => self.lda_alpha = parse_opt(key, value, "auto")?,
            "lda_beta" => self.lda_beta = parse(key, value)?,
            "lda_subset" => self.lda_subset = parse_opt(key, value, "all")?,
            "prompt_template" => self.prompt_template = value.replace("\\n", "\n"),
            "doc_char_budget" => self.doc_char_budget = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "train_top_k" => self.train_top_k = parse_opt(key, value, "all")?,
            "bm25_k1" => self.bm25_k1 = parse(key, value)?,
            "bm25_b" => self.bm25_b = parse(key, value)?,
            "generator" => {
                self.generator = match value.trim() {
                    "mock" => GeneratorKind::Mock,
                    "remote" => GeneratorKind::Remote,
                    other => {
                        return Err(Error::Config(format!("unknown generator `{other}`")));
                    }
                }
            }
            "endpoint" => self.endpoint = value.trim().to_string(),
            "model_name" => self.model_name = value.trim().to_string(),
            "timeout_secs" => self.timeout_secs = parse(key, value)?,
            "max_retries" => self.max_retries = parse(key, value)?,
            "max_in_flight" => self.max_in_flight = parse(key, value)?,
            "num_trees" => self.num_trees = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "max_leaves" => self.max_leaves = parse(key, value)?,
            "min_rows_per_leaf" => self.min_rows_per_leaf = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "sigma_outer" => self.sigma_outer = parse(key, value)?,
            "ndcg_cutoff" => self.ndcg_cutoff = parse(key, value)?,
            "early_stop_rounds" => self.early_stop_rounds = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "linear_learning_rate" => self.linear_learning_rate = parse(key, value)?,
            "linear_epochs" => self.linear_epochs = parse(key, value)?,
            "corpus" => self.corpus = value.trim().into(),
            "dataset" => self.dataset = value.trim().into(),
            "test_dataset" => self.test_dataset = value.trim().into(),
            "index" => self.index = value.trim().into(),
            "topic_model" => self.topic_model = value.trim().into(),
            "features" => self.features = value.trim().into(),
            "utilities" => self.utilities = value.trim().into(),
            "model" => self.model = value.trim().into(),
            "linear_model" => self.linear_model = value.trim().into(),
            "run" => self.run = value.trim().into(),
            "predictions" => self.predictions = value.trim().into(),
            "report" => self.report = value.trim().into(),
            "run_tag" => self.run_tag = value.trim().to_string(),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let p = |p: &Path| p.display().to_string();
        Some(match key {
            "n_retrieve" => self.n_retrieve.to_string(),
            "context_size" => self.context_size.to_string(),
            "metric" => self.metric.to_string(),
            "g_max" => self.g_max.to_string(),
            "topic_a" => self.topic_a.to_string(),
            "num_topics" => self.num_topics.to_string(),
            "lda_iterations" => self.lda_iterations.to_string(),
            "fold_in_iterations" => self.fold_in_iterations.to_string(),
            "lda_alpha" => show_opt(&self.lda_alpha, "auto"),
            "lda_beta" => self.lda_beta.to_string(),
            "lda_subset" => show_opt(&self.lda_subset, "all"),
            "prompt_template" => self.prompt_template.replace('\n', "\\n"),
            "doc_char_budget" => self.doc_char_budget.to_string(),
            "seed" => self.seed.to_string(),
            "train_top_k" => show_opt(&self.train_top_k, "all"),
            "bm25_k1" => self.bm25_k1.to_string(),
            "bm25_b" => self.bm25_b.to_string(),
            "generator" => match self.generator {
                GeneratorKind::Mock => "mock".into(),
                GeneratorKind::Remote => "remote".into(),
            },
            "endpoint" => self.endpoint.clone(),
            "model_name" => self.model_name.clone(),
            "timeout_secs" => self.timeout_secs.to_string(),
            "max_retries" => self.max_retries.to_string(),
            "max_in_flight" => self.max_in_flight.to_string(),
            "num_trees" => self.num_trees.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "max_leaves" => self.max_leaves.to_string(),
            "min_rows_per_leaf" => self.min_rows_per_leaf.to_string(),
            "sigma" => self.sigma.to_string(),
            "sigma_outer" => self.sigma_outer.to_string(),
            "ndcg_cutoff" => self.ndcg_cutoff.to_string(),
            "early_stop_rounds" => self.early_stop_rounds.to_string(),
            "validation_fraction" => self.validation_fraction.to_string(),
            "linear_learning_rate" => self.linear_learning_rate.to_string(),
            "linear_epochs" => self.linear_epochs.to_string(),
            "corpus" => p(&self.corpus),
            "dataset" => p(&self.dataset),
            "test_dataset" => p(&self.test_dataset),
            "index" => p(&self.index),
            "topic_model" => p(&self.topic_model),
            "features" => p(&self.features),
            "utilities" => p(&self.utilities),
            "model" => p(&self.model),
            "linear_model" => p(&self.linear_model),
            "run" => p(&self.run),
            "predictions" => p(&self.predictions),
            "report" => p(&self.report),
            "run_tag" => self.run_tag.clone(),
            _ => return None,
        })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).unwrap_or_default());
        }
        s
    }

    /// Rewrites every relative path as relative to `dir`.
    pub fn rooted_at(mut self, dir: &Path) -> Self {
        for p in [
            &mut self.corpus,
            &mut self.dataset,
            &mut self.test_dataset,
            &mut self.index,
            &mut self.topic_model,
            &mut self.features,
            &mut self.utilities,
            &mut self.model,
            &mut self.linear_model,
            &mut self.run,
            &mut self.predictions,
            &mut self.report,
        ] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_retrieve == 0 {
            return bad("n_retrieve must be at least 1".into());
        }
        if self.context_size > self.n_retrieve {
            return bad(format!(
                "context_size ({}) must not exceed n_retrieve ({})",
                self.context_size, self.n_retrieve
            ));
        }
        if self.num_topics < 2 {
            return bad("num_topics must be at least 2".into());
        }
        if self.topic_a == 0 || self.topic_a > self.num_topics {
            return bad(format!(
                "topic_a ({}) must be in 1..={}",
                self.topic_a, self.num_topics
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must be in [0, 1)".into());
        }
        PromptTemplate::new(self.prompt_template.clone(), self.doc_char_budget)?;
        Ok(())
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn lda(&self) -> LdaConfig {
        LdaConfig {
            num_topics: self.num_topics,
            iterations: self.lda_iterations,
            alpha: self.lda_alpha,
            beta: self.lda_beta,
            seed: self.seed,
            subset: self.lda_subset,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            topic_a: self.topic_a,
            fold_in_iterations: self.fold_in_iterations,
        }
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        PromptTemplate::new(self.prompt_template.clone(), self.doc_char_budget)
    }

    pub fn label_config(&self) -> Result<LabelConfig> {
        Ok(LabelConfig {
            n_retrieve: self.n_retrieve,
            metric: self.metric,
            g_max: self.g_max,
            template: self.template()?,
            max_in_flight: self.max_in_flight,
        })
    }

    pub fn lambdamart(&self) -> LambdaMartConfig {
        LambdaMartConfig {
            num_trees: self.num_trees,
            learning_rate: self.learning_rate,
            max_leaves: self.max_leaves,
            min_rows_per_leaf: self.min_rows_per_leaf,
            sigma: self.sigma,
            sigma_outer: self.sigma_outer,
            ndcg_cutoff: self.ndcg_cutoff,
            seed: self.seed,
            early_stop_rounds: self.early_stop_rounds,
        }
    }

    pub fn linear(&self) -> LinearConfig {
        LinearConfig {
            learning_rate: self.linear_learning_rate,
            epochs: self.linear_epochs,
            seed: self.seed,
            early_stop_rounds: self.early_stop_rounds,
            ndcg_cutoff: self.ndcg_cutoff,
        }
    }

    pub fn generator_client(&self) -> Result<GeneratorClient> {
        Ok(match self.generator {
            GeneratorKind::Mock => GeneratorClient::Mock(MockGenerator::new()),
            GeneratorKind::Remote => GeneratorClient::Remote(
                RemoteGenerator::new(
                    self.endpoint.clone(),
                    self.model_name.clone(),
                    Duration::from_secs(self.timeout_secs),
                    self.max_retries,
                )?
                .with_seed(Some(self.seed)),
            ),
        })
    }
}
