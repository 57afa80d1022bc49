//! End-to-end orchestration: utility-labeled training sets, reranked
//! inference, and evaluation with paired significance tests.

pub mod config;
pub mod stats;
pub mod synthetic;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{GeneratorKind, PipelineConfig};
pub use stats::{paired_t_test, PairedTTest};
pub use synthetic::{make_synthetic, SyntheticConfig, SyntheticData};

use crate::corpus::{Document, Index, Query};
use crate::error::{Error, Result};
use crate::features::{write_feature_file, FeatureExtractor};
use crate::prompt::PromptTemplate;
use crate::reranker::{
    rerank, train_lambdamart, train_linear_ranker, QueryGroup, RankedRow, RankerModel,
    RankingDataset, Scorer,
};
use crate::utility::{
    accuracy, f1_score, label_utilities, run_indexed, write_utility_records, Generator,
    LabelOutcome, UtilityRecord,
};

/// Labels the first-stage candidates of every query with their utility.
pub fn label(
    generator: &dyn Generator,
    queries: &[Query],
    index: &Index,
    config: &PipelineConfig,
) -> Result<LabelOutcome> {
    if queries.is_empty() {
        return Err(Error::Empty("query set".into()));
    }
    let outcome = label_utilities(generator, queries, index, &config.label_config()?)?;
    if !outcome.skipped.is_empty() {
        log::warn!("{} queries skipped during labeling", outcome.skipped.len());
    }
    Ok(outcome)
}

/// Turns utility records into feature groups. Rows keep retrieval order.
/// With `train_top_k = Some(k)` only the k most useful candidates of each
/// query are kept.
pub fn assemble_dataset(
    records: &[UtilityRecord],
    queries: &[Query],
    extractor: &FeatureExtractor,
    config: &PipelineConfig,
) -> Result<RankingDataset> {
    let by_id: HashMap<&str, &Query> = queries.iter().map(|q| (q.query_id.as_str(), q)).collect();
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, Vec<&UtilityRecord>> = HashMap::new();
    for r in records {
        grouped
            .entry(r.query_id.as_str())
            .or_insert_with(|| {
                order.push(r.query_id.as_str());
                Vec::new()
            })
            .push(r);
    }

    let mut groups = Vec::with_capacity(order.len());
    for qid in order {
        let q = by_id.get(qid).ok_or_else(|| {
            Error::InvalidArgument(format!("utility records mention unknown query `{qid}`"))
        })?;
        let mut recs = grouped.remove(qid).unwrap_or_default();
        if let Some(k) = config.train_top_k {
            recs.sort_by(|a, b| b.utility.total_cmp(&a.utility).then(a.rank.cmp(&b.rank)));
            recs.truncate(k);
        }
        recs.sort_by_key(|r| r.rank);
        let ids: Vec<String> = recs.iter().map(|r| r.doc_id.clone()).collect();
        let features = extractor
            .batch_extract(q, &ids)
            .map_err(|e| e.in_query(qid))?;
        let rows = recs
            .iter()
            .zip(features)
            .map(|(r, (doc_id, features))| RankedRow {
                doc_id,
                features,
                grade: r.grade,
                utility: r.utility,
            })
            .collect();
        groups.push(QueryGroup {
            query_id: qid.to_string(),
            rows,
        });
    }
    if groups.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    RankingDataset::new(groups, config.g_max)
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub records: Vec<UtilityRecord>,
    pub data: RankingDataset,
    pub skipped: Vec<(String, String)>,
}

impl TrainingSet {
    /// Writes the utility records and the ranking file to their configured paths.
    pub fn save(&self, config: &PipelineConfig) -> Result<()> {
        write_utility_records(&config.utilities, &self.records)?;
        write_feature_file(&config.features, &self.data.to_feature_rows())
    }
}

/// Retrieve, label, and featurize: the training instances of the reranker.
pub fn build_training_set(
    generator: &dyn Generator,
    queries: &[Query],
    extractor: &FeatureExtractor,
    config: &PipelineConfig,
) -> Result<TrainingSet> {
    let outcome = label(generator, queries, extractor.index(), config)?;
    let data = assemble_dataset(&outcome.records, queries, extractor, config)?;
    Ok(TrainingSet {
        records: outcome.records,
        data,
        skipped: outcome.skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankerKind {
    LambdaMart,
    Linear,
}

impl std::str::FromStr for RankerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambdamart" => Ok(RankerKind::LambdaMart),
            "linear" => Ok(RankerKind::Linear),
            other => Err(Error::InvalidArgument(format!("unknown ranker `{other}`"))),
        }
    }
}

/// Trains a reranker, holding out `validation_fraction` of the queries for
/// early stopping. Returns the model and any training warnings.
pub fn train_reranker(
    data: &RankingDataset,
    kind: RankerKind,
    config: &PipelineConfig,
) -> Result<(RankerModel, Vec<String>)> {
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    let (train, val) = if config.validation_fraction > 0.0 {
        data.split(config.validation_fraction, config.seed)
    } else {
        (data.clone(), RankingDataset::new(Vec::new(), data.g_max)?)
    };
    let val = (!val.is_empty()).then_some(&val);
    match kind {
        RankerKind::LambdaMart => {
            let (model, report) = train_lambdamart(&train, &config.lambdamart(), val)?;
            log::info!(
                "lambdamart: {} trees, best round {}",
                model.trees.len(),
                report.best_round
            );
            Ok((RankerModel::LambdaMart(model), report.warnings))
        }
        RankerKind::Linear => {
            let model = train_linear_ranker(&train, &config.linear(), val)?;
            Ok((RankerModel::Linear(model), Vec::new()))
        }
    }
}

/// Prompt for `q` with `docs` in rank order.
pub fn build_prompt(q: &Query, docs: &[&Document], template: &PromptTemplate) -> String {
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    template.render(&q.text, &texts)
}

/// How the context documents are chosen.
#[derive(Clone, Copy)]
pub enum Ranking<'a> {
    /// No context at all.
    Empty,
    /// The first k documents in BM25 order.
    FirstStage,
    /// BM25 candidates reordered by a learned scorer.
    Model {
        scorer: &'a dyn Scorer,
        features: &'a FeatureExtractor<'a>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub query_id: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceEntry {
    pub prediction: Prediction,
    /// All N candidates in final order with the score that ordered them.
    pub ranked: Vec<(String, f64)>,
    /// The documents placed in the prompt.
    pub context: Vec<String>,
}

/// Retrieve N, optionally rerank, keep the top k, prompt, and generate.
/// A generator failure becomes an error entry for that query only.
pub fn run_inference(
    generator: &dyn Generator,
    queries: &[Query],
    index: &Index,
    ranking: Ranking,
    config: &PipelineConfig,
) -> Result<Vec<InferenceEntry>> {
    if queries.is_empty() {
        return Err(Error::Empty("query set".into()));
    }
    let template = config.template()?;
    let results = run_indexed(queries.len(), config.max_in_flight, |i| {
        let q = &queries[i];
        let ranked = match ranking {
            Ranking::Empty => Vec::new(),
            Ranking::FirstStage => index.retrieve(q, config.n_retrieve),
            Ranking::Model { scorer, features } => {
                let ids: Vec<String> = index
                    .retrieve(q, config.n_retrieve)
                    .into_iter()
                    .map(|(id, _)| id)
                    .collect();
                let cands = features.batch_extract(q, &ids).map_err(|e| e.in_query(&q.query_id))?;
                rerank(scorer, &cands)
            }
        };
        let context: Vec<String> = ranked
            .iter()
            .take(config.context_size)
            .map(|(id, _)| id.clone())
            .collect();
        let docs: Vec<&Document> = context
            .iter()
            .map(|id| index.doc(id).expect("retrieved ids are indexed"))
            .collect();
        let prompt = build_prompt(q, &docs, &template);
        let prediction = match generator.generate(&prompt) {
            Ok(answer) => Prediction {
                query_id: q.query_id.clone(),
                answer,
                error: None,
            },
            Err(e) => {
                log::warn!("query {}: {e}", q.query_id);
                Prediction {
                    query_id: q.query_id.clone(),
                    answer: String::new(),
                    error: Some(e.to_string()),
                }
            }
        };
        Ok(InferenceEntry {
            prediction,
            ranked,
            context,
        })
    });
    results.into_iter().collect()
}

pub fn write_predictions(path: &Path, entries: &[InferenceEntry]) -> Result<()> {
    crate::corpus::write_jsonl(path, entries.iter().map(|e| &e.prediction))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    crate::corpus::read_jsonl(path)
}

/// TREC run lines, `query_id Q0 doc_id rank score tag`, per query in rank order.
pub fn format_trec_run(entries: &[InferenceEntry], tag: &str) -> String {
    let mut s = String::new();
    for e in entries {
        for (r, (doc, score)) in e.ranked.iter().enumerate() {
            let _ = writeln!(s, "{} Q0 {doc} {} {score} {tag}", e.prediction.query_id, r + 1);
        }
    }
    s
}

pub fn write_trec_run(path: &Path, entries: &[InferenceEntry], tag: &str) -> Result<()> {
    std::fs::write(path, format_trec_run(entries, tag)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemScores {
    pub system: String,
    pub accuracy: f64,
    pub f1: f64,
    pub per_query_accuracy: Vec<f64>,
    pub per_query_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Significance {
    pub system_a: String,
    pub system_b: String,
    pub metric: String,
    #[serde(flatten)]
    pub test: PairedTTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Query order shared by every per-query vector.
    pub query_ids: Vec<String>,
    pub systems: Vec<SystemScores>,
    pub significance: Vec<Significance>,
}

impl EvalReport {
    pub fn system(&self, name: &str) -> Option<&SystemScores> {
        self.systems.iter().find(|s| s.system == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(self.to_json()?.as_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    /// Plain-text table of the scores followed by the significance tests.
    pub fn to_table(&self) -> String {
        let name_w = self
            .systems
            .iter()
            .map(|s| s.system.len())
            .chain(["system".len()])
            .max()
            .unwrap_or(6);
        let mut s = format!("{:<name_w$}  {:>8}  {:>8}\n", "system", "accuracy", "f1");
        for sys in &self.systems {
            let _ = writeln!(s, "{:<name_w$}  {:>8.4}  {:>8.4}", sys.system, sys.accuracy, sys.f1);
        }
        if !self.significance.is_empty() {
            let pair_w = self
                .significance
                .iter()
                .map(|t| t.system_a.len() + t.system_b.len() + 4)
                .max()
                .unwrap_or(0);
            let _ = writeln!(
                s,
                "\n{:<pair_w$}  {:<8}  {:>9}  {:>8}  sig",
                "pair", "metric", "t", "p"
            );
            for t in &self.significance {
                let pair = format!("{} vs {}", t.system_a, t.system_b);
                let _ = writeln!(
                    s,
                    "{:<pair_w$}  {:<8}  {:>9.3}  {:>8.4}  {}",
                    pair,
                    t.metric,
                    t.test.t_statistic,
                    t.test.p_value,
                    if t.test.significant_at_5pct { "*" } else { "" }
                );
            }
        }
        s
    }
}

/// Scores each system's predictions against the gold answers and runs a
/// paired t-test per metric for every pair of systems.
pub fn evaluate(systems: &[(&str, &[Prediction])], golds: &[Query]) -> Result<EvalReport> {
    if golds.is_empty() {
        return Err(Error::Empty("gold query set".into()));
    }
    if systems.is_empty() {
        return Err(Error::Empty("system list".into()));
    }
    let gold_ids: BTreeSet<&str> = golds.iter().map(|q| q.query_id.as_str()).collect();
    let mut scores = Vec::with_capacity(systems.len());
    for (name, preds) in systems {
        let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
        for p in preds.iter() {
            if by_id.insert(p.query_id.as_str(), p).is_some() {
                return Err(Error::DuplicateQueryId(p.query_id.clone()));
            }
        }
        let pred_ids: BTreeSet<&str> = by_id.keys().copied().collect();
        if pred_ids != gold_ids {
            let diff = pred_ids
                .symmetric_difference(&gold_ids)
                .map(|s| s.to_string())
                .collect::<BTreeSet<_>>();
            return Err(Error::Misaligned(diff.into_iter().collect()));
        }
        let mut acc = Vec::with_capacity(golds.len());
        let mut f1 = Vec::with_capacity(golds.len());
        for q in golds {
            let p = by_id[q.query_id.as_str()];
            acc.push(accuracy(&p.answer, &q.gold_answers).map_err(|e| e.in_query(&q.query_id))?);
            f1.push(f1_score(&p.answer, &q.gold_answers).map_err(|e| e.in_query(&q.query_id))?);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        scores.push(SystemScores {
            system: name.to_string(),
            accuracy: mean(&acc),
            f1: mean(&f1),
            per_query_accuracy: acc,
            per_query_f1: f1,
        });
    }
    let mut seen = HashSet::new();
    if let Some(s) = scores.iter().find(|s| !seen.insert(s.system.as_str())) {
        return Err(Error::InvalidArgument(format!("system `{}` listed twice", s.system)));
    }

    let mut significance = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let (a, b) = (&scores[i], &scores[j]);
            for (metric, x, y) in [
                ("accuracy", &a.per_query_accuracy, &b.per_query_accuracy),
                ("f1", &a.per_query_f1, &b.per_query_f1),
            ] {
                significance.push(Significance {
                    system_a: a.system.clone(),
                    system_b: b.system.clone(),
                    metric: metric.to_string(),
                    test: paired_t_test(x, y),
                });
            }
        }
    }
    Ok(EvalReport {
        query_ids: golds.iter().map(|q| q.query_id.clone()).collect(),
        systems: scores,
        significance,
    })
}

pub const ZERO_SHOT: &str = "zero_shot";
pub const K_SHOT: &str = "k_shot";
pub const LAMBDAMART: &str = "lambdamart";
pub const LINEAR_PAIRWISE: &str = "linear_pairwise";

/// The per-system inference results behind a comparison.
pub struct Comparison {
    pub runs: Vec<(&'static str, Vec<InferenceEntry>)>,
    pub report: EvalReport,
}

/// Runs zero-shot, k-shot, and both learned rerankers over the same queries.
pub fn compare_systems(
    generator: &dyn Generator,
    queries: &[Query],
    extractor: &FeatureExtractor,
    lambdamart: &RankerModel,
    linear: &RankerModel,
    config: &PipelineConfig,
) -> Result<Comparison> {
    let index = extractor.index();
    let systems: [(&'static str, Ranking); 4] = [
        (ZERO_SHOT, Ranking::Empty),
        (K_SHOT, Ranking::FirstStage),
        (
            LAMBDAMART,
            Ranking::Model {
                scorer: lambdamart,
                features: extractor,
            },
        ),
        (
            LINEAR_PAIRWISE,
            Ranking::Model {
                scorer: linear,
                features: extractor,
            },
        ),
    ];
    let mut runs = Vec::with_capacity(systems.len());
    for (name, ranking) in systems {
        log::info!("running {name}");
        runs.push((name, run_inference(generator, queries, index, ranking, config)?));
    }
    let preds: Vec<(&str, Vec<Prediction>)> = runs
        .iter()
        .map(|(n, e)| (*n, e.iter().map(|x| x.prediction.clone()).collect()))
        .collect();
    let refs: Vec<(&str, &[Prediction])> = preds.iter().map(|(n, p)| (*n, p.as_slice())).collect();
    let report = evaluate(&refs, queries)?;
    Ok(Comparison { runs, report })
}
