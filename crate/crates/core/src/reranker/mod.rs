//! Learning to rank: NDCG machinery, LambdaRank gradients, LambdaMART and a
//! pairwise-trained linear scorer.

pub mod dataset;
pub mod lambda;
pub mod lambdamart;
pub mod linear;
pub mod metrics;
pub mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dataset::{QueryGroup, RankedRow, RankingDataset};
pub use lambda::{lambda_pairs, pair_lambda, LambdaParams};
pub use lambdamart::{feature_importance, train_lambdamart, LambdaMartConfig, TrainReport, TreeEnsemble};
pub use linear::{train_linear_ranker, LinearConfig, LinearRanker, PairwiseObjective, Standardization};
pub use metrics::{dcg, delta_ndcg, ndcg};
pub use tree::RegressionTree;

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const MODEL_FORMAT: &str = "utilrank-model";
pub const MODEL_VERSION: u32 = 1;

/// Anything that maps a feature vector to a ranking score.
pub trait Scorer: Sync {
    fn score(&self, x: &FeatureVector) -> f64;
}

impl Scorer for TreeEnsemble {
    fn score(&self, x: &FeatureVector) -> f64 {
        TreeEnsemble::score(self, x)
    }
}

impl Scorer for LinearRanker {
    fn score(&self, x: &FeatureVector) -> f64 {
        LinearRanker::score(self, x)
    }
}

/// Scores every candidate the same, so ranking falls back to the tie rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, _: &FeatureVector) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RankerModel {
    LambdaMart(TreeEnsemble),
    Linear(LinearRanker),
}

impl Scorer for RankerModel {
    fn score(&self, x: &FeatureVector) -> f64 {
        match self {
            RankerModel::LambdaMart(m) => m.score(x),
            RankerModel::Linear(m) => m.score(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: RankerModel,
}

impl RankerModel {
    pub fn kind(&self) -> &'static str {
        match self {
            RankerModel::LambdaMart(_) => "lambdamart",
            RankerModel::Linear(_) => "linear",
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer_pretty(&mut w, &file)?;
        writeln!(w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<RankerModel> {
        let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let file: ModelFile = serde_json::from_reader(r)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Format {
                path: path.display().to_string(),
                message: format!(
                    "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                    file.format, file.version
                ),
            });
        }
        Ok(file.model)
    }
}

/// Scores candidates and sorts them best first; equal scores by ascending doc_id.
pub fn rerank(model: &dyn Scorer, candidates: &[(String, FeatureVector)]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = candidates
        .iter()
        .map(|(id, x)| (id.clone(), model.score(x)))
        .collect();
    crate::corpus::sort_ranked(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::NUM_FEATURES;

    fn cand(id: &str, v: f64) -> (String, FeatureVector) {
        (id.to_string(), FeatureVector([v; NUM_FEATURES]))
    }

    #[test]
    fn rerank_edge_cases() {
        assert!(rerank(&ConstantScorer(0.0), &[]).is_empty());
        let one = rerank(&ConstantScorer(1.0), &[cand("x", 1.0)]);
        assert_eq!(one, vec![("x".to_string(), 1.0)]);
        let out = rerank(&ConstantScorer(0.0), &[cand("c", 1.0), cand("a", 2.0), cand("b", 3.0)]);
        let ids: Vec<_> = out.iter().map(|p| p.0.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn model_round_trip() {
        let m = RankerModel::Linear(LinearRanker {
            weights: [0.5; NUM_FEATURES],
            bias: -1.0,
            standardization: Standardization::identity(),
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(RankerModel::load(&p).unwrap(), m);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"format\": \"utilrank-model\""));
        assert!(text.contains("\"kind\": \"linear\""));
    }
}
