//! LambdaMART: boosted regression trees fitted to LambdaRank gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::RankingDataset;
use super::lambda::{lambda_pairs, LambdaParams};
use super::metrics::ndcg_of_scores;
use super::tree::{fit_tree, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMartConfig {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_rows_per_leaf: usize,
    pub sigma: f64,
    pub sigma_outer: bool,
    pub ndcg_cutoff: usize,
    pub seed: u64,
    /// Stop after this many rounds without validation improvement.
    pub early_stop_rounds: usize,
}

impl Default for LambdaMartConfig {
    fn default() -> Self {
        LambdaMartConfig {
            num_trees: 300,
            learning_rate: 0.1,
            max_leaves: 31,
            min_rows_per_leaf: 1,
            sigma: 1.0,
            sigma_outer: true,
            ndcg_cutoff: 5,
            seed: 42,
            early_stop_rounds: 30,
        }
    }
}

impl LambdaMartConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.num_trees == 0 {
            return bad("num_trees must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.min_rows_per_leaf == 0 {
            return bad("min_rows_per_leaf must be positive");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if self.ndcg_cutoff == 0 {
            return bad("ndcg_cutoff must be positive");
        }
        Ok(())
    }

    fn lambda_params(&self) -> LambdaParams {
        LambdaParams {
            sigma: self.sigma,
            cutoff: self.ndcg_cutoff,
            sigma_outer: self.sigma_outer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub sigma: f64,
    /// Summed split gain per feature (0-based).
    pub feature_gain: [f64; NUM_FEATURES],
    pub g_max: u32,
    pub config: LambdaMartConfig,
}

impl TreeEnsemble {
    pub fn empty(config: LambdaMartConfig, g_max: u32) -> Self {
        TreeEnsemble {
            trees: Vec::new(),
            learning_rate: config.learning_rate,
            sigma: config.sigma,
            feature_gain: [0.0; NUM_FEATURES],
            g_max,
            config,
        }
    }

    pub fn score(&self, x: &FeatureVector) -> f64 {
        self.trees
            .iter()
            .map(|t| self.learning_rate * t.predict(x.values()))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean training NDCG@cutoff after each round.
    pub train_ndcg: Vec<f64>,
    pub valid_ndcg: Vec<f64>,
    pub best_round: usize,
    pub warnings: Vec<String>,
}

fn mean_ndcg(data: &RankingDataset, scores: &[Vec<f64>], cutoff: usize) -> f64 {
    if data.groups.is_empty() {
        return 0.0;
    }
    let total: f64 = data
        .groups
        .iter()
        .zip(scores)
        .map(|(g, s)| ndcg_of_scores(&g.grades(), s, cutoff))
        .sum();
    total / data.groups.len() as f64
}

fn initial_scores(data: &RankingDataset) -> Vec<Vec<f64>> {
    data.groups.iter().map(|g| vec![0.0; g.rows.len()]).collect()
}

fn add_tree(data: &RankingDataset, scores: &mut [Vec<f64>], tree: &RegressionTree, eta: f64) {
    for (g, s) in data.groups.iter().zip(scores.iter_mut()) {
        for (r, v) in g.rows.iter().zip(s.iter_mut()) {
            *v += eta * tree.predict(r.features.values());
        }
    }
}

pub fn train_lambdamart(
    data: &RankingDataset,
    config: &LambdaMartConfig,
    validation: Option<&RankingDataset>,
) -> Result<(TreeEnsemble, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    let mut report = TrainReport {
        train_ndcg: Vec::new(),
        valid_ndcg: Vec::new(),
        best_round: 0,
        warnings: Vec::new(),
    };
    if !data.groups.iter().any(|g| g.has_preference()) {
        let msg = "all grades are equal within every query; returning the zero ensemble";
        log::warn!("{msg}");
        report.warnings.push(msg.to_string());
        return Ok((TreeEnsemble::empty(config.clone(), data.g_max), report));
    }

    let params = config.lambda_params();
    let tree_params = TreeParams {
        max_leaves: config.max_leaves,
        min_rows_per_leaf: config.min_rows_per_leaf,
    };
    let x: Vec<[f64; NUM_FEATURES]> = data
        .groups
        .iter()
        .flat_map(|g| g.rows.iter().map(|r| *r.features.values()))
        .collect();
    let grades: Vec<Vec<u32>> = data.groups.iter().map(|g| g.grades()).collect();

    let mut scores = initial_scores(data);
    let mut valid_scores = validation.map(initial_scores);
    let mut trees: Vec<RegressionTree> = Vec::with_capacity(config.num_trees);
    let mut best = f64::NEG_INFINITY;

    for round in 0..config.num_trees {
        let per_group: Vec<(Vec<f64>, Vec<f64>)> = grades
            .par_iter()
            .zip(scores.par_iter())
            .map(|(g, s)| lambda_pairs(g, s, &params))
            .collect();
        let (lambdas, hessians): (Vec<f64>, Vec<f64>) = per_group
            .into_iter()
            .flat_map(|(l, h)| l.into_iter().zip(h))
            .unzip();

        let tree = fit_tree(&x, &lambdas, &hessians, &tree_params);
        add_tree(data, &mut scores, &tree, config.learning_rate);
        report
            .train_ndcg
            .push(mean_ndcg(data, &scores, config.ndcg_cutoff));

        if let (Some(v), Some(vs)) = (validation, valid_scores.as_mut()) {
            add_tree(v, vs, &tree, config.learning_rate);
            let score = mean_ndcg(v, vs, config.ndcg_cutoff);
            report.valid_ndcg.push(score);
            if score > best {
                best = score;
                report.best_round = round + 1;
            }
        }
        trees.push(tree);
        if validation.is_some()
            && config.early_stop_rounds > 0
            && round + 1 - report.best_round >= config.early_stop_rounds
        {
            log::info!(
                "early stop at round {}; best validation NDCG@{} = {best:.4} at round {}",
                round + 1,
                config.ndcg_cutoff,
                report.best_round
            );
            break;
        }
    }
    if validation.is_some() {
        trees.truncate(report.best_round);
    } else {
        report.best_round = trees.len();
    }

    let mut feature_gain = [0.0; NUM_FEATURES];
    for t in &trees {
        t.accumulate_gain(&mut feature_gain);
    }
    Ok((
        TreeEnsemble {
            trees,
            learning_rate: config.learning_rate,
            sigma: config.sigma,
            feature_gain,
            g_max: data.g_max,
            config: config.clone(),
        },
        report,
    ))
}

/// Gain share per feature (1-based ids), largest first.
pub fn feature_importance(model: &TreeEnsemble) -> Vec<(usize, f64)> {
    let total: f64 = model.feature_gain.iter().sum();
    let mut out: Vec<(usize, f64)> = if total > 0.0 {
        model
            .feature_gain
            .iter()
            .enumerate()
            .map(|(i, g)| (i + 1, g / total))
            .collect()
    } else {
        log::warn!("model has no splits; reporting uniform feature importance");
        (1..=NUM_FEATURES)
            .map(|i| (i, 1.0 / NUM_FEATURES as f64))
            .collect()
    };
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reranker::dataset::{QueryGroup, RankedRow};

    fn fv(f: &[(usize, f64)]) -> FeatureVector {
        let mut v = [0.0; NUM_FEATURES];
        for &(i, x) in f {
            v[i - 1] = x;
        }
        FeatureVector(v)
    }

    fn group(qid: &str, rows: &[(f64, u32)]) -> QueryGroup {
        QueryGroup {
            query_id: qid.into(),
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, &(x, g))| RankedRow {
                    doc_id: format!("{qid}-{i}"),
                    features: fv(&[(12, x), (1, (i * 3 % 4) as f64)]),
                    grade: g,
                    utility: f64::from(g) / 4.0,
                })
                .collect(),
        }
    }

    #[test]
    fn equal_grades_give_zero_ensemble() {
        let data = RankingDataset::new(vec![group("a", &[(1.0, 2), (2.0, 2)])], 4).unwrap();
        let (m, report) = train_lambdamart(&data, &LambdaMartConfig::default(), None).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(m.score(&fv(&[(12, 5.0)])), 0.0);
        let imp = feature_importance(&m);
        assert!(imp.iter().all(|&(_, s)| (s - 1.0 / 14.0).abs() < 1e-15));
    }

    #[test]
    fn learns_single_feature_and_is_deterministic() {
        let groups: Vec<_> = (0..20)
            .map(|q| {
                let rows: Vec<(f64, u32)> = (0..6)
                    .map(|i| {
                        let x = ((q * 7 + i * 5) % 11) as f64;
                        (x, (x / 3.0) as u32)
                    })
                    .collect();
                group(&format!("q{q}"), &rows)
            })
            .collect();
        let data = RankingDataset::new(groups, 4).unwrap();
        let cfg = LambdaMartConfig {
            num_trees: 20,
            ..LambdaMartConfig::default()
        };
        let (m1, r1) = train_lambdamart(&data, &cfg, None).unwrap();
        let (m2, _) = train_lambdamart(&data, &cfg, None).unwrap();
        assert_eq!(m1, m2);
        assert!(*r1.train_ndcg.last().unwrap() > 0.99);
        assert!(m1.trees.iter().all(|t| t.is_well_formed()));
        let imp = feature_importance(&m1);
        assert_eq!(imp[0].0, 12);
        assert!((imp.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_data_is_an_error() {
        let data = RankingDataset::new(vec![], 4).unwrap();
        assert!(train_lambdamart(&data, &LambdaMartConfig::default(), None).is_err());
    }

    #[test]
    fn bad_config() {
        let data = RankingDataset::new(vec![group("a", &[(1.0, 2), (2.0, 1)])], 4).unwrap();
        let cfg = LambdaMartConfig {
            sigma: 0.0,
            ..LambdaMartConfig::default()
        };
        assert!(train_lambdamart(&data, &cfg, None).is_err());
    }

    #[test]
    fn scoring_sums_scaled_trees() {
        let mut m = TreeEnsemble::empty(LambdaMartConfig::default(), 4);
        assert_eq!(m.score(&fv(&[])), 0.0);
        m.trees.push(RegressionTree::leaf(2.0));
        assert!((m.score(&fv(&[(3, 9.0)])) - 0.2).abs() < 1e-15);
    }
}
