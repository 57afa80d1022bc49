//! Linear scorer trained with a rank-weighted pairwise logistic loss.
//!
//! For every pair in a query where `U(d_i) > U(d_j)` the loss adds
//! `(1/r_i - 1/r_j) * ln(1 + exp(s_j - s_i))`, where `r` is the 1-based rank
//! under utility (ties resolved by retrieval order). Scores are affine in the
//! standardized feature vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::RankingDataset;
use super::metrics::ndcg_of_scores;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, NUM_FEATURES};

type Vector = [f64; NUM_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vector,
    pub std: Vector,
}

impl Standardization {
    /// Per-column mean and population standard deviation; constant columns get
    /// a unit divisor.
    pub fn fit(rows: &[Vector]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; NUM_FEATURES];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; NUM_FEATURES];
        for r in rows {
            for k in 0..NUM_FEATURES {
                std[k] += (r[k] - mean[k]).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Standardization { mean, std }
    }

    pub fn identity() -> Self {
        Standardization {
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let mut z = [0.0; NUM_FEATURES];
        for k in 0..NUM_FEATURES {
            z[k] = (x[k] - self.mean[k]) / self.std[k];
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRanker {
    pub weights: Vector,
    pub bias: f64,
    pub standardization: Standardization,
}

impl LinearRanker {
    pub fn score(&self, x: &FeatureVector) -> f64 {
        let z = self.standardization.apply(x.values());
        self.bias + dot(&self.weights, &z)
    }
}

fn dot(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    hi: usize,
    lo: usize,
    weight: f64,
}

/// The pairwise objective over a dataset, with precomputed pairs and
/// standardized features.
#[derive(Debug, Clone)]
pub struct PairwiseObjective {
    z: Vec<Vector>,
    pairs: Vec<Pair>,
    num_groups: usize,
}

impl PairwiseObjective {
    pub fn new(data: &RankingDataset, standardization: &Standardization) -> Self {
        let mut z = Vec::with_capacity(data.num_rows());
        let mut pairs = Vec::new();
        for g in &data.groups {
            let base = z.len();
            z.extend(g.rows.iter().map(|r| standardization.apply(r.features.values())));
            // utility rank; ties keep retrieval order
            let mut order: Vec<usize> = (0..g.rows.len()).collect();
            order.sort_by(|&a, &b| {
                g.rows[b]
                    .utility
                    .total_cmp(&g.rows[a].utility)
                    .then(a.cmp(&b))
            });
            let mut rank = vec![0usize; g.rows.len()];
            for (pos, &row) in order.iter().enumerate() {
                rank[row] = pos + 1;
            }
            for i in 0..g.rows.len() {
                for j in 0..g.rows.len() {
                    if g.rows[i].utility > g.rows[j].utility {
                        pairs.push(Pair {
                            hi: base + i,
                            lo: base + j,
                            weight: 1.0 / rank[i] as f64 - 1.0 / rank[j] as f64,
                        });
                    }
                }
            }
        }
        PairwiseObjective {
            z,
            pairs,
            num_groups: data.groups.len(),
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Summed loss over all queries.
    pub fn loss(&self, weights: &Vector) -> f64 {
        let s: Vec<f64> = self.z.iter().map(|z| dot(weights, z)).collect();
        self.pairs
            .iter()
            .map(|p| p.weight * softplus(s[p.lo] - s[p.hi]))
            .sum()
    }

    /// Analytic gradient of [`loss`](Self::loss).
    pub fn gradient(&self, weights: &Vector) -> Vector {
        let s: Vec<f64> = self.z.iter().map(|z| dot(weights, z)).collect();
        let mut g = [0.0; NUM_FEATURES];
        for p in &self.pairs {
            let c = p.weight * sigmoid(s[p.lo] - s[p.hi]);
            for k in 0..NUM_FEATURES {
                g[k] += c * (self.z[p.lo][k] - self.z[p.hi][k]);
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub early_stop_rounds: usize,
    pub ndcg_cutoff: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            learning_rate: 0.5,
            epochs: 300,
            seed: 42,
            early_stop_rounds: 30,
            ndcg_cutoff: 5,
        }
    }
}

fn mean_ndcg(model: &LinearRanker, data: &RankingDataset, cutoff: usize) -> f64 {
    if data.groups.is_empty() {
        return 0.0;
    }
    let total: f64 = data
        .groups
        .iter()
        .map(|g| {
            let scores: Vec<f64> = g.rows.iter().map(|r| model.score(&r.features)).collect();
            ndcg_of_scores(&g.grades(), &scores, cutoff)
        })
        .sum();
    total / data.groups.len() as f64
}

/// Full-batch gradient descent. Steps use the gradient averaged over queries
/// so the learning rate does not depend on dataset size.
pub fn train_linear_ranker(
    data: &RankingDataset,
    config: &LinearConfig,
    validation: Option<&RankingDataset>,
) -> Result<LinearRanker> {
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning_rate must be positive".into()));
    }
    let rows: Vec<Vector> = data
        .groups
        .iter()
        .flat_map(|g| g.rows.iter().map(|r| *r.features.values()))
        .collect();
    let standardization = Standardization::fit(&rows);
    let objective = PairwiseObjective::new(data, &standardization);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = [0.0; NUM_FEATURES];
    for w in &mut weights {
        *w = rng.random_range(-0.01..0.01);
    }
    let mut model = LinearRanker {
        weights,
        bias: 0.0,
        standardization,
    };
    if objective.num_pairs() == 0 {
        log::warn!("no preference pairs; linear ranker left at its initialization");
        return Ok(model);
    }

    let scale = config.learning_rate / objective.num_groups as f64;
    let mut best = validation.map(|v| (mean_ndcg(&model, v, config.ndcg_cutoff), model.weights));
    let mut since_best = 0;
    for _ in 0..config.epochs {
        let g = objective.gradient(&model.weights);
        for (w, gk) in model.weights.iter_mut().zip(&g) {
            *w -= scale * gk;
        }
        if let (Some(v), Some((best_score, best_w))) = (validation, best.as_mut()) {
            let score = mean_ndcg(&model, v, config.ndcg_cutoff);
            if score > *best_score {
                *best_score = score;
                *best_w = model.weights;
                since_best = 0;
            } else {
                since_best += 1;
                if config.early_stop_rounds > 0 && since_best >= config.early_stop_rounds {
                    break;
                }
            }
        }
    }
    if let Some((_, w)) = best {
        model.weights = w;
    }
    Ok(model)
}
