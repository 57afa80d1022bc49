#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use utilrank::features::{FeatureVector, NUM_FEATURES};
use utilrank::reranker::{QueryGroup, RankedRow, RankingDataset};

/// Grade is `floor(5 * f12)` capped at 4; every other feature is noise.
pub fn monotone_f12_dataset(queries: usize, docs: usize, seed: u64) -> RankingDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = (0..queries)
        .map(|q| QueryGroup {
            query_id: format!("q{q}"),
            rows: (0..docs)
                .map(|d| {
                    let mut x = [0.0; NUM_FEATURES];
                    x.iter_mut().for_each(|v| *v = rng.random::<f64>() * 10.0);
                    x[11] = rng.random::<f64>();
                    let grade = ((x[11] * 5.0).floor() as u32).min(4);
                    RankedRow {
                        doc_id: format!("q{q}d{d}"),
                        features: FeatureVector(x),
                        grade,
                        utility: f64::from(grade) / 4.0,
                    }
                })
                .collect(),
        })
        .collect();
    RankingDataset::new(groups, 4).unwrap()
}

/// NDCG@k from scratch: sort a copy, sum gains with log discounts.
pub fn oracle_ndcg(grades: &[u32], order: &[usize], k: usize) -> f64 {
    let dcg = |gs: &mut dyn Iterator<Item = u32>| -> f64 {
        gs.take(k)
            .enumerate()
            .map(|(i, g)| ((1u64 << g) as f64 - 1.0) / ((i as f64) + 2.0).log2())
            .sum()
    };
    let mut ideal: Vec<u32> = grades.to_vec();
    ideal.sort_by(|a, b| b.cmp(a));
    let best = dcg(&mut ideal.into_iter());
    if best == 0.0 {
        return 1.0;
    }
    dcg(&mut order.iter().map(|&r| grades[r])) / best
}

/// Row order by descending score, ties by row index.
pub fn oracle_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// |NDCG after swapping the positions of rows i and j - NDCG before|.
pub fn brute_delta(grades: &[u32], scores: &[f64], i: usize, j: usize, k: usize) -> f64 {
    let order = oracle_order(scores);
    let mut swapped = order.clone();
    let pi = order.iter().position(|&r| r == i).unwrap();
    let pj = order.iter().position(|&r| r == j).unwrap();
    swapped.swap(pi, pj);
    (oracle_ndcg(grades, &swapped, k) - oracle_ndcg(grades, &order, k)).abs()
}

pub fn random_group(rng: &mut ChaCha8Rng, max_docs: usize) -> (Vec<u32>, Vec<f64>) {
    let n = rng.random_range(1..=max_docs);
    let grades = (0..n).map(|_| rng.random_range(0..=4)).collect();
    // coarse scores so ties happen
    let scores = (0..n).map(|_| f64::from(rng.random_range(0..6u8)) * 0.5).collect();
    (grades, scores)
}
