//! Train LambdaMART on a toy dataset where only the BM25 feature (f12)
//! decides the grade, then inspect held-out NDCG and feature importance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use utilrank::features::{FeatureVector, FEATURE_NAMES, NUM_FEATURES};
use utilrank::reranker::metrics::ndcg_of_scores;
use utilrank::reranker::{
    feature_importance, train_lambdamart, LambdaMartConfig, QueryGroup, RankedRow, RankingDataset,
};

fn dataset(queries: usize, rng: &mut ChaCha8Rng) -> RankingDataset {
    let groups = (0..queries)
        .map(|q| {
            let rows = (0..10)
                .map(|d| {
                    let mut x = [0.0; NUM_FEATURES];
                    x.iter_mut().for_each(|v| *v = rng.random::<f64>());
                    let grade = (x[11] * 5.0).floor().min(4.0) as u32;
                    RankedRow {
                        doc_id: format!("d{d}"),
                        features: FeatureVector(x),
                        grade,
                        utility: f64::from(grade) / 4.0,
                    }
                })
                .collect();
            QueryGroup {
                query_id: format!("q{q}"),
                rows,
            }
        })
        .collect();
    RankingDataset::new(groups, 4).expect("grades are in range")
}

fn main() -> utilrank::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let train = dataset(200, &mut rng);
    let test = dataset(50, &mut rng);

    let config = LambdaMartConfig {
        num_trees: 100,
        early_stop_rounds: 0,
        ..LambdaMartConfig::default()
    };
    let (model, report) = train_lambdamart(&train, &config, None)?;
    println!(
        "{} trees, train NDCG@5 {:.4} -> {:.4}",
        model.trees.len(),
        report.train_ndcg.first().copied().unwrap_or(0.0),
        report.train_ndcg.last().copied().unwrap_or(0.0)
    );

    let held_out: f64 = test
        .groups
        .iter()
        .map(|g| {
            let s: Vec<f64> = g.rows.iter().map(|r| model.score(&r.features)).collect();
            ndcg_of_scores(&g.grades(), &s, 5)
        })
        .sum::<f64>()
        / test.groups.len() as f64;
    println!("held-out NDCG@5 {held_out:.4}");

    for (f, share) in feature_importance(&model).into_iter().take(3) {
        println!("f{f:<2} {:<22} {share:.4}", FEATURE_NAMES[f - 1]);
    }
    Ok(())
}
