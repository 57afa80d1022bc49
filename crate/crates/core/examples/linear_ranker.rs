//! Train the pairwise linear ranker on utility labels and compare its loss
//! before and after training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use utilrank::features::{FeatureVector, NUM_FEATURES};
use utilrank::reranker::{
    train_linear_ranker, LinearConfig, PairwiseObjective, QueryGroup, RankedRow, RankingDataset,
};

fn main() -> utilrank::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // utility grows with f6 and falls with f13
    let groups = (0..100)
        .map(|q| QueryGroup {
            query_id: format!("q{q}"),
            rows: (0..8)
                .map(|d| {
                    let mut x = [0.0; NUM_FEATURES];
                    x.iter_mut().for_each(|v| *v = rng.random::<f64>());
                    let u = (0.7 * x[5] - 0.3 * x[12] + 0.3).clamp(0.0, 1.0);
                    RankedRow {
                        doc_id: format!("d{d}"),
                        features: FeatureVector(x),
                        grade: (u * 4.0).round() as u32,
                        utility: u,
                    }
                })
                .collect(),
        })
        .collect();
    let data = RankingDataset::new(groups, 4)?;

    let model = train_linear_ranker(&data, &LinearConfig::default(), None)?;
    let objective = PairwiseObjective::new(&data, &model.standardization);
    println!("{} preference pairs", objective.num_pairs());
    println!("loss at w=0:      {:.4}", objective.loss(&[0.0; NUM_FEATURES]));
    println!("loss after train: {:.4}", objective.loss(&model.weights));
    println!("w6 = {:+.3}, w13 = {:+.3}", model.weights[5], model.weights[12]);
    Ok(())
}
