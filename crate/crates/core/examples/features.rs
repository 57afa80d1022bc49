//! Extract the 14 ranking features for retrieved candidates and print them as
//! ranking-file lines.

use utilrank::corpus::{Index, Query};
use utilrank::features::{format_row, FeatureConfig, FeatureExtractor, FeatureRow, FEATURE_NAMES};
use utilrank::pipeline::{make_synthetic, SyntheticConfig};
use utilrank::topics::{train_lda, LdaConfig};

fn main() -> utilrank::Result<()> {
    let data = make_synthetic(&SyntheticConfig {
        train_queries: 20,
        test_queries: 0,
        ..SyntheticConfig::default()
    })?;
    let index = Index::build(data.corpus.clone())?;
    let lda = train_lda(
        &data.corpus,
        &LdaConfig {
            num_topics: 10,
            iterations: 50,
            ..LdaConfig::default()
        },
    )?;
    let extractor = FeatureExtractor::new(
        &index,
        &lda,
        FeatureConfig {
            topic_a: 3,
            fold_in_iterations: 20,
        },
    )?;

    let q: &Query = &data.train[0];
    println!("{}: {}", q.query_id, q.text);
    let ids: Vec<String> = index.retrieve(q, 10).into_iter().map(|(id, _)| id).collect();
    let rows = extractor.batch_extract(q, &ids)?;

    let (_, first) = &rows[0];
    for (name, v) in FEATURE_NAMES.iter().zip(first.values()) {
        println!("  {name:<22} {v:.4}");
    }
    for (doc_id, features) in rows {
        let row = FeatureRow {
            label: 0,
            query_id: q.query_id.clone(),
            doc_id,
            features,
        };
        println!("{}", format_row(&row));
    }
    Ok(())
}
