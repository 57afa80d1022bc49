//! The whole pipeline in memory on the fact-planted synthetic corpus:
//! label utilities, train both rerankers, and compare four systems.

use utilrank::corpus::Index;
use utilrank::features::FeatureExtractor;
use utilrank::pipeline::{
    build_training_set, compare_systems, make_synthetic, train_reranker, PipelineConfig,
    RankerKind, SyntheticConfig,
};
use utilrank::topics::train_lda;
use utilrank::utility::MockGenerator;

fn main() -> utilrank::Result<()> {
    let config = PipelineConfig {
        num_topics: 20,
        topic_a: 5,
        lda_iterations: 100,
        ..PipelineConfig::default()
    };
    config.validate()?;

    let data = make_synthetic(&SyntheticConfig::default())?;
    let index = Index::build_with(data.corpus.clone(), config.bm25())?;
    let topics = train_lda(&data.corpus, &config.lda())?;
    let extractor = FeatureExtractor::new(&index, &topics, config.feature_config())?;
    let generator = MockGenerator::new();

    let training = build_training_set(&generator, &data.train, &extractor, &config)?;
    println!(
        "{} training queries, {} rows",
        training.data.groups.len(),
        training.data.num_rows()
    );
    let (lambdamart, _) = train_reranker(&training.data, RankerKind::LambdaMart, &config)?;
    let (linear, _) = train_reranker(&training.data, RankerKind::Linear, &config)?;

    let cmp = compare_systems(&generator, &data.test, &extractor, &lambdamart, &linear, &config)?;
    print!("{}", cmp.report.to_table());
    Ok(())
}
