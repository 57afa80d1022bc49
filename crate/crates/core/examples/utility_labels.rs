//! Label retrieved documents with their downstream utility: the answer
//! score the generator reaches when given that one document.
//!
//! Uses the offline mock generator. Set `UTILRANK_ENDPOINT` and
//! `UTILRANK_MODEL` (plus `GENERATOR_API_KEY` if needed) to label with an
//! OpenAI-compatible server instead.

use std::time::Duration;

use utilrank::corpus::Index;
use utilrank::pipeline::{make_synthetic, SyntheticConfig};
use utilrank::utility::{
    label_utilities, GeneratorClient, LabelConfig, MockGenerator, RemoteGenerator,
};

fn main() -> utilrank::Result<()> {
    let data = make_synthetic(&SyntheticConfig {
        train_queries: 4,
        test_queries: 0,
        ..SyntheticConfig::default()
    })?;
    let index = Index::build(data.corpus)?;

    let generator = match (std::env::var("UTILRANK_ENDPOINT"), std::env::var("UTILRANK_MODEL")) {
        (Ok(endpoint), Ok(model)) => GeneratorClient::Remote(RemoteGenerator::new(
            endpoint,
            model,
            Duration::from_secs(60),
            3,
        )?),
        _ => GeneratorClient::Mock(MockGenerator::new()),
    };

    let outcome = label_utilities(&generator, &data.train, &index, &LabelConfig::default())?;
    for r in &outcome.records {
        println!(
            "{} {:<10} rank {:>2}  U={:.2} grade {}  {:?}",
            r.query_id, r.doc_id, r.rank, r.utility, r.grade, r.generator_output
        );
    }
    println!("skipped: {}", outcome.skipped.len());
    Ok(())
}
