//! Train a small LDA model and fold in unseen text.

use utilrank::corpus::{tokenize, Document};
use utilrank::topics::{infer_theta, top_topic_coverage, topic_cosine, train_lda, LdaConfig};

fn main() -> utilrank::Result<()> {
    let sport = ["goal", "match", "striker", "league", "keeper", "penalty"];
    let cook = ["oven", "flour", "butter", "simmer", "recipe", "garlic"];
    let docs: Vec<Document> = (0..40)
        .map(|i| {
            let vocab = if i % 2 == 0 { &sport } else { &cook };
            let text: Vec<&str> = (0..12).map(|j| vocab[(i * 7 + j * 5) % vocab.len()]).collect();
            Document::new(format!("d{i}"), text.join(" "))
        })
        .collect();

    let config = LdaConfig {
        num_topics: 2,
        iterations: 200,
        alpha: Some(0.1),
        ..LdaConfig::default()
    };
    let model = train_lda(&docs, &config)?;
    for t in 0..model.num_topics() {
        let words: Vec<&str> = model.top_words(t, 4).into_iter().map(|(w, _)| w).collect();
        println!("topic {t}: {}", words.join(", "));
    }

    let a = infer_theta(&model, &tokenize("the striker scored a penalty"), 50, 1);
    let b = infer_theta(&model, &tokenize("keeper saves the match"), 50, 2);
    let c = infer_theta(&model, &tokenize("melt butter, add garlic"), 50, 3);
    println!("theta(a) = {:.3?}", a.theta());
    println!("cos(a, b) = {:.3}  cos(a, c) = {:.3}", topic_cosine(&a, &b)?, topic_cosine(&a, &c)?);
    println!("top-1 coverage(a, c) = {:.3}", top_topic_coverage(&a, &c, 1)?);
    Ok(())
}
