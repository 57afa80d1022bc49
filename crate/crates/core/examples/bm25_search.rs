//! Build a BM25 index over a handful of documents and query it.

use utilrank::corpus::{Document, Index, Query};

fn main() -> utilrank::Result<()> {
    let docs = vec![
        Document::new("apollo", "Apollo 11 landed on the Moon in July 1969."),
        Document::new("gagarin", "Yuri Gagarin was the first human in space, in 1961."),
        Document::new("hubble", "The Hubble telescope was launched in 1990."),
        Document::new("moon", "The Moon is Earth's only natural satellite."),
    ];
    let index = Index::build(docs)?;
    println!(
        "{} docs, {} terms, avg length {:.2}",
        index.num_docs(),
        index.vocabulary_size(),
        index.avg_doc_len()
    );
    for term in ["moon", "the", "gagarin"] {
        println!("idf({term}) = {:.4}", index.idf(term));
    }

    let q = Query::new("q1", "When did anyone land on the Moon?");
    for (rank, (doc, score)) in index.retrieve(&q, 3).iter().enumerate() {
        println!("{} {doc:<8} {score:.4}", rank + 1);
    }
    Ok(())
}
