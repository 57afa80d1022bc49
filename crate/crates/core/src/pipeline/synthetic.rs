//! Fact-planted synthetic corpus for offline end-to-end runs.
//!
//! Every query asks for the code of a unique subject. Exactly one document
//! per query holds `fact(subject → code)`: a short registry entry mentioning
//! the subject once. The other candidates are long narrative documents:
//! "strong" ones repeat the subject and outrank the fact under BM25, "weak"
//! ones mention it once and rank below it. A hard query has enough strong
//! distractors to push the fact document to `hard_rank`; an easy query puts
//! it at `easy_rank`. Question words never occur in documents, so each query
//! retrieves exactly its own candidates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, Query};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub train_queries: usize,
    pub test_queries: usize,
    pub docs_per_query: usize,
    pub hard_fraction: f64,
    /// 1-based BM25 rank of the fact document in hard queries.
    pub hard_rank: usize,
    pub easy_rank: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train_queries: 200,
            test_queries: 100,
            docs_per_query: 10,
            hard_fraction: 0.5,
            hard_rank: 8,
            easy_rank: 3,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Vec<Document>,
    pub train: Vec<Query>,
    pub test: Vec<Query>,
    /// Ids of the fact documents, keyed by query id.
    pub fact_docs: Vec<(String, String)>,
    /// Query ids built to put the fact document at `hard_rank`.
    pub hard: Vec<String>,
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "be", "do", "fu", "ga", "hi", "jo", "pe", "su",
];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
        .collect()
}

fn vocabulary(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}{i}", pseudo_word(rng, 2))).collect()
}

fn words(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect()
}

/// Inserts `term` `count` times at random positions.
fn sprinkle(rng: &mut ChaCha8Rng, body: &mut Vec<String>, term: &str, count: usize) {
    for _ in 0..count {
        let at = rng.random_range(0..=body.len());
        body.insert(at, term.to_string());
    }
}

pub fn make_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    let n = config.docs_per_query;
    if config.easy_rank == 0 || config.hard_rank == 0 || config.easy_rank.max(config.hard_rank) > n {
        return Err(Error::InvalidArgument(format!("fact ranks must lie in 1..={n}")));
    }
    if !(0.0..=1.0).contains(&config.hard_fraction) {
        return Err(Error::InvalidArgument("hard_fraction must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let registry = vocabulary(&mut rng, "reg", 40);
    let story = vocabulary(&mut rng, "sto", 80);

    let total = config.train_queries + config.test_queries;
    let mut corpus = Vec::with_capacity(total * n);
    let mut queries = Vec::with_capacity(total);
    let mut fact_docs = Vec::with_capacity(total);
    let mut hard = Vec::new();

    // hard/easy chosen per split so both splits get the same share
    let mut is_hard = Vec::with_capacity(total);
    for split in [config.train_queries, config.test_queries] {
        let n_hard = (split as f64 * config.hard_fraction).round() as usize;
        let mut flags: Vec<bool> = (0..split).map(|i| i < n_hard).collect();
        flags.shuffle(&mut rng);
        is_hard.extend(flags);
    }

    for (qi, &hard_query) in is_hard.iter().enumerate() {
        let qid = format!("q{qi:04}");
        let subject = format!("{}{qi}", pseudo_word(&mut rng, 3));
        let code = format!("{}{qi}x", pseudo_word(&mut rng, 2));
        let fact_rank = if hard_query { config.hard_rank } else { config.easy_rank };
        let strong = fact_rank - 1;

        let mut slots: Vec<usize> = (0..n).collect();
        slots.shuffle(&mut rng);
        let doc_id = |slot: usize| format!("{qid}-d{slot:02}");

        let fact_len = rng.random_range(6..=12);
        let mut fact = words(&mut rng, &registry, fact_len);
        let at = rng.random_range(0..=fact.len());
        fact.insert(at, format!("fact({subject} → {code})"));
        let fact_id = doc_id(slots[0]);
        corpus.push(Document::new(fact_id.clone(), fact.join(" ")));

        for (j, &slot) in slots.iter().enumerate().skip(1) {
            let len = rng.random_range(30..=45);
            let tf = if j <= strong { rng.random_range(4..=6) } else { 1 };
            let mut body = words(&mut rng, &story, len);
            sprinkle(&mut rng, &mut body, &subject, tf);
            corpus.push(Document::new(doc_id(slot), body.join(" ")));
        }

        queries.push(Query::with_answers(
            qid.clone(),
            format!("what is the secret code of {subject}?"),
            vec![code],
        ));
        fact_docs.push((qid.clone(), fact_id));
        if hard_query {
            hard.push(qid);
        }
    }
    corpus.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let test = queries.split_off(config.train_queries);
    Ok(SyntheticData {
        corpus,
        train: queries,
        test,
        fact_docs,
        hard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Index;

    #[test]
    fn fact_lands_at_planned_rank() {
        let cfg = SyntheticConfig {
            train_queries: 20,
            test_queries: 10,
            ..Default::default()
        };
        let data = make_synthetic(&cfg).unwrap();
        assert_eq!(data.corpus.len(), 300);
        assert_eq!(data.hard.len(), 15);
        let index = Index::build(data.corpus.clone()).unwrap();
        for (q, (qid, fact)) in data.train.iter().chain(&data.test).zip(&data.fact_docs) {
            assert_eq!(&q.query_id, qid);
            let hits = index.retrieve(q, 100);
            assert_eq!(hits.len(), 10, "query retrieves only its own candidates");
            let rank = hits.iter().position(|(d, _)| d == fact).unwrap() + 1;
            let want = if data.hard.contains(qid) { 8 } else { 3 };
            assert_eq!(rank, want, "{qid}");
        }
    }

    #[test]
    fn deterministic() {
        let a = make_synthetic(&SyntheticConfig::default()).unwrap();
        let b = make_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.test, b.test);
    }
}
