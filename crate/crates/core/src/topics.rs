//! Latent Dirichlet allocation fitted with collapsed Gibbs sampling, plus the
//! two topic-similarity signals used as ranking features.
//!
//! Topic distributions for unseen text (queries as well as documents) are
//! obtained by fold-in: token assignments are resampled against the trained,
//! frozen topic-word matrix. Every sampler owns its own seeded RNG, so a
//! trained [`TopicModel`] can be shared across threads.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{check_header, Document};
use crate::error::{Error, Result};

pub const TOPIC_MAGIC: &str = "UTILRANK-LDA";
pub const TOPIC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub iterations: usize,
    /// Symmetric doc-topic prior. `None` means `50 / num_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
    /// Train on a random subset of this many documents.
    pub subset: Option<usize>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            num_topics: 100,
            iterations: 500,
            alpha: None,
            beta: 0.01,
            seed: 42,
            subset: None,
        }
    }
}

/// A probability vector over topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution(Vec<f64>);

impl TopicDistribution {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Empty("topic distribution".into()));
        }
        if theta.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "topic probabilities must be non-negative".into(),
            ));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "topic probabilities sum to {sum}"
            )));
        }
        Ok(TopicDistribution(theta))
    }

    pub fn uniform(m: usize) -> Self {
        TopicDistribution(vec![1.0 / m as f64; m])
    }

    pub fn theta(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    num_topics: usize,
    vocab: Vec<String>,
    vocab_index: HashMap<String, usize>,
    /// `num_topics x vocab.len()`, row-major.
    phi: Vec<f64>,
    alpha: f64,
    beta: f64,
    seed: u64,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocab_index.get(term).copied()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Word distribution of one topic.
    pub fn phi_row(&self, topic: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.phi[topic * v..(topic + 1) * v]
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Most probable words of a topic, for diagnostics.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(&str, f64)> {
        let row = self.phi_row(topic);
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|i| (self.vocab[i].as_str(), row[i]))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "{TOPIC_MAGIC} {TOPIC_VERSION}").map_err(io)?;
        writeln!(
            w,
            "{} {} {} {} {}",
            self.num_topics,
            self.vocab.len(),
            self.alpha,
            self.beta,
            self.seed
        )
        .map_err(io)?;
        for term in &self.vocab {
            writeln!(w, "{term}").map_err(io)?;
        }
        for k in 0..self.num_topics {
            let row: Vec<String> = self.phi_row(k).iter().map(f64::to_string).collect();
            writeln!(w, "{}", row.join(" ")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<TopicModel> {
        let io = |e| Error::io(path, e);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut lines = reader.lines();
        let mut next = |n: usize| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| parse_err(n, "unexpected end of file".into()))?
                .map_err(io)
        };
        check_header(path, &next(1)?, TOPIC_MAGIC, TOPIC_VERSION)?;
        let header = next(2)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(parse_err(2, format!("expected 5 header fields, got {}", fields.len())));
        }
        let bad = |what: &str| parse_err(2, format!("bad {what}"));
        let num_topics: usize = fields[0].parse().map_err(|_| bad("topic count"))?;
        let vocab_size: usize = fields[1].parse().map_err(|_| bad("vocabulary size"))?;
        let alpha: f64 = fields[2].parse().map_err(|_| bad("alpha"))?;
        let beta: f64 = fields[3].parse().map_err(|_| bad("beta"))?;
        let seed: u64 = fields[4].parse().map_err(|_| bad("seed"))?;

        let mut vocab = Vec::with_capacity(vocab_size);
        for i in 0..vocab_size {
            vocab.push(next(3 + i)?);
        }
        let mut phi = Vec::with_capacity(num_topics * vocab_size);
        for k in 0..num_topics {
            let line_no = 3 + vocab_size + k;
            let row = next(line_no)?;
            let before = phi.len();
            for tok in row.split_whitespace() {
                phi.push(
                    tok.parse::<f64>()
                        .map_err(|_| parse_err(line_no, format!("bad probability `{tok}`")))?,
                );
            }
            if phi.len() - before != vocab_size {
                return Err(parse_err(line_no, "phi row has the wrong width".into()));
            }
        }
        let vocab_index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TopicModel {
            num_topics,
            vocab,
            vocab_index,
            phi,
            alpha,
            beta,
            seed,
        })
    }
}

/// Draws an index with probability proportional to `weights`.
fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

pub fn train_lda(docs: &[Document], config: &LdaConfig) -> Result<TopicModel> {
    let m = config.num_topics;
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "number of topics must be at least 2, got {m}"
        )));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    let alpha = config.alpha.unwrap_or(50.0 / m as f64);
    let beta = config.beta;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut selected: Vec<&Document> = docs.iter().filter(|d| !d.tokens.is_empty()).collect();
    if let Some(n) = config.subset {
        if n < selected.len() {
            selected.shuffle(&mut rng);
            selected.truncate(n);
        }
    }
    if selected.is_empty() {
        return Err(Error::Empty("no non-empty documents to train on".into()));
    }

    let mut vocab: Vec<String> = selected
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect();
    vocab.sort_unstable();
    vocab.dedup();
    let vocab_index: HashMap<String, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let v = vocab.len();
    let vbeta = v as f64 * beta;

    let words: Vec<Vec<usize>> = selected
        .iter()
        .map(|d| d.tokens.iter().map(|t| vocab_index[t]).collect())
        .collect();

    let mut doc_topic = vec![0u32; words.len() * m];
    let mut topic_word = vec![0u32; m * v];
    let mut topic_total = vec![0u32; m];
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(words.len());
    for (d, ws) in words.iter().enumerate() {
        let z: Vec<usize> = ws.iter().map(|_| rng.random_range(0..m)).collect();
        for (&w, &k) in ws.iter().zip(&z) {
            doc_topic[d * m + k] += 1;
            topic_word[k * v + w] += 1;
            topic_total[k] += 1;
        }
        assignments.push(z);
    }

    let mut weights = vec![0.0; m];
    for _ in 0..config.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (i, &w) in ws.iter().enumerate() {
                let old = assignments[d][i];
                doc_topic[d * m + old] -= 1;
                topic_word[old * v + w] -= 1;
                topic_total[old] -= 1;

                for (k, wt) in weights.iter_mut().enumerate() {
                    *wt = (f64::from(doc_topic[d * m + k]) + alpha)
                        * (f64::from(topic_word[k * v + w]) + beta)
                        / (f64::from(topic_total[k]) + vbeta);
                }
                let new = sample(&weights, &mut rng);

                assignments[d][i] = new;
                doc_topic[d * m + new] += 1;
                topic_word[new * v + w] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let mut phi = vec![0.0; m * v];
    for k in 0..m {
        let denom = f64::from(topic_total[k]) + vbeta;
        let row = &mut phi[k * v..(k + 1) * v];
        for (w, p) in row.iter_mut().enumerate() {
            *p = (f64::from(topic_word[k * v + w]) + beta) / denom;
        }
        normalize(row);
    }

    Ok(TopicModel {
        num_topics: m,
        vocab,
        vocab_index,
        phi,
        alpha,
        beta,
        seed: config.seed,
    })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= s);
}

/// Topic distribution of `tokens` by fold-in Gibbs sampling against the frozen
/// topic-word matrix. Out-of-vocabulary tokens are ignored; if nothing is left
/// the uniform distribution is returned.
pub fn infer_theta(
    model: &TopicModel,
    tokens: &[String],
    iterations: usize,
    seed: u64,
) -> TopicDistribution {
    let m = model.num_topics;
    let words: Vec<usize> = tokens.iter().filter_map(|t| model.term_index(t)).collect();
    if words.is_empty() {
        return TopicDistribution::uniform(m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = model.vocab.len();
    let alpha = model.alpha;

    let mut counts = vec![0u32; m];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let k = rng.random_range(0..m);
            counts[k] += 1;
            k
        })
        .collect();

    let mut weights = vec![0.0; m];
    for _ in 0..iterations {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            for (k, wt) in weights.iter_mut().enumerate() {
                *wt = (f64::from(counts[k]) + alpha) * model.phi[k * v + w];
            }
            let new = sample(&weights, &mut rng);
            z[i] = new;
            counts[new] += 1;
        }
    }

    let mut theta: Vec<f64> = counts.iter().map(|&c| f64::from(c) + alpha).collect();
    normalize(&mut theta);
    TopicDistribution(theta)
}

/// Cosine similarity of two topic distributions, in `[0, 1]`.
pub fn topic_cosine(a: &TopicDistribution, b: &TopicDistribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Indices of the `a` largest entries, ties going to the lower index.
pub fn top_topics(theta: &TopicDistribution, a: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&i, &j| theta.0[j].total_cmp(&theta.0[i]).then(i.cmp(&j)));
    idx.truncate(a);
    idx
}

/// Mass the document places on the query's `a` most probable topics.
pub fn top_topic_coverage(
    query: &TopicDistribution,
    doc: &TopicDistribution,
    a: usize,
) -> Result<f64> {
    if query.len() != doc.len() {
        return Err(Error::LengthMismatch {
            expected: query.len(),
            actual: doc.len(),
        });
    }
    if a == 0 || a > query.len() {
        return Err(Error::InvalidArgument(format!(
            "top-topic threshold must be in 1..={}, got {a}",
            query.len()
        )));
    }
    let sum: f64 = top_topics(query, a).into_iter().map(|m| doc.0[m]).sum();
    Ok(sum.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> TopicDistribution {
        TopicDistribution::new(v.to_vec()).unwrap()
    }

    fn toy_docs() -> Vec<Document> {
        vec![
            Document::new("1", "apple banana apple cherry"),
            Document::new("2", "dog cat dog mouse"),
            Document::new("3", ""),
        ]
    }

    #[test]
    fn rejects_single_topic() {
        let cfg = LdaConfig {
            num_topics: 1,
            ..LdaConfig::default()
        };
        assert!(matches!(
            train_lda(&toy_docs(), &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rejects_empty_effective_corpus() {
        let docs = vec![Document::new("1", ""), Document::new("2", "!!")];
        assert!(matches!(
            train_lda(&docs, &LdaConfig::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn phi_rows_are_distributions() {
        let cfg = LdaConfig {
            num_topics: 3,
            iterations: 20,
            ..LdaConfig::default()
        };
        let model = train_lda(&toy_docs(), &cfg).unwrap();
        for k in 0..3 {
            let row = model.phi_row(k);
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oov_and_empty_fall_back_to_uniform() {
        let cfg = LdaConfig {
            num_topics: 4,
            iterations: 5,
            ..LdaConfig::default()
        };
        let model = train_lda(&toy_docs(), &cfg).unwrap();
        let u = TopicDistribution::uniform(4);
        assert_eq!(infer_theta(&model, &[], 10, 1), u);
        assert_eq!(infer_theta(&model, &["zzz".to_string()], 10, 1), u);
    }

    #[test]
    fn cosine_examples() {
        let a = dist(&[0.2, 0.3, 0.5]);
        assert!((topic_cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(topic_cosine(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 0.0);
        let c = topic_cosine(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap();
        assert!((c - 0.5 / 0.5f64.sqrt()).abs() < 1e-12);
        assert!(topic_cosine(&dist(&[1.0]), &dist(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn coverage_examples() {
        let q = dist(&[0.7, 0.2, 0.1]);
        let d = dist(&[0.1, 0.6, 0.3]);
        assert!((top_topic_coverage(&q, &d, 1).unwrap() - 0.1).abs() < 1e-12);
        assert!((top_topic_coverage(&q, &d, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(top_topic_coverage(&q, &d, 0).is_err());
        assert!(top_topic_coverage(&q, &d, 4).is_err());
        // tie at the cut: lower index wins
        let q = dist(&[0.4, 0.3, 0.3]);
        assert_eq!(top_topics(&q, 2), vec![0, 1]);
        assert!((top_topic_coverage(&q, &d, 2).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn save_load_round_trip() {
        let cfg = LdaConfig {
            num_topics: 2,
            iterations: 10,
            seed: 9,
            ..LdaConfig::default()
        };
        let model = train_lda(&toy_docs(), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lda.txt");
        model.save(&path).unwrap();
        assert_eq!(TopicModel::load(&path).unwrap(), model);
    }
}
