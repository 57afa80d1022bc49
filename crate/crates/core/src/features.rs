//! The 14 query-document ranking features and the plain-text ranking file
//! format (`<label> qid:<id> 1:<v> ... 14:<v> #<doc_id>`) used to store them.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{distinct_terms, Document, Index, Query};
use crate::error::{Error, Result};
use crate::topics::{infer_theta, top_topic_coverage, topic_cosine, TopicModel};

pub const NUM_FEATURES: usize = 14;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "query_len",
    "query_distinct_terms",
    "query_idf_min",
    "query_idf_max",
    "query_idf_mean",
    "doc_len",
    "doc_distinct_terms",
    "doc_idf_min",
    "doc_idf_max",
    "doc_idf_mean",
    "term_overlap",
    "bm25",
    "topic_cosine",
    "top_topic_coverage",
];

/// Feature values in fixed order; [`FeatureVector::get`] is 1-based to match
/// the feature numbering in ranking files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }

    pub fn get(&self, feature: usize) -> f64 {
        self.0[feature - 1]
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_FEATURES] = values.try_into().map_err(|_| Error::LengthMismatch {
            expected: NUM_FEATURES,
            actual: values.len(),
        })?;
        Ok(FeatureVector(arr))
    }
}

/// 64-bit FNV-1a over the parts, separated by a zero byte.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET ^ base;
    for part in parts {
        for &b in part.as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
        h ^= 0;
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// (min, max, mean) idf over the distinct terms of `tokens`; zeros when empty.
fn idf_stats(index: &Index, tokens: &[String]) -> (f64, f64, f64) {
    let terms = distinct_terms(tokens);
    if terms.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let idfs: Vec<f64> = terms.iter().map(|t| index.idf(t)).collect();
    let min = idfs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = idfs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = idfs.iter().sum::<f64>() / idfs.len() as f64;
    (min, max, mean)
}

#[derive(Debug, Clone, Copy)]
pub struct FeatureConfig {
    /// How many of the query's top topics count toward coverage.
    pub topic_a: usize,
    pub fold_in_iterations: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            topic_a: 20,
            fold_in_iterations: 50,
        }
    }
}

pub struct FeatureExtractor<'a> {
    index: &'a Index,
    model: &'a TopicModel,
    config: FeatureConfig,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(index: &'a Index, model: &'a TopicModel, config: FeatureConfig) -> Result<Self> {
        if config.topic_a == 0 || config.topic_a > model.num_topics() {
            return Err(Error::InvalidArgument(format!(
                "topic_a must be in 1..={}, got {}",
                model.num_topics(),
                config.topic_a
            )));
        }
        Ok(FeatureExtractor {
            index,
            model,
            config,
        })
    }

    pub fn index(&self) -> &Index {
        self.index
    }

    pub fn extract(&self, q: &Query, d: &Document) -> Result<FeatureVector> {
        let mut f = [0.0; NUM_FEATURES];

        let q_terms: HashSet<&str> = q.tokens.iter().map(String::as_str).collect();
        let d_terms: HashSet<&str> = d.tokens.iter().map(String::as_str).collect();

        f[0] = q.tokens.len() as f64;
        f[1] = q_terms.len() as f64;
        (f[2], f[3], f[4]) = idf_stats(self.index, &q.tokens);

        f[5] = d.tokens.len() as f64;
        f[6] = d_terms.len() as f64;
        (f[7], f[8], f[9]) = idf_stats(self.index, &d.tokens);

        f[10] = q_terms.intersection(&d_terms).count() as f64;
        f[11] = self.index.bm25_score(q, &d.doc_id)?;

        // Query and document topic mixtures are seeded independently of call
        // order: the query's from its id, the document's from its id.
        let base = self.model.seed();
        let iters = self.config.fold_in_iterations;
        let theta_q = infer_theta(
            self.model,
            &q.tokens,
            iters,
            derive_seed(base, &["query", &q.query_id]),
        );
        let theta_d = infer_theta(
            self.model,
            &d.tokens,
            iters,
            derive_seed(base, &["doc", &d.doc_id]),
        );
        f[12] = topic_cosine(&theta_q, &theta_d)?;
        f[13] = top_topic_coverage(&theta_q, &theta_d, self.config.topic_a)?;

        Ok(FeatureVector(f))
    }

    /// Features for each listed document, in input order.
    pub fn batch_extract(
        &self,
        q: &Query,
        doc_ids: &[String],
    ) -> Result<Vec<(String, FeatureVector)>> {
        let docs: Vec<&Document> = doc_ids
            .iter()
            .map(|id| {
                self.index
                    .doc(id)
                    .ok_or_else(|| Error::UnknownDocId(id.clone()))
            })
            .collect::<Result<_>>()?;
        docs.par_iter()
            .map(|d| Ok((d.doc_id.clone(), self.extract(q, d)?)))
            .collect()
    }
}

/// One line of a ranking file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub label: u32,
    pub query_id: String,
    pub doc_id: String,
    pub features: FeatureVector,
}

pub fn format_row(row: &FeatureRow) -> String {
    let mut s = format!("{} qid:{}", row.label, row.query_id);
    for (i, v) in row.features.0.iter().enumerate() {
        s.push_str(&format!(" {}:{}", i + 1, v));
    }
    s.push_str(&format!(" #{}", row.doc_id));
    s
}

pub fn parse_row(line: &str) -> std::result::Result<FeatureRow, String> {
    let (body, doc_id) = match line.split_once('#') {
        Some((b, c)) => (b, c.trim().to_string()),
        None => (line, String::new()),
    };
    let mut parts = body.split_whitespace();
    let label: u32 = parts
        .next()
        .ok_or("empty line")?
        .parse()
        .map_err(|_| "label is not a non-negative integer")?;
    let query_id = parts
        .next()
        .and_then(|p| p.strip_prefix("qid:"))
        .ok_or("missing qid")?
        .to_string();
    let mut values = [0.0; NUM_FEATURES];
    let mut seen = [false; NUM_FEATURES];
    for p in parts {
        let (k, v) = p.split_once(':').ok_or_else(|| format!("bad pair `{p}`"))?;
        let k: usize = k.parse().map_err(|_| format!("bad feature id `{k}`"))?;
        if !(1..=NUM_FEATURES).contains(&k) {
            return Err(format!("feature id {k} out of range"));
        }
        values[k - 1] = v.parse().map_err(|_| format!("bad value `{v}`"))?;
        seen[k - 1] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(format!("expected all {NUM_FEATURES} features"));
    }
    if doc_id.is_empty() {
        return Err("missing `#doc_id` comment".into());
    }
    Ok(FeatureRow {
        label,
        query_id,
        doc_id,
        features: FeatureVector(values),
    })
}

pub fn write_feature_file(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in rows {
        writeln!(w, "{}", format_row(r)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_file(path: &Path) -> Result<Vec<FeatureRow>> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(parse_row(&line).map_err(|message| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        })?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::{train_lda, LdaConfig};

    fn setup() -> (Index, TopicModel) {
        let docs = vec![
            Document::new("d1", "cat sat"),
            Document::new("d2", "dog ran far away"),
            Document::new("d3", ""),
            Document::new("d4", "cat cat dog"),
        ];
        let model = train_lda(
            &docs,
            &LdaConfig {
                num_topics: 3,
                iterations: 10,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        (Index::build(docs).unwrap(), model)
    }

    fn cfg() -> FeatureConfig {
        FeatureConfig {
            topic_a: 2,
            fold_in_iterations: 10,
        }
    }

    #[test]
    fn direct_counts() {
        let (index, model) = setup();
        let fx = FeatureExtractor::new(&index, &model, cfg()).unwrap();
        let q = Query::new("q", "cat sat");
        let f = fx.extract(&q, index.doc("d1").unwrap()).unwrap();
        assert_eq!((f.get(1), f.get(2), f.get(6), f.get(7), f.get(11)), (2.0, 2.0, 2.0, 2.0, 2.0));
        assert_eq!(f.get(12), index.bm25_score(&q, "d1").unwrap());
    }

    #[test]
    fn disjoint_and_empty() {
        let (index, model) = setup();
        let fx = FeatureExtractor::new(&index, &model, cfg()).unwrap();
        let q = Query::new("q", "cat");
        let f = fx.extract(&q, index.doc("d2").unwrap()).unwrap();
        assert_eq!((f.get(11), f.get(12)), (0.0, 0.0));
        let f = fx.extract(&q, index.doc("d3").unwrap()).unwrap();
        for i in [6, 7, 8, 9, 10, 11, 12] {
            assert_eq!(f.get(i), 0.0, "feature {i}");
        }
        let empty = Query::new("e", "?");
        let f = fx.extract(&empty, index.doc("d1").unwrap()).unwrap();
        assert_eq!((f.get(3), f.get(4), f.get(5)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn distinct_idf_aggregation() {
        let (index, model) = setup();
        let fx = FeatureExtractor::new(&index, &model, cfg()).unwrap();
        let f = fx
            .extract(&Query::new("q", "cat cat dog"), index.doc("d4").unwrap())
            .unwrap();
        let mean = (index.idf("cat") + index.idf("dog")) / 2.0;
        assert!((f.get(5) - mean).abs() < 1e-15);
        assert_eq!(f.get(1), 3.0);
        assert_eq!(f.get(2), 2.0);
    }

    #[test]
    fn batch_preserves_order() {
        let (index, model) = setup();
        let fx = FeatureExtractor::new(&index, &model, cfg()).unwrap();
        let q = Query::new("q", "cat dog");
        assert!(fx.batch_extract(&q, &[]).unwrap().is_empty());
        let ids: Vec<String> = ["d4", "d1", "d2"].iter().map(|s| s.to_string()).collect();
        let out = fx.batch_extract(&q, &ids).unwrap();
        let order: Vec<&str> = out.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(order, ["d4", "d1", "d2"]);
        assert_eq!(out[1].1, fx.extract(&q, index.doc("d1").unwrap()).unwrap());
        let err = fx.batch_extract(&q, &["missing".to_string()]).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn rejects_bad_topic_threshold() {
        let (index, model) = setup();
        let bad = FeatureConfig {
            topic_a: 4,
            ..cfg()
        };
        assert!(FeatureExtractor::new(&index, &model, bad).is_err());
    }

    #[test]
    fn row_format() {
        let row = FeatureRow {
            label: 3,
            query_id: "q7".into(),
            doc_id: "doc-1".into(),
            features: FeatureVector([1.5; NUM_FEATURES]),
        };
        let line = format_row(&row);
        assert!(line.starts_with("3 qid:q7 1:1.5 2:1.5"));
        assert!(line.ends_with("14:1.5 #doc-1"));
        assert_eq!(parse_row(&line).unwrap(), row);
        assert!(parse_row("1 qid:a 1:0 #x").is_err());
        assert!(parse_row("x qid:a").is_err());
    }
}
