//! Documents, queries, tokenization and the BM25 inverted index.
//!
//! The index is immutable once built. All lookups are read-only, so a single
//! [`Index`] can be shared between threads behind a plain reference.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INDEX_MAGIC: &str = "UTILRANK-INDEX";
pub const INDEX_VERSION: u32 = 1;

/// Lowercases `text` and splits it on every character that is neither a
/// letter nor a digit. Punctuation and whitespace never survive as terms.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Splits `text` into non-overlapping passages of at most `words` whitespace
/// separated words. The last passage may be shorter.
pub fn split_passages(text: &str, words: usize) -> Vec<String> {
    let words = words.max(1);
    let all: Vec<&str> = text.split_whitespace().collect();
    all.chunks(words).map(|c| c.join(" ")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Document {
            doc_id: doc_id.into(),
            tokens: tokenize(&text),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub gold_answers: Vec<String>,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::with_answers(query_id, text, Vec::new())
    }

    pub fn with_answers(
        query_id: impl Into<String>,
        text: impl Into<String>,
        gold_answers: Vec<String>,
    ) -> Self {
        let text = text.into();
        Query {
            query_id: query_id.into(),
            tokens: tokenize(&text),
            text,
            gold_answers,
        }
    }
}

/// Distinct terms in order of first occurrence.
pub(crate) fn distinct_terms(tokens: &[String]) -> Vec<&str> {
    let mut seen = HashSet::with_capacity(tokens.len());
    tokens
        .iter()
        .map(String::as_str)
        .filter(|t| seen.insert(*t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone)]
pub struct Index {
    docs: Vec<Document>,
    positions: HashMap<String, usize>,
    postings: HashMap<String, Vec<Posting>>,
    avg_doc_len: f64,
    params: Bm25Params,
}

impl Index {
    pub fn build(docs: Vec<Document>) -> Result<Index> {
        Self::build_with(docs, Bm25Params::default())
    }

    pub fn build_with(docs: Vec<Document>, params: Bm25Params) -> Result<Index> {
        let mut positions = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if d.doc_id.is_empty() {
                return Err(Error::InvalidArgument("empty doc_id".into()));
            }
            if positions.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateDocId(d.doc_id.clone()));
            }
        }

        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut total_len = 0usize;
        for (i, d) in docs.iter().enumerate() {
            total_len += d.tokens.len();
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &d.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term.to_string()).or_default().push(Posting {
                    doc: i as u32,
                    tf,
                });
            }
        }

        let avg_doc_len = if docs.is_empty() {
            0.0
        } else {
            total_len as f64 / docs.len() as f64
        };

        Ok(Index {
            docs,
            positions,
            postings,
            avg_doc_len,
            params,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc(&self, doc_id: &str) -> Option<&Document> {
        self.positions.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<usize> {
        self.doc(doc_id).map(|d| d.tokens.len())
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Number of distinct indexed terms.
    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn term_frequency(&self, term: &str, doc_id: &str) -> Option<u32> {
        let &pos = self.positions.get(doc_id)?;
        Some(self.tf_at(term, pos))
    }

    fn tf_at(&self, term: &str, pos: usize) -> u32 {
        self.postings.get(term).map_or(0, |list| {
            list.binary_search_by_key(&(pos as u32), |p| p.doc)
                .map_or(0, |i| list[i].tf)
        })
    }

    /// Robertson idf with the `+1` floor: `ln((N - df + 0.5) / (df + 0.5) + 1)`.
    pub fn idf(&self, term: &str) -> f64 {
        idf_value(self.num_docs(), self.doc_freq(term))
    }

    fn term_weight(&self, tf: u32, doc_len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = if self.avg_doc_len > 0.0 {
            doc_len as f64 / self.avg_doc_len
        } else {
            0.0
        };
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    pub fn bm25_score(&self, query: &Query, doc_id: &str) -> Result<f64> {
        let &pos = self
            .positions
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        let len = self.docs[pos].tokens.len();
        let mut score = 0.0;
        for term in distinct_terms(&query.tokens) {
            let tf = self.tf_at(term, pos);
            if tf > 0 {
                score += self.idf(term) * self.term_weight(tf, len);
            }
        }
        Ok(score)
    }

    /// Top-`n` documents by BM25, best first. Documents scoring zero are never
    /// returned; equal scores are ordered by ascending doc_id.
    pub fn retrieve(&self, query: &Query, n: usize) -> Vec<(String, f64)> {
        if n == 0 || self.docs.is_empty() {
            return Vec::new();
        }
        // Accumulation order per document matches `bm25_score` so both give
        // bitwise-identical values.
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in distinct_terms(&query.tokens) {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for p in list {
                let len = self.docs[p.doc as usize].tokens.len();
                *acc.entry(p.doc).or_insert(0.0) += idf * self.term_weight(p.tf, len);
            }
        }
        let mut hits: Vec<(String, f64)> = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(d, s)| (self.docs[d as usize].doc_id.clone(), s))
            .collect();
        sort_ranked(&mut hits);
        hits.truncate(n);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let stored = StoredIndex {
            params: self.params,
            docs: self
                .docs
                .iter()
                .map(|d| StoredDoc {
                    doc_id: d.doc_id.clone(),
                    text: d.text.clone(),
                })
                .collect(),
            postings: self
                .postings
                .iter()
                .map(|(t, l)| (t.clone(), l.iter().map(|p| [p.doc, p.tf]).collect()))
                .collect(),
        };
        writeln!(w, "{INDEX_MAGIC} {INDEX_VERSION}").map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(&mut w, &stored)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Index> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut header = String::new();
        r.read_line(&mut header).map_err(|e| Error::io(path, e))?;
        check_header(path, &header, INDEX_MAGIC, INDEX_VERSION)?;
        let stored: StoredIndex = serde_json::from_reader(r)?;

        let docs: Vec<Document> = stored
            .docs
            .into_iter()
            .map(|d| Document::new(d.doc_id, d.text))
            .collect();
        let mut positions = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if positions.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateDocId(d.doc_id.clone()));
            }
        }
        let mut postings = HashMap::with_capacity(stored.postings.len());
        for (term, list) in stored.postings {
            let list: Vec<Posting> = list
                .into_iter()
                .map(|[doc, tf]| Posting { doc, tf })
                .collect();
            if list.iter().any(|p| p.doc as usize >= docs.len()) {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    message: format!("posting for `{term}` points past the document table"),
                });
            }
            postings.insert(term, list);
        }
        let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
        let avg_doc_len = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };
        Ok(Index {
            docs,
            positions,
            postings,
            avg_doc_len,
            params: stored.params,
        })
    }
}

pub(crate) fn idf_value(num_docs: usize, df: usize) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Sorts by score descending, then doc_id ascending.
pub fn sort_ranked(list: &mut [(String, f64)]) {
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

pub(crate) fn check_header(path: &Path, line: &str, magic: &str, version: u32) -> Result<()> {
    let mut parts = line.split_whitespace();
    let bad = |message: String| Error::Format {
        path: path.display().to_string(),
        message,
    };
    match (parts.next(), parts.next()) {
        (Some(m), Some(v)) if m == magic => {
            let v: u32 = v
                .parse()
                .map_err(|_| bad(format!("bad version `{v}`")))?;
            if v != version {
                return Err(bad(format!("version {v} not supported (expected {version})")));
            }
            Ok(())
        }
        _ => Err(bad(format!("missing `{magic}` header"))),
    }
}

#[derive(Serialize, Deserialize)]
struct StoredDoc {
    doc_id: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    params: Bm25Params,
    docs: Vec<StoredDoc>,
    postings: BTreeMap<String, Vec<[u32; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    doc_id: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetLine {
    query_id: String,
    question: String,
    #[serde(default)]
    answers: Vec<String>,
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a corpus file: one `{"doc_id": .., "text": ..}` object per line.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    Ok(read_jsonl::<CorpusLine>(path)?
        .into_iter()
        .map(|l| Document::new(l.doc_id, l.text))
        .collect())
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    write_jsonl(
        path,
        docs.iter().map(|d| CorpusLine {
            doc_id: d.doc_id.clone(),
            text: d.text.clone(),
        }),
    )
}

/// Reads a question file: one `{"query_id", "question", "answers"}` object per line.
pub fn read_dataset(path: &Path) -> Result<Vec<Query>> {
    let queries: Vec<Query> = read_jsonl::<DatasetLine>(path)?
        .into_iter()
        .map(|l| Query::with_answers(l.query_id, l.question, l.answers))
        .collect();
    let mut seen = HashSet::new();
    for q in &queries {
        if q.query_id.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{}: empty query_id",
                path.display()
            )));
        }
        if !seen.insert(q.query_id.as_str()) {
            return Err(Error::DuplicateQueryId(q.query_id.clone()));
        }
    }
    Ok(queries)
}

pub fn write_dataset(path: &Path, queries: &[Query]) -> Result<()> {
    write_jsonl(
        path,
        queries.iter().map(|q| DatasetLine {
            query_id: q.query_id.clone(),
            question: q.text.clone(),
            answers: q.gold_answers.clone(),
        }),
    )
}
