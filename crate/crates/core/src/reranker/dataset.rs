use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::features::{FeatureRow, FeatureVector};
use crate::utility::UtilityRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub doc_id: String,
    pub features: FeatureVector,
    pub grade: u32,
    pub utility: f64,
}

/// Candidates of one query, in first-stage retrieval order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub rows: Vec<RankedRow>,
}

impl QueryGroup {
    pub fn grades(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.grade).collect()
    }

    pub fn has_preference(&self) -> bool {
        self.rows.windows(2).any(|w| w[0].grade != w[1].grade)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    pub groups: Vec<QueryGroup>,
    pub g_max: u32,
}

impl RankingDataset {
    pub fn new(groups: Vec<QueryGroup>, g_max: u32) -> Result<Self> {
        for g in &groups {
            if g.rows.is_empty() {
                return Err(Error::Empty(format!("query group `{}`", g.query_id)));
            }
            if let Some(r) = g.rows.iter().find(|r| r.grade > g_max) {
                return Err(Error::InvalidArgument(format!(
                    "grade {} of `{}`/`{}` exceeds {g_max}",
                    r.grade, g.query_id, r.doc_id
                )));
            }
        }
        Ok(RankingDataset { groups, g_max })
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_rows(&self) -> usize {
        self.groups.iter().map(|g| g.rows.len()).sum()
    }

    /// Groups ranking-file rows by query id (first appearance order). Labels
    /// are grades. When `records` holds a matching utility it is used,
    /// otherwise utility is `grade / g_max`.
    pub fn from_feature_rows(
        rows: Vec<FeatureRow>,
        records: Option<&[UtilityRecord]>,
        g_max: u32,
    ) -> Result<Self> {
        let utilities: HashMap<(&str, &str), f64> = records
            .unwrap_or_default()
            .iter()
            .map(|r| ((r.query_id.as_str(), r.doc_id.as_str()), r.utility))
            .collect();
        let mut order: Vec<String> = Vec::new();
        let mut by_query: HashMap<String, Vec<RankedRow>> = HashMap::new();
        for row in rows {
            let utility = utilities
                .get(&(row.query_id.as_str(), row.doc_id.as_str()))
                .copied()
                .unwrap_or_else(|| f64::from(row.label) / f64::from(g_max.max(1)));
            let entry = by_query.entry(row.query_id.clone()).or_insert_with(|| {
                order.push(row.query_id.clone());
                Vec::new()
            });
            entry.push(RankedRow {
                doc_id: row.doc_id,
                features: row.features,
                grade: row.label,
                utility,
            });
        }
        let groups = order
            .into_iter()
            .map(|qid| {
                let rows = by_query.remove(&qid).unwrap_or_default();
                QueryGroup { query_id: qid, rows }
            })
            .collect();
        Self::new(groups, g_max)
    }

    pub fn to_feature_rows(&self) -> Vec<FeatureRow> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.rows.iter().map(|r| FeatureRow {
                    label: r.grade,
                    query_id: g.query_id.clone(),
                    doc_id: r.doc_id.clone(),
                    features: r.features,
                })
            })
            .collect()
    }

    /// Splits groups into (train, validation) with a seeded shuffle;
    /// `fraction` of the groups go to validation.
    pub fn split(&self, fraction: f64, seed: u64) -> (RankingDataset, RankingDataset) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut idx: Vec<usize> = (0..self.groups.len()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let n_val = ((self.groups.len() as f64) * fraction).round() as usize;
        let n_val = n_val.min(self.groups.len().saturating_sub(1));
        let mut val: Vec<usize> = idx[..n_val].to_vec();
        let mut train: Vec<usize> = idx[n_val..].to_vec();
        val.sort_unstable();
        train.sort_unstable();
        let pick = |ids: Vec<usize>| RankingDataset {
            groups: ids.into_iter().map(|i| self.groups[i].clone()).collect(),
            g_max: self.g_max,
        };
        (pick(train), pick(val))
    }
}
