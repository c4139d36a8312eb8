//! Ranking-quality evaluation: Recall@k, mAP@k, MRR@k, and the k-sweep
//! curves behind them.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Embedding;
use crate::retrieval::{GalleryIndex, RankedList};

/// Per-query sets of relevant gallery ids (each non-empty).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceJudgments {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl RelevanceJudgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: String, relevant: BTreeSet<String>) -> Result<()> {
        if relevant.is_empty() {
            return Err(Error::EmptyRelevantSet { query_id });
        }
        self.map.insert(query_id, relevant);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.map.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Ground truth by identity: a query is relevant to every gallery entry
    /// sharing its subject. `queries` pairs each query id with its subject.
    pub fn subject_match(queries: &[(String, String)], index: &GalleryIndex) -> Result<Self> {
        let mut out = RelevanceJudgments::new();
        for (query_id, subject_id) in queries {
            let relevant: BTreeSet<String> = index
                .entries()
                .iter()
                .filter(|e| &e.subject_id == subject_id)
                .map(|e| e.gallery_id.clone())
                .collect();
            if relevant.is_empty() {
                return Err(Error::EmptyRelevantSet {
                    query_id: query_id.clone(),
                });
            }
            out.map.insert(query_id.clone(), relevant);
        }
        Ok(out)
    }

    /// Every relevant id must exist in the gallery.
    pub fn validate_against(&self, index: &GalleryIndex) -> Result<()> {
        let ids: BTreeSet<&String> = index.entries().iter().map(|e| &e.gallery_id).collect();
        for (query_id, relevant) in &self.map {
            for id in relevant {
                if !ids.contains(id) {
                    return Err(Error::UnknownRelevantId {
                        query_id: query_id.clone(),
                        id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, BTreeSet<String>> =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let mut out = RelevanceJudgments::new();
        for (query_id, relevant) in raw {
            out.insert(query_id, relevant)?;
        }
        Ok(out)
    }
}

fn relevant_for<'a>(
    judgments: &'a RelevanceJudgments,
    query_id: &str,
) -> Result<&'a BTreeSet<String>> {
    judgments.get(query_id).ok_or_else(|| Error::MissingJudgments {
        query_id: query_id.to_string(),
    })
}

/// Mean over queries of |relevant in top-k| / |relevant|.
pub fn recall_at_k(ranked: &[RankedList], judgments: &RelevanceJudgments, k: usize) -> Result<f64> {
    check_k(k)?;
    let mut total = 0.0;
    for list in ranked {
        let relevant = relevant_for(judgments, &list.query_id)?;
        let hits = list
            .items
            .iter()
            .take(k)
            .filter(|item| relevant.contains(&item.gallery_id))
            .count();
        total += hits as f64 / relevant.len() as f64;
    }
    Ok(total / ranked.len().max(1) as f64)
}

/// Truncated average precision for one ranking:
/// sum of precision-at-r over relevant ranks r <= k, divided by
/// min(|relevant|, k).
pub fn average_precision_at_k(
    ranked: &RankedList,
    relevant: &BTreeSet<String>,
    k: usize,
) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet {
            query_id: ranked.query_id.clone(),
        });
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.items.iter().take(k).enumerate() {
        if relevant.contains(&item.gallery_id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / relevant.len().min(k) as f64)
}

/// Mean over queries of 1/rank of the first relevant item when that rank is
/// within k, else 0.
pub fn mrr_at_k(ranked: &[RankedList], judgments: &RelevanceJudgments, k: usize) -> Result<f64> {
    check_k(k)?;
    let mut total = 0.0;
    for list in ranked {
        let relevant = relevant_for(judgments, &list.query_id)?;
        if let Some(pos) = list
            .items
            .iter()
            .take(k)
            .position(|item| relevant.contains(&item.gallery_id))
        {
            total += 1.0 / (pos + 1) as f64;
        }
    }
    Ok(total / ranked.len().max(1) as f64)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig {
            detail: "k must be at least 1".to_string(),
        });
    }
    Ok(())
}

/// All three metrics for every k in 1..=k_max, plus each query's relevant-item
/// ranks in the full gallery ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k_max: usize,
    pub num_queries: usize,
    pub recall_at: BTreeMap<usize, f64>,
    pub map_at: BTreeMap<usize, f64>,
    pub mrr_at: BTreeMap<usize, f64>,
    /// Ascending 1-based ranks of each query's relevant items.
    pub per_query_ranks: BTreeMap<String, Vec<usize>>,
}

impl MetricsReport {
    /// (recall, map, mrr) at k_max.
    pub fn summary(&self) -> (f64, f64, f64) {
        (
            self.recall_at[&self.k_max],
            self.map_at[&self.k_max],
            self.mrr_at[&self.k_max],
        )
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct WithSummary<'a> {
            k_max: usize,
            num_queries: usize,
            summary: Summary,
            #[serde(flatten)]
            rest: &'a MetricsReport,
        }
        #[derive(Serialize)]
        struct Summary {
            recall: f64,
            map: f64,
            mrr: f64,
        }
        let (recall, map, mrr) = self.summary();
        serde_json::to_vec_pretty(&WithSummary {
            k_max: self.k_max,
            num_queries: self.num_queries,
            summary: Summary { recall, map, mrr },
            rest: self,
        })
        .map_err(|e| Error::Parse {
            path: "metrics-report".into(),
            message: e.to_string(),
        })
    }

    /// Writes the k-sweep as CSV `k,recall,map,mrr`.
    pub fn write_curves_csv(&self, path: &Path) -> Result<()> {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| Error::from_csv(path, e))?;
        writer
            .write_record(["k", "recall", "map", "mrr"])
            .map_err(|e| Error::parse(path, e.to_string()))?;
        for k in 1..=self.k_max {
            writer
                .write_record([
                    k.to_string(),
                    self.recall_at[&k].to_string(),
                    self.map_at[&k].to_string(),
                    self.mrr_at[&k].to_string(),
                ])
                .map_err(|e| Error::parse(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// Ranks the full gallery for every probe and sweeps all three metrics over
/// k = 1..=k_max.
pub fn evaluate(
    index: &GalleryIndex,
    queries: &[(String, Embedding)],
    judgments: &RelevanceJudgments,
    k_max: usize,
) -> Result<MetricsReport> {
    check_k(k_max)?;
    if queries.is_empty() {
        return Err(Error::InvalidConfig {
            detail: "no queries to evaluate".to_string(),
        });
    }
    judgments.validate_against(index)?;

    let gallery_size = index.len();
    let mut rankings = Vec::with_capacity(queries.len());
    let mut per_query_ranks = BTreeMap::new();
    for (query_id, probe) in queries {
        let relevant = relevant_for(judgments, query_id)?;
        let ranked = index.query(query_id, probe, gallery_size)?;
        let ranks: Vec<usize> = ranked
            .items
            .iter()
            .enumerate()
            .filter(|(_, item)| relevant.contains(&item.gallery_id))
            .map(|(i, _)| i + 1)
            .collect();
        per_query_ranks.insert(query_id.clone(), ranks);
        rankings.push(ranked);
    }

    let mut recall_curve = BTreeMap::new();
    let mut map_curve = BTreeMap::new();
    let mut mrr_curve = BTreeMap::new();
    for k in 1..=k_max {
        recall_curve.insert(k, recall_at_k(&rankings, judgments, k)?);
        let mut ap_sum = 0.0;
        for ranked in &rankings {
            let relevant = relevant_for(judgments, &ranked.query_id)?;
            ap_sum += average_precision_at_k(ranked, relevant, k)?;
        }
        map_curve.insert(k, ap_sum / rankings.len() as f64);
        mrr_curve.insert(k, mrr_at_k(&rankings, judgments, k)?);
    }
    Ok(MetricsReport {
        k_max,
        num_queries: queries.len(),
        recall_at: recall_curve,
        map_at: map_curve,
        mrr_at: mrr_curve,
        per_query_ranks,
    })
}
