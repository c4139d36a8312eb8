//! Immutable gallery of face embeddings with exhaustive distance-ranked
//! top-k search. Candidates score `exp(-distance)`, a (0, 1] confidence that
//! preserves the distance ordering.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_model::View;
use crate::error::{Error, Result};
use crate::model::Embedding;

/// Subject id carried by filler gallery entries that belong to no catalog subject.
pub const DISTRACTOR_SUBJECT: &str = "distractor";

/// Distance used when comparing embeddings. The squared form is the default
/// throughout; the unsquared variant exists for sensitivity studies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    #[default]
    SquaredEuclidean,
    Euclidean,
}

impl DistanceKind {
    pub(crate) fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let sq = sqdist(a, b);
        match self {
            DistanceKind::SquaredEuclidean => sq,
            DistanceKind::Euclidean => sq.sqrt(),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::SquaredEuclidean => "squared-euclidean",
            DistanceKind::Euclidean => "euclidean",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared-euclidean" | "squared" => Ok(DistanceKind::SquaredEuclidean),
            "euclidean" => Ok(DistanceKind::Euclidean),
            other => Err(format!(
                "unknown distance {other:?} (expected squared-euclidean or euclidean)"
            )),
        }
    }
}

pub(crate) fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Sum of squared coordinate differences.
pub fn squared_distance(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch {
            context: "squared_distance".to_string(),
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(sqdist(u.as_slice(), v.as_slice()))
}

/// Maps a distance to `exp(-delta)`: 1 exactly at zero distance, strictly
/// decreasing, always in (0, 1].
pub fn confidence(delta: f64) -> Result<f64> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::BadDistance { value: delta });
    }
    Ok((-delta).exp())
}

/// One gallery row: a unique id, the owning subject (or
/// [`DISTRACTOR_SUBJECT`]), the view it was taken from, and its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub gallery_id: String,
    pub subject_id: String,
    pub view: View,
    pub embedding: Embedding,
}

/// Immutable id -> embedding store over one embedding dimension.
#[derive(Debug, Clone)]
pub struct GalleryIndex {
    entries: Vec<GalleryEntry>,
    dim: usize,
}

impl GalleryIndex {
    /// Validates unique ids, one shared dimension, and finite values.
    pub fn build(entries: Vec<GalleryEntry>) -> Result<Self> {
        let dim = entries.first().map(|e| e.embedding.dim()).ok_or(Error::EmptyGallery)?;
        let mut index = GalleryIndex {
            entries: Vec::new(),
            dim,
        };
        let mut seen = BTreeSet::new();
        for entry in entries {
            index.check_entry(&entry, &mut seen)?;
            index.entries.push(entry);
        }
        Ok(index)
    }

    /// An empty index of known dimension; only reachable as a merge operand.
    pub fn empty(dim: usize) -> Self {
        GalleryIndex {
            entries: Vec::new(),
            dim,
        }
    }

    fn check_entry(&self, entry: &GalleryEntry, seen: &mut BTreeSet<String>) -> Result<()> {
        if entry.embedding.dim() != self.dim {
            return Err(Error::DimMismatch {
                context: format!("gallery entry {}", entry.gallery_id),
                expected: self.dim,
                found: entry.embedding.dim(),
            });
        }
        if !entry.embedding.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gallery entry {}", entry.gallery_id),
            });
        }
        if !seen.insert(entry.gallery_id.clone()) {
            return Err(Error::DuplicateGalleryId {
                id: entry.gallery_id.clone(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn get(&self, gallery_id: &str) -> Option<&GalleryEntry> {
        self.entries.iter().find(|e| e.gallery_id == gallery_id)
    }

    /// Exhaustive scan: distances to every entry, ascending sort with ties
    /// broken by gallery id, confidence attached, truncated to k.
    pub fn query(&self, query_id: &str, probe: &Embedding, k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::InvalidConfig {
                detail: "k must be at least 1".to_string(),
            });
        }
        if probe.dim() != self.dim {
            return Err(Error::DimMismatch {
                context: "query probe".to_string(),
                expected: self.dim,
                found: probe.dim(),
            });
        }
        if !probe.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "query probe".to_string(),
            });
        }
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (sqdist(probe.as_slice(), e.embedding.as_slice()), i))
            .collect();
        scored.sort_by(|(da, ia), (db, ib)| {
            da.total_cmp(db)
                .then_with(|| self.entries[*ia].gallery_id.cmp(&self.entries[*ib].gallery_id))
        });
        let items = scored
            .into_iter()
            .take(k)
            .map(|(distance, i)| {
                let entry = &self.entries[i];
                Ok(RankedItem {
                    gallery_id: entry.gallery_id.clone(),
                    subject_id: entry.subject_id.clone(),
                    distance,
                    confidence: confidence(distance)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RankedList {
            query_id: query_id.to_string(),
            k,
            items,
        })
    }
}

/// Union of two galleries with disjoint ids and matching dimensions.
pub fn merge_galleries(a: &GalleryIndex, b: &GalleryIndex) -> Result<GalleryIndex> {
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            context: "gallery merge".to_string(),
            expected: a.dim,
            found: b.dim,
        });
    }
    let mut merged = GalleryIndex {
        entries: Vec::with_capacity(a.len() + b.len()),
        dim: a.dim,
    };
    let ids_a: BTreeSet<&String> = a.entries.iter().map(|e| &e.gallery_id).collect();
    for entry in &b.entries {
        if ids_a.contains(&entry.gallery_id) {
            return Err(Error::IdCollision {
                id: entry.gallery_id.clone(),
            });
        }
    }
    merged.entries.extend(a.entries.iter().cloned());
    merged.entries.extend(b.entries.iter().cloned());
    Ok(merged)
}

/// One scored result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub gallery_id: String,
    pub subject_id: String,
    pub distance: f64,
    pub confidence: f64,
}

/// Query results ordered by ascending distance (descending confidence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub k: usize,
    pub items: Vec<RankedItem>,
}

impl RankedList {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec_pretty(self).map_err(|e| Error::Parse {
            path: "ranked-list".into(),
            message: e.to_string(),
        })
    }

    /// 1-based rank of a gallery id, if present in the truncated list.
    pub fn rank_of(&self, gallery_id: &str) -> Option<usize> {
        self.items
            .iter()
            .position(|item| item.gallery_id == gallery_id)
            .map(|p| p + 1)
    }
}

const GALLERY_HEADER_PREFIX: [&str; 3] = ["gallery_id", "subject_id", "view"];

/// Writes gallery/embedding rows as CSV `gallery_id,subject_id,view,e0,...`.
/// This is also the embedding export consumed by external visualization.
pub fn save_gallery_csv(entries: &[GalleryEntry], path: &Path) -> Result<()> {
    let dim = entries.first().map(|e| e.embedding.dim()).unwrap_or(0);
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::from_csv(path, e))?;
    let mut header: Vec<String> = GALLERY_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|i| format!("e{i}")));
    writer
        .write_record(&header)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    for entry in entries {
        let mut record = vec![
            entry.gallery_id.clone(),
            entry.subject_id.clone(),
            entry.view.to_string(),
        ];
        record.extend(entry.embedding.as_slice().iter().map(|v| v.to_string()));
        writer
            .write_record(&record)
            .map_err(|e| Error::parse(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads the gallery CSV format back into entries (unvalidated as an index;
/// pass through [`GalleryIndex::build`]).
pub fn load_gallery_csv(path: &Path) -> Result<Vec<GalleryEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::from_csv(path, e))?;
    let dim = {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 4 || cols[..3] != GALLERY_HEADER_PREFIX {
            return Err(Error::parse(
                path,
                "expected header gallery_id,subject_id,view,e0,...",
            ));
        }
        cols.len() - 3
    };
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let row = i + 2;
        if record.len() != dim + 3 {
            return Err(Error::DimMismatch {
                context: format!("{} row {row}", path.display()),
                expected: dim,
                found: record.len().saturating_sub(3),
            });
        }
        let view: View = record[2]
            .parse()
            .map_err(|e| Error::parse(path, format!("row {row}: {e}")))?;
        let mut values = Vec::with_capacity(dim);
        for field in record.iter().skip(3) {
            values.push(field.parse::<f64>().map_err(|_| {
                Error::parse(path, format!("row {row}: bad float {field:?}"))
            })?);
        }
        entries.push(GalleryEntry {
            gallery_id: record[0].to_string(),
            subject_id: record[1].to_string(),
            view,
            embedding: Embedding(values),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyGallery);
    }
    Ok(entries)
}
