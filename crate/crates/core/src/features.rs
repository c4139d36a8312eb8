//! Frozen-branch feature vectors: a deterministic block-statistics extractor
//! and an ingestion path for precomputed features from external backbones.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data_model::{Domain, Sample, SampleKey, View};
use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, ImageGray};

/// Resolution the baseline extractor operates at.
pub const BASELINE_IMAGE_SIZE: usize = 64;
/// Blocks per axis in the baseline extractor grid.
pub const BASELINE_GRID: usize = 8;
/// Output dimension of the baseline extractor (mean + std per block).
pub const BASELINE_DIM: usize = 2 * BASELINE_GRID * BASELINE_GRID;

/// Where a feature vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureOrigin {
    Baseline,
    Precomputed,
}

/// Fixed-length real vector produced by a frozen extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source: FeatureOrigin,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Immutable map from (subject, domain, view) to a feature vector. All rows
/// share one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: BTreeMap<SampleKey, FeatureVector>,
    dim: usize,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        FeatureTable {
            rows: BTreeMap::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, key: SampleKey, vector: FeatureVector) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimMismatch {
                context: format!("feature row ({}, {}, {})", key.0, key.1, key.2),
                expected: self.dim,
                found: vector.dim(),
            });
        }
        if !vector.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("feature row ({}, {}, {})", key.0, key.1, key.2),
            });
        }
        if self.rows.contains_key(&key) {
            return Err(Error::DuplicateFeatureKey {
                subject_id: key.0,
                domain: key.1,
                view: key.2,
            });
        }
        self.rows.insert(key, vector);
        Ok(())
    }

    pub fn get(&self, key: &SampleKey) -> Option<&FeatureVector> {
        self.rows.get(key)
    }

    /// Feature vector for a (subject, domain, view), or an unresolved-sample error.
    pub fn feature(&self, subject_id: &str, domain: Domain, view: View) -> Result<&FeatureVector> {
        self.rows
            .get(&(subject_id.to_string(), domain, view))
            .ok_or_else(|| Error::UnresolvedSample {
                subject_id: subject_id.to_string(),
                domain,
                view,
            })
    }

    /// The frozen face branch: returns the stored feature vector unchanged.
    pub fn face_embedding(&self, sample: &Sample) -> Result<&FeatureVector> {
        if sample.domain != Domain::Face {
            return Err(Error::WrongDomain {
                expected: Domain::Face,
                found: sample.domain,
            });
        }
        self.feature(&sample.subject_id, sample.domain, sample.view)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SampleKey, &FeatureVector)> {
        self.rows.iter()
    }

    /// Writes the CSV format `subject_id,domain,view,f0,...` in key order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| Error::from_csv(path, e))?;
        let mut header = vec![
            "subject_id".to_string(),
            "domain".to_string(),
            "view".to_string(),
        ];
        header.extend((0..self.dim).map(|i| format!("f{i}")));
        writer
            .write_record(&header)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        for ((subject_id, domain, view), vector) in &self.rows {
            let mut record = vec![subject_id.clone(), domain.to_string(), view.to_string()];
            record.extend(vector.values.iter().map(|v| v.to_string()));
            writer
                .write_record(&record)
                .map_err(|e| Error::parse(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads and validates a feature CSV: consistent dimension, unique keys,
    /// finite values.
    pub fn load(path: &Path) -> Result<Self> {
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
            if cols.len() < 4 || cols[0] != "subject_id" || cols[1] != "domain" || cols[2] != "view"
            {
                return Err(Error::parse(
                    path,
                    "expected header subject_id,domain,view,f0,...",
                ));
            }
            cols.len() - 3
        };
        let mut table = FeatureTable::new(dim);
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
            let subject_id = record[0].to_string();
            let domain: Domain = record[1]
                .parse()
                .map_err(|e| Error::parse(path, format!("row {row}: {e}")))?;
            let view: View = record[2]
                .parse()
                .map_err(|e| Error::parse(path, format!("row {row}: {e}")))?;
            let mut values = Vec::with_capacity(dim);
            for field in record.iter().skip(3) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(path, format!("row {row}: bad float {field:?}")))?;
                values.push(v);
            }
            table.insert(
                (subject_id, domain, view),
                FeatureVector {
                    values,
                    source: FeatureOrigin::Precomputed,
                },
            )?;
        }
        if table.is_empty() {
            return Err(Error::parse(path, "feature table has no rows"));
        }
        Ok(table)
    }
}

/// Deterministic stand-in for a frozen backbone: partitions the 64x64 image
/// into an 8x8 grid of 8x8 blocks, emits per-block mean and standard
/// deviation (population), then L2-normalizes the 128-vector. The all-zero
/// image maps to the zero vector.
pub fn extract_baseline(img: &ImageGray) -> FeatureVector {
    let canonical;
    let img = if img.width() == BASELINE_IMAGE_SIZE && img.height() == BASELINE_IMAGE_SIZE {
        img
    } else {
        canonical = resize_bilinear(img, BASELINE_IMAGE_SIZE, BASELINE_IMAGE_SIZE)
            .expect("canonical size is positive");
        &canonical
    };
    let block = BASELINE_IMAGE_SIZE / BASELINE_GRID;
    let count = (block * block) as f64;
    let mut values = vec![0.0; BASELINE_DIM];
    for by in 0..BASELINE_GRID {
        for bx in 0..BASELINE_GRID {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for y in by * block..(by + 1) * block {
                for x in bx * block..(bx + 1) * block {
                    let v = img.get(x, y);
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let mean = sum / count;
            let variance = (sum_sq / count - mean * mean).max(0.0);
            values[by * BASELINE_GRID + bx] = mean;
            values[BASELINE_GRID * BASELINE_GRID + by * BASELINE_GRID + bx] = variance.sqrt();
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    FeatureVector {
        values,
        source: FeatureOrigin::Baseline,
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Straightforward re-implementation: two-pass mean/std per block, then
    /// normalize. Checks the production extractor against an independent path.
    fn oracle_baseline(img: &ImageGray) -> Vec<f64> {
        assert_eq!(img.width(), 64);
        assert_eq!(img.height(), 64);
        let mut values = vec![0.0; 128];
        for by in 0..8 {
            for bx in 0..8 {
                let mut pixels = Vec::new();
                for y in by * 8..(by + 1) * 8 {
                    for x in bx * 8..(bx + 1) * 8 {
                        pixels.push(img.get(x, y));
                    }
                }
                let mean = pixels.iter().sum::<f64>() / 64.0;
                let var = pixels.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 64.0;
                values[by * 8 + bx] = mean;
                values[64 + by * 8 + bx] = var.sqrt();
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        values
    }

    #[test]
    fn constant_image_gives_uniform_mean_slots() {
        let img = ImageGray::constant(64, 64, 0.37).unwrap();
        let feat = extract_baseline(&img);
        // All 64 means equal c, stds 0; after normalization each mean slot is 1/8.
        for i in 0..64 {
            assert!((feat.values[i] - 0.125).abs() < 1e-12);
            assert_eq!(feat.values[64 + i], 0.0);
        }
    }

    #[test]
    fn zero_image_maps_to_zero_vector() {
        let img = ImageGray::constant(64, 64, 0.0).unwrap();
        let feat = extract_baseline(&img);
        assert!(feat.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_independent_block_statistics_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let data: Vec<f64> = (0..64 * 64).map(|_| rng.random::<f64>()).collect();
            let img = ImageGray::new(64, 64, data).unwrap();
            let feat = extract_baseline(&img);
            let expected = oracle_baseline(&img);
            for (a, b) in feat.values.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn output_is_unit_norm_for_nonzero_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..200 {
            let data: Vec<f64> = (0..64 * 64).map(|_| rng.random::<f64>()).collect();
            let img = ImageGray::new(64, 64, data).unwrap();
            let feat = extract_baseline(&img);
            let norm = feat.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let data: Vec<f64> = (0..64 * 64).map(|_| rng.random::<f64>()).collect();
        let img = ImageGray::new(64, 64, data).unwrap();
        let a = extract_baseline(&img);
        let b = extract_baseline(&img);
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn resizes_noncanonical_inputs() {
        let img = ImageGray::constant(100, 30, 0.5).unwrap();
        let feat = extract_baseline(&img);
        assert_eq!(feat.dim(), 128);
        assert!((feat.values[0] - 0.125).abs() < 1e-12);
    }

    fn sample_table(dim: usize) -> FeatureTable {
        let mut table = FeatureTable::new(dim);
        for (i, sid) in ["S01", "S02"].iter().enumerate() {
            for domain in Domain::ALL {
                for view in View::ALL {
                    let values = (0..dim).map(|j| (i * 100 + j) as f64 * 0.01).collect();
                    table
                        .insert(
                            (sid.to_string(), domain, view),
                            FeatureVector {
                                values,
                                source: FeatureOrigin::Precomputed,
                            },
                        )
                        .unwrap();
                }
            }
        }
        table
    }

    #[test]
    fn table_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let table = sample_table(6);
        table.save(&path).unwrap();
        let loaded = FeatureTable::load(&path).unwrap();
        assert_eq!(loaded.dim(), 6);
        assert_eq!(loaded.len(), table.len());
        for (key, vector) in table.iter() {
            assert_eq!(loaded.get(key).unwrap().values, vector.values);
        }
    }

    #[test]
    fn load_validates_backbone_scale_tables() {
        // 40 subjects x 2 views per domain at a typical backbone width:
        // 80 face + 80 skull rows of dim 512.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let mut table = FeatureTable::new(512);
        for i in 0..40 {
            for domain in Domain::ALL {
                for view in View::ALL {
                    table
                        .insert(
                            (format!("S{i:03}"), domain, view),
                            FeatureVector {
                                values: vec![i as f64 * 0.25; 512],
                                source: FeatureOrigin::Precomputed,
                            },
                        )
                        .unwrap();
                }
            }
        }
        table.save(&path).unwrap();
        let loaded = FeatureTable::load(&path).unwrap();
        assert_eq!(loaded.len(), 160);
        assert_eq!(loaded.dim(), 512);
    }

    #[test]
    fn load_rejects_dim_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "subject_id,domain,view,f0,f1\nS01,face,front,1.0,2.0\nS01,face,side,1.0\n",
        )
        .unwrap();
        assert!(matches!(
            FeatureTable::load(&path).unwrap_err(),
            Error::DimMismatch { .. }
        ));
    }

    #[test]
    fn load_rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "subject_id,domain,view,f0\nS01,face,front,NaN\n",
        )
        .unwrap();
        assert!(matches!(
            FeatureTable::load(&path).unwrap_err(),
            Error::NonFinite { .. }
        ));
    }

    #[test]
    fn load_rejects_duplicate_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "subject_id,domain,view,f0\nS01,face,front,1.0\nS01,face,front,2.0\n",
        )
        .unwrap();
        assert!(matches!(
            FeatureTable::load(&path).unwrap_err(),
            Error::DuplicateFeatureKey { .. }
        ));
    }

    #[test]
    fn face_embedding_returns_stored_row() {
        let table = sample_table(4);
        let sample = Sample {
            subject_id: "S01".to_string(),
            domain: Domain::Face,
            view: View::Front,
            image_ref: String::new(),
        };
        let a = table.face_embedding(&sample).unwrap();
        let b = table.face_embedding(&sample).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(
            a.values,
            table
                .feature("S01", Domain::Face, View::Front)
                .unwrap()
                .values
        );
    }

    #[test]
    fn face_embedding_rejects_skull_samples() {
        let table = sample_table(4);
        let sample = Sample {
            subject_id: "S01".to_string(),
            domain: Domain::Skull,
            view: View::Front,
            image_ref: String::new(),
        };
        assert!(matches!(
            table.face_embedding(&sample).unwrap_err(),
            Error::WrongDomain { .. }
        ));
    }

    #[test]
    fn missing_row_is_unresolved() {
        let table = sample_table(4);
        assert!(matches!(
            table.feature("S99", Domain::Face, View::Front).unwrap_err(),
            Error::UnresolvedSample { .. }
        ));
    }
}
