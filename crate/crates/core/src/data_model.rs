//! Paired cross-domain catalog: subjects with face/skull images in two views,
//! exhaustive triplet enumeration, and seeded train/validation splits.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Image modality a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Face,
    Skull,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Face, Domain::Skull];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Face => "face",
            Domain::Skull => "skull",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "face" => Ok(Domain::Face),
            "skull" => Ok(Domain::Skull),
            other => Err(format!("unknown domain {other:?} (expected face or skull)")),
        }
    }
}

/// Capture angle of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Front,
    Side,
}

impl View {
    pub const ALL: [View; 2] = [View::Front, View::Side];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Side => "side",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "front" => Ok(View::Front),
            "side" => Ok(View::Side),
            other => Err(format!("unknown view {other:?} (expected front or side)")),
        }
    }
}

/// Front and side image references for one domain of one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViewPair {
    pub front: String,
    pub side: String,
}

impl ViewPair {
    pub fn get(&self, view: View) -> &str {
        match view {
            View::Front => &self.front,
            View::Side => &self.side,
        }
    }
}

/// One catalog subject: four image references (2 domains x 2 views).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub face: ViewPair,
    pub skull: ViewPair,
}

impl SubjectRecord {
    pub fn image_ref(&self, domain: Domain, view: View) -> &str {
        match domain {
            Domain::Face => self.face.get(view),
            Domain::Skull => self.skull.get(view),
        }
    }

    pub fn sample(&self, domain: Domain, view: View) -> Sample {
        Sample {
            subject_id: self.subject_id.clone(),
            domain,
            view,
            image_ref: self.image_ref(domain, view).to_string(),
        }
    }
}

/// A single (subject, domain, view) image reference. `image_ref` is a path
/// relative to the manifest directory or a feature-table key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    pub subject_id: String,
    pub domain: Domain,
    pub view: View,
    pub image_ref: String,
}

/// Lookup key shared with the feature table.
pub type SampleKey = (String, Domain, View);

impl Sample {
    pub fn key(&self) -> SampleKey {
        (self.subject_id.clone(), self.domain, self.view)
    }
}

/// Validated subject catalog. Every subject carries all four images.
#[derive(Debug, Clone)]
pub struct Manifest {
    subjects: Vec<SubjectRecord>,
    base_dir: PathBuf,
    content_hash: String,
}

/// How [`load_manifest`] treats image references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileCheck {
    /// Every reference must exist on disk relative to the manifest directory.
    Require,
    /// References may be feature-table keys resolved later.
    Allow,
}

impl Manifest {
    /// Validates subject records (non-empty catalog, unique ids) and freezes them.
    pub fn from_subjects(subjects: Vec<SubjectRecord>, base_dir: PathBuf) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::EmptyManifest);
        }
        let mut seen = BTreeSet::new();
        for record in &subjects {
            if !seen.insert(record.subject_id.clone()) {
                // A repeated subject id repeats all four of its samples; report the first.
                return Err(Error::DuplicateSample {
                    subject_id: record.subject_id.clone(),
                    domain: Domain::Face,
                    view: View::Front,
                });
            }
        }
        let content_hash = hash_subjects(&subjects);
        Ok(Manifest {
            subjects,
            base_dir,
            content_hash,
        })
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    /// Hex SHA-256 over the subject list; identifies the catalog in provenance records.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Absolute location of a sample's image file.
    pub fn image_path(&self, sample: &Sample) -> PathBuf {
        self.base_dir.join(&sample.image_ref)
    }

    /// All 4n samples in manifest order (subject, then face/skull, then front/side).
    pub fn samples(&self) -> Vec<Sample> {
        let mut out = Vec::with_capacity(self.subjects.len() * 4);
        for record in &self.subjects {
            for domain in Domain::ALL {
                for view in View::ALL {
                    out.push(record.sample(domain, view));
                }
            }
        }
        out
    }
}

fn hash_subjects(subjects: &[SubjectRecord]) -> String {
    let mut hasher = Sha256::new();
    for record in subjects {
        hasher.update(record.subject_id.as_bytes());
        hasher.update([0u8]);
        for domain in Domain::ALL {
            for view in View::ALL {
                hasher.update(record.image_ref(domain, view).as_bytes());
                hasher.update([0u8]);
            }
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Deserialize)]
struct RawSubject {
    subject_id: String,
    #[serde(default)]
    face: RawViewPair,
    #[serde(default)]
    skull: RawViewPair,
}

#[derive(Deserialize, Default)]
struct RawViewPair {
    front: Option<String>,
    side: Option<String>,
}

impl RawViewPair {
    fn get(&self, view: View) -> Option<&String> {
        match view {
            View::Front => self.front.as_ref(),
            View::Side => self.side.as_ref(),
        }
    }
}

/// Loads and validates a manifest file (JSON list of subjects).
///
/// With [`FileCheck::Require`] every referenced image must exist on disk;
/// with [`FileCheck::Allow`] references are kept as opaque keys for feature
/// tables that carry no image files.
pub fn load_manifest(path: &Path, check: FileCheck) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<RawSubject> =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;

    let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut subjects = Vec::with_capacity(raw.len());
    for r in &raw {
        for domain in Domain::ALL {
            let pair = match domain {
                Domain::Face => &r.face,
                Domain::Skull => &r.skull,
            };
            for view in View::ALL {
                match pair.get(view) {
                    Some(image_ref) if !image_ref.is_empty() => {
                        if check == FileCheck::Require {
                            let full = base_dir.join(image_ref);
                            if !full.is_file() {
                                return Err(Error::MissingFile { path: full });
                            }
                        }
                    }
                    _ => {
                        return Err(Error::IncompleteSubject {
                            subject_id: r.subject_id.clone(),
                            domain,
                            view,
                        })
                    }
                }
            }
        }
        subjects.push(SubjectRecord {
            subject_id: r.subject_id.clone(),
            face: ViewPair {
                front: r.face.front.clone().unwrap(),
                side: r.face.side.clone().unwrap(),
            },
            skull: ViewPair {
                front: r.skull.front.clone().unwrap(),
                side: r.skull.side.clone().unwrap(),
            },
        });
    }
    Manifest::from_subjects(subjects, base_dir)
}

/// Writes a manifest as the JSON list-of-subjects format.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(manifest.subjects())
        .map_err(|e| Error::parse(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Anchor (skull) with a same-identity positive face and a different-identity
/// negative face.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triplet {
    anchor: Sample,
    positive: Sample,
    negative: Sample,
}

impl Triplet {
    /// Checks the domain and identity constraints before construction.
    pub fn new(anchor: Sample, positive: Sample, negative: Sample) -> Result<Self> {
        if anchor.domain != Domain::Skull {
            return Err(Error::WrongDomain {
                expected: Domain::Skull,
                found: anchor.domain,
            });
        }
        for sample in [&positive, &negative] {
            if sample.domain != Domain::Face {
                return Err(Error::WrongDomain {
                    expected: Domain::Face,
                    found: sample.domain,
                });
            }
        }
        if anchor.subject_id != positive.subject_id {
            return Err(Error::InvalidTriplet {
                detail: format!(
                    "anchor subject {} differs from positive subject {}",
                    anchor.subject_id, positive.subject_id
                ),
            });
        }
        if anchor.subject_id == negative.subject_id {
            return Err(Error::InvalidTriplet {
                detail: format!("negative shares the anchor subject {}", anchor.subject_id),
            });
        }
        Ok(Triplet {
            anchor,
            positive,
            negative,
        })
    }

    pub fn anchor(&self) -> &Sample {
        &self.anchor
    }

    pub fn positive(&self) -> &Sample {
        &self.positive
    }

    pub fn negative(&self) -> &Sample {
        &self.negative
    }

    /// The five fields that identify a triplet (image refs excluded).
    pub fn id_tuple(&self) -> (String, View, View, String, View) {
        (
            self.anchor.subject_id.clone(),
            self.anchor.view,
            self.positive.view,
            self.negative.subject_id.clone(),
            self.negative.view,
        )
    }
}

/// How a triplet set came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationMode {
    Exhaustive,
    CsvImport,
}

impl fmt::Display for EnumerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnumerationMode::Exhaustive => "exhaustive",
            EnumerationMode::CsvImport => "csv-import",
        })
    }
}

/// Which manifest and enumeration produced a triplet set.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub manifest_hash: String,
    pub mode: EnumerationMode,
}

/// Ordered, duplicate-free collection of triplets.
#[derive(Debug, Clone)]
pub struct TripletSet {
    triplets: Vec<Triplet>,
    provenance: Provenance,
}

impl TripletSet {
    /// Wraps validated triplets, rejecting duplicates.
    pub fn new(triplets: Vec<Triplet>, provenance: Provenance) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &triplets {
            if !seen.insert(t.id_tuple()) {
                return Err(Error::InvalidTriplet {
                    detail: format!("duplicate triplet {:?}", t.id_tuple()),
                });
            }
        }
        Ok(TripletSet {
            triplets,
            provenance,
        })
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.triplets.iter()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Enumerates every valid triplet: per subject, all 4 anchor/positive view
/// combinations, each against both face views of every other subject.
///
/// The order is deterministic: subjects in manifest order, then anchor view,
/// positive view, negative subject (manifest order), negative view. A catalog
/// of n subjects yields 8*n*(n-1) triplets.
pub fn enumerate_triplets(manifest: &Manifest) -> Result<TripletSet> {
    let n = manifest.subject_count();
    if n < 2 {
        return Err(Error::InsufficientSubjects { found: n });
    }
    let subjects = manifest.subjects();
    let mut triplets = Vec::with_capacity(8 * n * (n - 1));
    for record in subjects {
        for anchor_view in View::ALL {
            for positive_view in View::ALL {
                for other in subjects {
                    if other.subject_id == record.subject_id {
                        continue;
                    }
                    for negative_view in View::ALL {
                        triplets.push(Triplet::new(
                            record.sample(Domain::Skull, anchor_view),
                            record.sample(Domain::Face, positive_view),
                            other.sample(Domain::Face, negative_view),
                        )?);
                    }
                }
            }
        }
    }
    Ok(TripletSet {
        triplets,
        provenance: Provenance {
            manifest_hash: manifest.content_hash().to_string(),
            mode: EnumerationMode::Exhaustive,
        },
    })
}

/// Floor of `fraction * len`, tolerating the binary representation error of
/// decimal fractions (0.7 * 12480 must give 8736, not 8735).
fn train_count(len: usize, fraction: f64) -> usize {
    ((fraction * len as f64) + 1e-9).floor() as usize
}

/// Seeded uniform shuffle; the first `floor(train_fraction * len)` triplets go
/// to the training set and the remainder to validation. The same subject may
/// appear on both sides.
pub fn split_triplets(
    set: &TripletSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(TripletSet, TripletSet)> {
    if set.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadSplitFraction {
            got: train_fraction,
        });
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = train_count(set.len(), train_fraction);
    let pick = |indices: &[usize]| TripletSet {
        triplets: indices.iter().map(|&i| set.triplets[i].clone()).collect(),
        provenance: set.provenance.clone(),
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Leakage-free variant: subjects are shuffled and partitioned by
/// `train_fraction`; a triplet lands in a side only when both its anchor and
/// negative subjects are on that side. Triplets crossing the boundary are
/// dropped, so the two sides do not cover the input.
pub fn split_triplets_subject_disjoint(
    set: &TripletSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(TripletSet, TripletSet)> {
    if set.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadSplitFraction {
            got: train_fraction,
        });
    }
    let mut subjects: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for t in set.iter() {
        for id in [&t.anchor.subject_id, &t.negative.subject_id] {
            if seen.insert(id.clone()) {
                subjects.push(id.clone());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let n_train = train_count(subjects.len(), train_fraction);
    let train_subjects: BTreeSet<&String> = subjects[..n_train].iter().collect();

    let mut train = Vec::new();
    let mut val = Vec::new();
    for t in set.iter() {
        let a = train_subjects.contains(&t.anchor.subject_id);
        let n = train_subjects.contains(&t.negative.subject_id);
        match (a, n) {
            (true, true) => train.push(t.clone()),
            (false, false) => val.push(t.clone()),
            _ => {}
        }
    }
    let wrap = |triplets| TripletSet {
        triplets,
        provenance: set.provenance.clone(),
    };
    Ok((wrap(train), wrap(val)))
}

const TRIPLET_HEADER: [&str; 5] = [
    "anchor_subject",
    "anchor_view",
    "positive_view",
    "negative_subject",
    "negative_view",
];

/// Writes a triplet set as CSV with the five identifying columns.
pub fn save_triplets_csv(set: &TripletSet, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::from_csv(path, e))?;
    writer
        .write_record(TRIPLET_HEADER)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    for t in set.iter() {
        writer
            .write_record([
                t.anchor.subject_id.as_str(),
                t.anchor.view.as_str(),
                t.positive.view.as_str(),
                t.negative.subject_id.as_str(),
                t.negative.view.as_str(),
            ])
            .map_err(|e| Error::parse(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads a triplet CSV back. Image references are not stored in the CSV, so
/// samples come back with empty refs; feature lookups key on
/// (subject, domain, view) and are unaffected.
pub fn load_triplets_csv(path: &Path) -> Result<TripletSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::from_csv(path, e))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != TRIPLET_HEADER {
            return Err(Error::parse(
                path,
                format!("unexpected triplet header {got:?}"),
            ));
        }
    }
    let parse_view = |s: &str, row: usize| -> Result<View> {
        s.parse()
            .map_err(|e| Error::parse(path, format!("row {row}: {e}")))
    };
    let mut triplets = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let row = i + 2; // 1-based, after header
        if record.len() != 5 {
            return Err(Error::parse(
                path,
                format!("row {row}: expected 5 fields, found {}", record.len()),
            ));
        }
        let anchor_subject = record[0].to_string();
        let anchor_view = parse_view(&record[1], row)?;
        let positive_view = parse_view(&record[2], row)?;
        let negative_subject = record[3].to_string();
        let negative_view = parse_view(&record[4], row)?;
        let triplet = Triplet::new(
            Sample {
                subject_id: anchor_subject.clone(),
                domain: Domain::Skull,
                view: anchor_view,
                image_ref: String::new(),
            },
            Sample {
                subject_id: anchor_subject,
                domain: Domain::Face,
                view: positive_view,
                image_ref: String::new(),
            },
            Sample {
                subject_id: negative_subject,
                domain: Domain::Face,
                view: negative_view,
                image_ref: String::new(),
            },
        )?;
        if !seen.insert(triplet.id_tuple()) {
            return Err(Error::InvalidTriplet {
                detail: format!("duplicate triplet at row {row}"),
            });
        }
        triplets.push(triplet);
    }
    if triplets.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    Ok(TripletSet {
        triplets,
        provenance: Provenance {
            manifest_hash: String::new(),
            mode: EnumerationMode::CsvImport,
        },
    })
}

#[cfg(test)]
pub(crate) fn test_manifest(n: usize) -> Manifest {
    let subjects = (0..n)
        .map(|i| {
            let sid = format!("S{:03}", i + 1);
            SubjectRecord {
                subject_id: sid.clone(),
                face: ViewPair {
                    front: format!("{sid}_face_front"),
                    side: format!("{sid}_face_side"),
                },
                skull: ViewPair {
                    front: format!("{sid}_skull_front"),
                    side: format!("{sid}_skull_side"),
                },
            }
        })
        .collect();
    Manifest::from_subjects(subjects, PathBuf::from(".")).unwrap()
}
