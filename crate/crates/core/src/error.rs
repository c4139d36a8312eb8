//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::data_model::{Domain, View};

/// Errors from catalog loading, image decoding, training, retrieval, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("manifest lists no subjects")]
    EmptyManifest,

    #[error("duplicate sample ({subject_id}, {domain}, {view})")]
    DuplicateSample {
        subject_id: String,
        domain: Domain,
        view: View,
    },

    #[error("subject {subject_id} is missing its {domain}/{view} image")]
    IncompleteSubject {
        subject_id: String,
        domain: Domain,
        view: View,
    },

    #[error("referenced image not found: {path}")]
    MissingFile { path: PathBuf },

    #[error("triplet enumeration needs at least 2 subjects, manifest has {found}")]
    InsufficientSubjects { found: usize },

    #[error("split fraction must lie strictly between 0 and 1, got {got}")]
    BadSplitFraction { got: f64 },

    #[error("triplet set is empty")]
    EmptyTripletSet,

    #[error("invalid triplet: {detail}")]
    InvalidTriplet { detail: String },

    #[error("unsupported image format for {path}: {detail}")]
    UnsupportedImage { path: PathBuf, detail: String },

    #[error("corrupt image {path}: {detail}")]
    CorruptImage { path: PathBuf, detail: String },

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("duplicate feature row ({subject_id}, {domain}, {view})")]
    DuplicateFeatureKey {
        subject_id: String,
        domain: Domain,
        view: View,
    },

    #[error("sample not found in feature table: ({subject_id}, {domain}, {view})")]
    UnresolvedSample {
        subject_id: String,
        domain: Domain,
        view: View,
    },

    #[error("expected a {expected} sample, got {found}")]
    WrongDomain { expected: Domain, found: Domain },

    #[error("identity initialization requires square dimensions, got {d_in}x{d_out}")]
    IdentityInitDims { d_in: usize, d_out: usize },

    #[error("checkpoint version {found} unsupported (expected {expected})")]
    BadVersion { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {detail}")]
    CorruptCheckpoint { detail: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}; aborting training")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("duplicate gallery id {id}")]
    DuplicateGalleryId { id: String },

    #[error("gallery id collision on merge: {id}")]
    IdCollision { id: String },

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("distance must be finite and non-negative, got {value}")]
    BadDistance { value: f64 },

    #[error("no relevance judgments for query {query_id}")]
    MissingJudgments { query_id: String },

    #[error("query {query_id} has an empty relevant set")]
    EmptyRelevantSet { query_id: String },

    #[error("judgments for query {query_id} reference unknown gallery id {id}")]
    UnknownRelevantId { query_id: String, id: String },
}

impl Error {
    /// Stable machine-readable code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
            Error::EmptyManifest => "EmptyManifest",
            Error::DuplicateSample { .. } => "DuplicateSample",
            Error::IncompleteSubject { .. } => "IncompleteSubject",
            Error::MissingFile { .. } => "MissingFile",
            Error::InsufficientSubjects { .. } => "InsufficientSubjects",
            Error::BadSplitFraction { .. } => "BadSplitFraction",
            Error::EmptyTripletSet => "EmptyTripletSet",
            Error::InvalidTriplet { .. } => "InvalidTriplet",
            Error::UnsupportedImage { .. } => "UnsupportedImage",
            Error::CorruptImage { .. } => "CorruptImage",
            Error::InvalidConfig { .. } => "InvalidConfig",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::DuplicateFeatureKey { .. } => "DuplicateFeatureKey",
            Error::UnresolvedSample { .. } => "UnresolvedSample",
            Error::WrongDomain { .. } => "WrongDomain",
            Error::IdentityInitDims { .. } => "IdentityInitDims",
            Error::BadVersion { .. } => "BadVersion",
            Error::CorruptCheckpoint { .. } => "CorruptCheckpoint",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::DuplicateGalleryId { .. } => "DuplicateGalleryId",
            Error::IdCollision { .. } => "IdCollision",
            Error::EmptyGallery => "EmptyGallery",
            Error::BadDistance { .. } => "BadDistance",
            Error::MissingJudgments { .. } => "MissingJudgments",
            Error::EmptyRelevantSet { .. } => "EmptyRelevantSet",
            Error::UnknownRelevantId { .. } => "UnknownRelevantId",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// csv wraps io failures; unwrap them so missing files report as Io.
    pub(crate) fn from_csv(path: impl Into<PathBuf>, e: csv::Error) -> Self {
        let message = e.to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.into(),
                source,
            },
            _ => Error::Parse {
                path: path.into(),
                message,
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
