//! Cross-domain identity retrieval at desk scale.
//!
//! Learns an identity-preserving projection of skull X-ray features into a
//! frozen face-feature space with a triplet-margin objective, then ranks a
//! face gallery for each skull probe by the confidence score `exp(-distance)`.
//!
//! The pipeline runs in file-separated stages:
//!
//! 1. [`data_model`] — subject catalog, exhaustive triplet enumeration,
//!    seeded train/validation splits.
//! 2. [`imaging`] / [`features`] — grayscale canonicalization, augmentations,
//!    and frozen feature vectors (built-in block-statistics extractor or
//!    precomputed tables from external backbones).
//! 3. [`model`] / [`training`] — the trainable skull head and its triplet-loss
//!    optimization with analytic gradients.
//! 4. [`retrieval`] / [`metrics`] — gallery indexing, confidence-ranked top-k
//!    search, and Recall/mAP/MRR sweeps.
//! 5. [`synth`] — a seeded linear-latent generator providing ground-truth
//!    recoverable data for end-to-end testing.

pub mod data_model;
pub mod error;
pub mod features;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod retrieval;
pub mod synth;
pub mod training;

pub use data_model::{
    enumerate_triplets, load_manifest, load_triplets_csv, save_manifest, save_triplets_csv,
    split_triplets, split_triplets_subject_disjoint, Domain, EnumerationMode, FileCheck, Manifest,
    Provenance, Sample, SampleKey, SubjectRecord, Triplet, TripletSet, View, ViewPair,
};
pub use error::{Error, Result};
pub use features::{
    extract_baseline, FeatureOrigin, FeatureTable, FeatureVector, BASELINE_DIM,
    BASELINE_IMAGE_SIZE,
};
pub use imaging::{augment, load_image, resize_bilinear, write_pgm, AugmentConfig, ImageGray};
pub use metrics::{
    average_precision_at_k, evaluate, mrr_at_k, recall_at_k, MetricsReport, RelevanceJudgments,
};
pub use model::{
    forward, init_head, init_head_with_hidden, load_checkpoint, save_checkpoint, Embedding,
    ModelCheckpoint, ProjectionHead,
};
pub use retrieval::{
    confidence, load_gallery_csv, merge_galleries, save_gallery_csv, squared_distance,
    DistanceKind, GalleryEntry, GalleryIndex, RankedItem, RankedList, DISTRACTOR_SUBJECT,
};
pub use synth::{generate, SynthConfig};
pub use training::{
    loss_gradient, train, triplet_accuracy, triplet_accuracy_with_margin, triplet_loss,
    triplet_loss_with, HeadGradients, TrainConfig, TrainReport,
};
