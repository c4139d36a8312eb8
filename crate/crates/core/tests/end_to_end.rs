//! Library-level pipeline: synthetic catalog -> triplets -> training ->
//! gallery retrieval -> metrics, at a scale small enough for routine runs.

use cranioface_core::{
    enumerate_triplets, evaluate, generate, init_head, merge_galleries, split_triplets, train,
    Domain, Embedding, GalleryEntry, GalleryIndex, RelevanceJudgments, SynthConfig, TrainConfig,
    View, DISTRACTOR_SUBJECT,
};

fn face_gallery(
    manifest: &cranioface_core::Manifest,
    table: &cranioface_core::FeatureTable,
    views: &[View],
) -> GalleryIndex {
    let entries: Vec<GalleryEntry> = manifest
        .subjects()
        .iter()
        .flat_map(|record| {
            views.iter().map(|&view| {
                let feat = table
                    .feature(&record.subject_id, Domain::Face, view)
                    .unwrap();
                GalleryEntry {
                    gallery_id: format!("{}_face_{view}", record.subject_id),
                    subject_id: record.subject_id.clone(),
                    view,
                    embedding: Embedding(feat.values.clone()),
                }
            })
        })
        .collect();
    GalleryIndex::build(entries).unwrap()
}

fn skull_queries(
    manifest: &cranioface_core::Manifest,
    table: &cranioface_core::FeatureTable,
    head: &cranioface_core::ProjectionHead,
) -> Vec<(String, String, Embedding)> {
    manifest
        .subjects()
        .iter()
        .flat_map(|record| {
            View::ALL.into_iter().map(|view| {
                let feat = table
                    .feature(&record.subject_id, Domain::Skull, view)
                    .unwrap();
                (
                    format!("{}_skull_{view}", record.subject_id),
                    record.subject_id.clone(),
                    Embedding(head.forward_slice(&feat.values).unwrap()),
                )
            })
        })
        .collect()
}

#[test]
fn synthetic_pipeline_learns_the_alignment() {
    let synth_cfg = SynthConfig {
        num_subjects: 16,
        latent_dim: 8,
        feature_dim: 32,
        noise_sigma: 0.05,
        seed: 3,
    };
    let (manifest, table) = generate(&synth_cfg).unwrap();
    let set = enumerate_triplets(&manifest).unwrap();
    assert_eq!(set.len(), 8 * 16 * 15);
    let (train_set, val_set) = split_triplets(&set, 0.7, 4).unwrap();

    let head = init_head(32, 32, 5, false).unwrap();
    let cfg = TrainConfig {
        epochs: 60,
        seed: 6,
        ..TrainConfig::default()
    };
    let frozen_before = table
        .feature("S001", Domain::Face, View::Front)
        .unwrap()
        .clone();
    let (ckpt, report) = train(&cfg, &train_set, Some(&val_set), &table, head).unwrap();
    let trained = ckpt.to_head().unwrap();
    // The face branch is frozen: training must not touch the feature table.
    assert_eq!(
        table.feature("S001", Domain::Face, View::Front).unwrap(),
        &frozen_before
    );

    let val_acc = report.final_val_accuracy.unwrap();
    assert!(val_acc >= 0.9, "validation accuracy {val_acc}");
    assert!(
        report.epoch_train_accuracy.last().unwrap() > &0.9,
        "train accuracy {:?}",
        report.epoch_train_accuracy.last()
    );

    // Retrieval over the front-view face gallery with every skull as a probe.
    let gallery = face_gallery(&manifest, &table, &[View::Front]);
    let queries = skull_queries(&manifest, &table, &trained);
    let judgments = RelevanceJudgments::subject_match(
        &queries
            .iter()
            .map(|(q, s, _)| (q.clone(), s.clone()))
            .collect::<Vec<_>>(),
        &gallery,
    )
    .unwrap();
    let probes: Vec<(String, Embedding)> = queries
        .iter()
        .map(|(q, _, e)| (q.clone(), e.clone()))
        .collect();
    let report = evaluate(&gallery, &probes, &judgments, 10).unwrap();
    assert!(report.recall_at[&1] >= 0.9, "recall@1 {}", report.recall_at[&1]);

    // Distractors can only push true matches down.
    let distractors = GalleryIndex::build(
        (0..64)
            .map(|i| GalleryEntry {
                gallery_id: format!("D{i:03}"),
                subject_id: DISTRACTOR_SUBJECT.to_string(),
                view: View::Front,
                embedding: Embedding(
                    (0..32).map(|j| ((i * 37 + j * 11) % 97) as f64 / 97.0).collect(),
                ),
            })
            .collect(),
    )
    .unwrap();
    let mixed = merge_galleries(&gallery, &distractors).unwrap();
    let mixed_report = evaluate(&mixed, &probes, &judgments, 10).unwrap();
    for k in 1..=10 {
        assert!(mixed_report.recall_at[&k] <= report.recall_at[&k] + 1e-15);
    }
}

#[test]
fn untrained_identity_head_ranks_poorly_on_rotated_features() {
    // The skull mixing matrix differs from the face one, so without training
    // the identity map should not solve retrieval; this guards against the
    // synthetic task being trivial.
    let (manifest, table) = generate(&SynthConfig {
        num_subjects: 16,
        latent_dim: 8,
        feature_dim: 32,
        noise_sigma: 0.0,
        seed: 3,
    })
    .unwrap();
    let head = init_head(32, 32, 0, true).unwrap();
    let gallery = face_gallery(&manifest, &table, &[View::Front]);
    let queries = skull_queries(&manifest, &table, &head);
    let judgments = RelevanceJudgments::subject_match(
        &queries
            .iter()
            .map(|(q, s, _)| (q.clone(), s.clone()))
            .collect::<Vec<_>>(),
        &gallery,
    )
    .unwrap();
    let probes: Vec<(String, Embedding)> = queries
        .iter()
        .map(|(q, _, e)| (q.clone(), e.clone()))
        .collect();
    let report = evaluate(&gallery, &probes, &judgments, 5).unwrap();
    assert!(
        report.recall_at[&1] < 0.5,
        "identity head unexpectedly solves retrieval: {}",
        report.recall_at[&1]
    );
}
