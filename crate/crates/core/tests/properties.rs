//! Property tests for the invariants that hold across all inputs, not just
//! the hand-picked fixtures.

use std::collections::HashSet;
use std::path::PathBuf;

use proptest::prelude::*;

use cranioface_core::{
    augment, confidence, enumerate_triplets, split_triplets, squared_distance, triplet_loss,
    AugmentConfig, Domain, Embedding, GalleryEntry, GalleryIndex, ImageGray, Manifest,
    SubjectRecord, Triplet, View, ViewPair,
};

fn manifest_of(n: usize) -> Manifest {
    let subjects = (0..n)
        .map(|i| {
            let sid = format!("S{i:03}");
            SubjectRecord {
                subject_id: sid.clone(),
                face: ViewPair {
                    front: format!("{sid}a"),
                    side: format!("{sid}b"),
                },
                skull: ViewPair {
                    front: format!("{sid}c"),
                    side: format!("{sid}d"),
                },
            }
        })
        .collect();
    Manifest::from_subjects(subjects, PathBuf::from(".")).unwrap()
}

fn embedding(dim: usize) -> impl Strategy<Value = Embedding> {
    prop::collection::vec(-10.0..10.0f64, dim).prop_map(Embedding)
}

proptest! {
    #[test]
    fn split_partitions_whatever_the_fraction(
        n in 2usize..8,
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let set = enumerate_triplets(&manifest_of(n)).unwrap();
        let (train, val) = split_triplets(&set, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), set.len());
        let train_ids: HashSet<_> = train.iter().map(Triplet::id_tuple).collect();
        let val_ids: HashSet<_> = val.iter().map(Triplet::id_tuple).collect();
        prop_assert!(train_ids.is_disjoint(&val_ids));
        let all: HashSet<_> = set.iter().map(Triplet::id_tuple).collect();
        let union: HashSet<_> = train_ids.union(&val_ids).cloned().collect();
        prop_assert_eq!(union, all);
    }

    #[test]
    fn every_enumerated_triplet_satisfies_the_identity_constraints(n in 2usize..7) {
        let set = enumerate_triplets(&manifest_of(n)).unwrap();
        for t in set.iter() {
            prop_assert_eq!(t.anchor().domain, Domain::Skull);
            prop_assert_eq!(t.positive().domain, Domain::Face);
            prop_assert_eq!(t.negative().domain, Domain::Face);
            prop_assert_eq!(&t.anchor().subject_id, &t.positive().subject_id);
            prop_assert_ne!(&t.anchor().subject_id, &t.negative().subject_id);
        }
    }

    #[test]
    fn augmented_pixels_stay_in_unit_range(
        w in 2usize..10,
        h in 2usize..10,
        pixels in prop::collection::vec(0.0..=1.0f64, 100),
        rotation in 0.0..45.0f64,
        jitter in 0.0..0.5f64,
        seed in any::<u64>(),
    ) {
        let data: Vec<f64> = (0..w * h).map(|i| pixels[i % pixels.len()]).collect();
        let img = ImageGray::new(w, h, data).unwrap();
        let cfg = AugmentConfig {
            rotation_max_deg: rotation,
            hflip_prob: 0.5,
            brightness_jitter: jitter,
            contrast_jitter: jitter,
            affine_translate_frac: 0.1,
            affine_scale_range: (0.8, 1.2),
            affine_shear_max_deg: 10.0,
        };
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let out = augment(&img, &cfg, &mut rng).unwrap();
        prop_assert!(out.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }

    #[test]
    fn triplet_loss_is_nonnegative_and_margin_bounded_below(
        a in embedding(4),
        p in embedding(4),
        n in embedding(4),
        alpha in 1e-6..2.0f64,
    ) {
        let loss = triplet_loss(&a, &p, &n, alpha).unwrap();
        prop_assert!(loss >= 0.0);
        // Coincident positive and negative leave exactly the margin.
        let same = triplet_loss(&a, &p, &p, alpha).unwrap();
        prop_assert_eq!(same, alpha);
    }

    #[test]
    fn confidence_orders_like_distance(
        d1 in 0.0..100.0f64,
        d2 in 0.0..100.0f64,
    ) {
        let c1 = confidence(d1).unwrap();
        let c2 = confidence(d2).unwrap();
        prop_assert_eq!(d1 < d2, c1 > c2);
        prop_assert!(c1 > 0.0 && c1 <= 1.0);
    }

    #[test]
    fn query_ignores_gallery_entry_order(
        dim in 1usize..5,
        coords in prop::collection::vec(-5.0..5.0f64, 100),
        k in 1usize..12,
        rotate_by in 0usize..10,
    ) {
        let n = 10;
        let entries: Vec<GalleryEntry> = (0..n)
            .map(|i| GalleryEntry {
                gallery_id: format!("G{i:02}"),
                subject_id: format!("G{i:02}"),
                view: View::Front,
                embedding: Embedding((0..dim).map(|j| coords[(i * dim + j) % coords.len()]).collect()),
            })
            .collect();
        let probe = Embedding((0..dim).map(|j| coords[(90 + j) % coords.len()]).collect());
        let base = GalleryIndex::build(entries.clone()).unwrap();
        let mut rotated = entries;
        rotated.rotate_left(rotate_by);
        // Duplicate embeddings under different ids may exist; dedupe ids is
        // guaranteed by construction, so both builds succeed.
        let other = GalleryIndex::build(rotated).unwrap();
        let a = base.query("p", &probe, k).unwrap();
        let b = other.query("p", &probe, k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn squared_distance_is_a_symmetric_positive_form(
        u in embedding(6),
        v in embedding(6),
    ) {
        let duv = squared_distance(&u, &v).unwrap();
        let dvu = squared_distance(&v, &u).unwrap();
        prop_assert_eq!(duv, dvu);
        prop_assert!(duv >= 0.0);
        prop_assert_eq!(squared_distance(&u, &u).unwrap(), 0.0);
    }
}
