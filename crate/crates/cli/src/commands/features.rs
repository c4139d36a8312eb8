//! `features`: extract baseline features from catalog images, or validate a
//! precomputed feature table. One optional augmentation pass (seeded,
//! per-domain) runs before extraction.

use std::path::{Path, PathBuf};

use clap::Args;
use cranioface_core::{
    augment, extract_baseline, load_image, load_manifest, resize_bilinear, AugmentConfig, Domain,
    FeatureTable, FileCheck, BASELINE_IMAGE_SIZE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{pick, pick_switch, stage_seed, FileConfig, Stage};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Subject catalog; runs the baseline extractor over its images
    #[arg(long, conflicts_with = "precomputed")]
    pub manifest: Option<PathBuf>,
    /// Existing feature CSV to validate and re-emit canonically
    #[arg(long)]
    pub precomputed: Option<PathBuf>,
    /// Output feature CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Working resolution images are resized to before augmentation
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Apply one seeded augmentation pass before extraction
    #[arg(long)]
    pub augment: bool,
    /// Which domains to augment: skull, face, or both
    #[arg(long)]
    pub augment_domains: Option<String>,
    #[arg(long)]
    pub rotation_max_deg: Option<f64>,
    #[arg(long)]
    pub hflip_prob: Option<f64>,
    #[arg(long)]
    pub brightness_jitter: Option<f64>,
    #[arg(long)]
    pub contrast_jitter: Option<f64>,
    #[arg(long)]
    pub affine_translate_frac: Option<f64>,
    #[arg(long)]
    pub affine_scale_min: Option<f64>,
    #[arg(long)]
    pub affine_scale_max: Option<f64>,
    #[arg(long)]
    pub affine_shear_max_deg: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn augment_domains(spec: &str) -> CliResult<Vec<Domain>> {
    match spec {
        "skull" => Ok(vec![Domain::Skull]),
        "face" => Ok(vec![Domain::Face]),
        "both" => Ok(vec![Domain::Face, Domain::Skull]),
        other => Err(CliError::usage(
            "InvalidConfig",
            format!("--augment-domains must be skull, face, or both, got {other:?}"),
        )),
    }
}

pub fn run(args: FeaturesArgs) -> CliResult {
    let file = FileConfig::load(args.config.as_deref())?;
    match (&args.manifest, &args.precomputed) {
        (Some(manifest), None) => extract(&args, &file, manifest),
        (None, Some(table)) => passthrough(&args, table),
        _ => Err(CliError::usage(
            "InvalidConfig",
            "exactly one of --manifest or --precomputed is required",
        )),
    }
}

fn extract(args: &FeaturesArgs, file: &FileConfig, manifest_path: &Path) -> CliResult {
    let image_size = pick(args.image_size, file.image_size, BASELINE_IMAGE_SIZE);
    let do_augment = pick_switch(args.augment, file.augment, false);
    let domains_spec = args
        .augment_domains
        .clone()
        .or_else(|| file.augment_domains.clone())
        .unwrap_or_else(|| "both".to_string());
    let domains = augment_domains(&domains_spec)?;
    let defaults = AugmentConfig::default();
    let aug_cfg = AugmentConfig {
        rotation_max_deg: pick(args.rotation_max_deg, file.rotation_max_deg, defaults.rotation_max_deg),
        hflip_prob: pick(args.hflip_prob, file.hflip_prob, defaults.hflip_prob),
        brightness_jitter: pick(args.brightness_jitter, file.brightness_jitter, defaults.brightness_jitter),
        contrast_jitter: pick(args.contrast_jitter, file.contrast_jitter, defaults.contrast_jitter),
        affine_translate_frac: pick(
            args.affine_translate_frac,
            file.affine_translate_frac,
            defaults.affine_translate_frac,
        ),
        affine_scale_range: (
            pick(args.affine_scale_min, file.affine_scale_min, defaults.affine_scale_range.0),
            pick(args.affine_scale_max, file.affine_scale_max, defaults.affine_scale_range.1),
        ),
        affine_shear_max_deg: pick(
            args.affine_shear_max_deg,
            file.affine_shear_max_deg,
            defaults.affine_shear_max_deg,
        ),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(
        pick(args.seed, file.seed, 0),
        Stage::Augment,
    ));

    let manifest = load_manifest(manifest_path, FileCheck::Require)?;
    let mut table: Option<FeatureTable> = None;
    let mut failures = Vec::new();
    for sample in manifest.samples() {
        let path = manifest.image_path(&sample);
        let image = match load_image(&path) {
            Ok(img) => img,
            Err(e) => {
                failures.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let mut image = resize_bilinear(&image, image_size, image_size)?;
        if do_augment && domains.contains(&sample.domain) {
            image = augment(&image, &aug_cfg, &mut rng)?;
        }
        let vector = extract_baseline(&image);
        let table = table.get_or_insert_with(|| FeatureTable::new(vector.dim()));
        table.insert(sample.key(), vector)?;
    }
    if !failures.is_empty() {
        return Err(CliError::usage(
            "ImageLoadFailures",
            format!("{} image(s) failed to load: {}", failures.len(), failures.join("; ")),
        ));
    }
    let table = table.expect("manifest guarantees at least one subject");
    table.save(&args.out)?;
    println!(
        "extracted {} feature rows (dim {}) to {}",
        table.len(),
        table.dim(),
        args.out.display()
    );
    Ok(())
}

fn passthrough(args: &FeaturesArgs, table_path: &Path) -> CliResult {
    let table = FeatureTable::load(table_path)?;
    println!(
        "validated {} feature rows (dim {})",
        table.len(),
        table.dim()
    );
    table.save(&args.out)?;
    println!("wrote canonical table to {}", args.out.display());
    Ok(())
}
