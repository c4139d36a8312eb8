//! `train`: optimize the skull head with the triplet hinge and write the
//! checkpoint plus the per-epoch report.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use cranioface_core::{
    init_head, init_head_with_hidden, load_triplets_csv, train, DistanceKind, FeatureTable,
    TrainConfig,
};

use crate::config::{pick, pick_switch, stage_seed, FileConfig, Stage};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training triplet CSV
    #[arg(long)]
    pub triplets: PathBuf,
    /// Held-out triplet CSV for the final validation accuracy
    #[arg(long)]
    pub val_triplets: Option<PathBuf>,
    /// Feature CSV covering every referenced sample
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Per-epoch CSV (epoch,mean_loss,train_accuracy)
    #[arg(long)]
    pub out_report: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Visit triplets in CSV order instead of reshuffling each epoch
    #[arg(long)]
    pub no_shuffle: bool,
    /// squared-euclidean (default) or euclidean
    #[arg(long)]
    pub distance: Option<String>,
    /// Insert a ReLU hidden layer of this width
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Start from the identity map instead of a seeded Gaussian
    #[arg(long)]
    pub identity_init: bool,
    /// L2-normalize head outputs
    #[arg(long)]
    pub normalize_output: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: TrainArgs) -> CliResult {
    let file = FileConfig::load(args.config.as_deref())?;
    let defaults = TrainConfig::default();
    let global_seed = pick(args.seed, file.seed, 0);
    let distance_spec = args
        .distance
        .clone()
        .or_else(|| file.distance.clone())
        .unwrap_or_else(|| "squared-euclidean".to_string());
    let distance: DistanceKind = distance_spec
        .parse()
        .map_err(|e: String| CliError::usage("InvalidConfig", e))?;
    let cfg = TrainConfig {
        alpha: pick(args.alpha, file.alpha, defaults.alpha),
        learning_rate: pick(args.learning_rate, file.learning_rate, defaults.learning_rate),
        epochs: pick(args.epochs, file.epochs, defaults.epochs),
        batch_size: pick(args.batch_size, file.batch_size, defaults.batch_size),
        seed: stage_seed(global_seed, Stage::Train),
        shuffle: !pick_switch(args.no_shuffle, file.shuffle.map(|s| !s), false),
        distance,
    };

    let train_set = load_triplets_csv(&args.triplets)?;
    let val_set = args
        .val_triplets
        .as_deref()
        .map(load_triplets_csv)
        .transpose()?;
    let features = FeatureTable::load(&args.features)?;
    let dim = features.dim();

    // The frozen face branch fixes the embedding dimension, so the head maps
    // the feature space onto itself (optionally through a hidden layer).
    let identity_init = pick_switch(args.identity_init, file.identity_init, false);
    let hidden_dim = args.hidden_dim.or(file.hidden_dim);
    let mut head = match (identity_init, hidden_dim) {
        (true, Some(_)) => {
            return Err(CliError::usage(
                "InvalidConfig",
                "--identity-init cannot be combined with --hidden-dim",
            ))
        }
        (true, None) => init_head(dim, dim, 0, true)?,
        (false, Some(h)) => init_head_with_hidden(dim, h, dim, stage_seed(global_seed, Stage::HeadInit))?,
        (false, None) => init_head(dim, dim, stage_seed(global_seed, Stage::HeadInit), false)?,
    };
    head.normalize_output = pick_switch(args.normalize_output, file.normalize_output, false);

    println!(
        "training on {} triplets (dim {}, alpha {}, lr {}, {} epochs, batch {})",
        train_set.len(),
        dim,
        cfg.alpha,
        cfg.learning_rate,
        cfg.epochs,
        cfg.batch_size
    );
    let (checkpoint, report) = train(&cfg, &train_set, val_set.as_ref(), &features, head)?;

    let bytes = checkpoint.to_bytes()?;
    fs::write(&args.out_checkpoint, bytes).map_err(|e| CliError::write(&args.out_checkpoint, e))?;
    report.write_csv(&args.out_report)?;

    let last_loss = report.epoch_mean_loss.last().copied().unwrap_or(f64::NAN);
    let last_acc = report.epoch_train_accuracy.last().copied().unwrap_or(f64::NAN);
    println!(
        "finished in {:.2}s: mean loss {last_loss:.6}, train accuracy {last_acc:.4}",
        report.wall_time_secs
    );
    if let Some(val_acc) = report.final_val_accuracy {
        println!("validation accuracy {val_acc:.4}");
    }
    println!("checkpoint: {}", args.out_checkpoint.display());
    Ok(())
}
