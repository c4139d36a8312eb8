//! `triplets`: enumerate all anchor/positive/negative combinations and split
//! them into train/validation CSVs.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use cranioface_core::{
    enumerate_triplets, load_manifest, save_triplets_csv, split_triplets,
    split_triplets_subject_disjoint, FileCheck,
};

use crate::config::{pick, pick_switch, stage_seed, FileConfig, Stage};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct TripletsArgs {
    /// Subject catalog (JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory receiving triplets_train.csv and triplets_val.csv
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Keep train and validation subjects disjoint (drops boundary triplets)
    #[arg(long)]
    pub subject_disjoint: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: TripletsArgs) -> CliResult {
    let file = FileConfig::load(args.config.as_deref())?;
    let fraction = pick(args.split_fraction, file.split_fraction, 0.7);
    let seed = stage_seed(pick(args.seed, file.seed, 0), Stage::Split);
    let subject_disjoint = pick_switch(args.subject_disjoint, file.subject_disjoint, false);

    let manifest = load_manifest(&args.manifest, FileCheck::Allow)?;
    let set = enumerate_triplets(&manifest)?;
    let (train, val) = if subject_disjoint {
        split_triplets_subject_disjoint(&set, fraction, seed)?
    } else {
        split_triplets(&set, fraction, seed)?
    };

    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::write(&args.out_dir, e))?;
    save_triplets_csv(&train, &args.out_dir.join("triplets_train.csv"))?;
    save_triplets_csv(&val, &args.out_dir.join("triplets_val.csv"))?;
    println!("{} triplets ({} train / {} val)", set.len(), train.len(), val.len());
    Ok(())
}
