//! `query`: rank a gallery for one probe embedding.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use cranioface_core::{load_gallery_csv, Embedding, GalleryIndex};

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Gallery CSV to search
    #[arg(long)]
    pub gallery: PathBuf,
    /// Probe id looked up in --queries (or in the gallery itself)
    #[arg(long, conflicts_with = "probe_vec")]
    pub probe_id: Option<String>,
    /// Inline probe vector: comma-separated floats
    #[arg(long)]
    pub probe_vec: Option<String>,
    /// Embedding CSV holding candidate probes (defaults to the gallery)
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Write the ranked JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also print a human-readable table
    #[arg(long)]
    pub table: bool,
}

pub fn run(args: QueryArgs) -> CliResult {
    let index = GalleryIndex::build(load_gallery_csv(&args.gallery)?)?;
    let (query_id, probe) = resolve_probe(&args, &index)?;
    let ranked = index.query(&query_id, &probe, args.k)?;

    let json = ranked.to_json_bytes()?;
    match &args.out {
        Some(path) => fs::write(path, &json).map_err(|e| CliError::write(path, e))?,
        None => println!("{}", String::from_utf8_lossy(&json)),
    }
    if args.table {
        println!("{:<5} {:<24} {:<16} {:>14} {:>12}", "rank", "gallery_id", "subject", "distance", "confidence");
        for (i, item) in ranked.items.iter().enumerate() {
            println!(
                "{:<5} {:<24} {:<16} {:>14.6} {:>12.6}",
                i + 1,
                item.gallery_id,
                item.subject_id,
                item.distance,
                item.confidence
            );
        }
    }
    Ok(())
}

fn resolve_probe(args: &QueryArgs, index: &GalleryIndex) -> CliResult<(String, Embedding)> {
    if let Some(spec) = &args.probe_vec {
        let values = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::usage("Parse", format!("bad --probe-vec: {e}")))?;
        return Ok(("probe".to_string(), Embedding(values)));
    }
    let Some(probe_id) = &args.probe_id else {
        return Err(CliError::usage(
            "InvalidConfig",
            "one of --probe-id or --probe-vec is required",
        ));
    };
    let embedding = match &args.queries {
        Some(path) => load_gallery_csv(path)?
            .into_iter()
            .find(|e| &e.gallery_id == probe_id)
            .map(|e| e.embedding),
        None => index.get(probe_id).map(|e| e.embedding.clone()),
    };
    embedding.map(|e| (probe_id.clone(), e)).ok_or_else(|| {
        CliError::usage("UnknownProbe", format!("probe id {probe_id:?} not found"))
    })
}
