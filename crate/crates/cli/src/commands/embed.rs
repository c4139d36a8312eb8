//! `embed`: export embeddings for gallery construction and external
//! visualization. Skull rows pass through the trained head; face rows stay
//! frozen feature vectors.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use cranioface_core::{
    load_checkpoint, save_gallery_csv, Domain, Embedding, FeatureTable, GalleryEntry, View,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Trained head checkpoint (JSON)
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Feature CSV to embed
    #[arg(long)]
    pub features: PathBuf,
    /// face, skull, or all
    #[arg(long, default_value = "all")]
    pub domain: String,
    /// front, side, or both
    #[arg(long, default_value = "both")]
    pub views: String,
    /// Output gallery CSV (gallery_id,subject_id,view,e0,...)
    #[arg(long)]
    pub out: PathBuf,
}

fn domain_filter(spec: &str) -> CliResult<Vec<Domain>> {
    match spec {
        "face" => Ok(vec![Domain::Face]),
        "skull" => Ok(vec![Domain::Skull]),
        "all" => Ok(vec![Domain::Face, Domain::Skull]),
        other => Err(CliError::usage(
            "InvalidConfig",
            format!("--domain must be face, skull, or all, got {other:?}"),
        )),
    }
}

fn view_filter(spec: &str) -> CliResult<Vec<View>> {
    match spec {
        "front" => Ok(vec![View::Front]),
        "side" => Ok(vec![View::Side]),
        "both" => Ok(vec![View::Front, View::Side]),
        other => Err(CliError::usage(
            "InvalidConfig",
            format!("--views must be front, side, or both, got {other:?}"),
        )),
    }
}

pub fn run(args: EmbedArgs) -> CliResult {
    let domains = domain_filter(&args.domain)?;
    let views = view_filter(&args.views)?;
    let bytes = fs::read(&args.checkpoint)
        .map_err(|e| CliError::usage("Io", format!("{}: {e}", args.checkpoint.display())))?;
    let (head, ckpt) = load_checkpoint(&bytes)?;
    let table = FeatureTable::load(&args.features)?;

    if ckpt.d_in != table.dim() {
        return Err(CliError::usage(
            "DimMismatch",
            format!(
                "checkpoint expects dim {} but feature table has dim {}",
                ckpt.d_in,
                table.dim()
            ),
        ));
    }
    if domains.contains(&Domain::Face) && ckpt.d_out != table.dim() {
        return Err(CliError::usage(
            "DimMismatch",
            format!(
                "face rows stay at dim {} but the head outputs dim {}; \
                 filter to --domain skull or retrain with matching dims",
                table.dim(),
                ckpt.d_out
            ),
        ));
    }

    let mut entries = Vec::new();
    for ((subject_id, domain, view), row) in table.iter() {
        if !domains.contains(domain) || !views.contains(view) {
            continue;
        }
        let embedding = match domain {
            Domain::Face => Embedding(row.values.clone()),
            Domain::Skull => Embedding(head.forward_slice(&row.values)?),
        };
        entries.push(GalleryEntry {
            gallery_id: format!("{subject_id}_{domain}_{view}"),
            subject_id: subject_id.clone(),
            view: *view,
            embedding,
        });
    }
    if entries.is_empty() {
        return Err(CliError::usage(
            "EmptyGallery",
            "no feature rows matched the domain/view filters",
        ));
    }
    save_gallery_csv(&entries, &args.out)?;
    println!("wrote {} embeddings to {}", entries.len(), args.out.display());
    Ok(())
}
