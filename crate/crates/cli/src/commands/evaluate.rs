//! `evaluate`: Recall/mAP/MRR over a query set, with optional distractor
//! merging for mixed-gallery stress runs.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use cranioface_core::{
    evaluate, load_gallery_csv, merge_galleries, Embedding, GalleryIndex, RelevanceJudgments,
};

use crate::config::{pick, FileConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gallery CSV to rank
    #[arg(long)]
    pub gallery: PathBuf,
    /// Embedding CSV of probes (one query per row)
    #[arg(long)]
    pub queries: PathBuf,
    /// JSON map query_id -> [relevant gallery ids]; defaults to matching
    /// gallery entries that share the query's subject
    #[arg(long)]
    pub judgments: Option<PathBuf>,
    /// Extra gallery CSV merged in before ranking
    #[arg(long)]
    pub distractors: Option<PathBuf>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Metrics JSON output
    #[arg(long)]
    pub out: PathBuf,
    /// k-sweep CSV output (k,recall,map,mrr)
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs) -> CliResult {
    let file = FileConfig::load(args.config.as_deref())?;
    let k_max = pick(args.k_max, file.k_max, 30);

    let mut index = GalleryIndex::build(load_gallery_csv(&args.gallery)?)?;
    if let Some(path) = &args.distractors {
        let extra = GalleryIndex::build(load_gallery_csv(path)?)?;
        index = merge_galleries(&index, &extra)?;
    }

    let query_rows = load_gallery_csv(&args.queries)?;
    let queries: Vec<(String, Embedding)> = query_rows
        .iter()
        .map(|e| (e.gallery_id.clone(), e.embedding.clone()))
        .collect();
    let judgments = match &args.judgments {
        Some(path) => RelevanceJudgments::from_json_file(path)?,
        None => {
            let pairs: Vec<(String, String)> = query_rows
                .iter()
                .map(|e| (e.gallery_id.clone(), e.subject_id.clone()))
                .collect();
            RelevanceJudgments::subject_match(&pairs, &index)?
        }
    };

    let report = evaluate(&index, &queries, &judgments, k_max)?;
    fs::write(&args.out, report.to_json_bytes()?).map_err(|e| CliError::write(&args.out, e))?;
    if let Some(path) = &args.curves {
        report.write_curves_csv(path)?;
    }
    let (recall, map, mrr) = report.summary();
    println!(
        "{} queries over {} gallery entries: recall@{k_max}={recall:.4} map@{k_max}={map:.4} mrr@{k_max}={mrr:.4}",
        queries.len(),
        index.len()
    );
    Ok(())
}
