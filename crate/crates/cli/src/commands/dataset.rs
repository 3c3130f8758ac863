use std::path::PathBuf;

use clap::Args;

use fast_core::dataset::{
    build_negative_triples, build_proposal_records, proposals_to_jsonl, triples_to_jsonl,
    AnnotationSet, BuilderConfig, TemplateSet, DEFAULT_THRESHOLD_H, DEFAULT_THRESHOLD_W,
};

use super::{read_input, write_output, CmdError};

#[derive(Args)]
pub struct BuildDatasetArgs {
    /// Annotation JSON (images with labeled boxes)
    #[arg(long)]
    annotations: PathBuf,
    /// Vocabulary file, one label per line
    #[arg(long)]
    vocab: PathBuf,
    /// Template JSON; built-in phrasing when omitted
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Negative triples output (JSONL); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write region-proposal records here (JSONL)
    #[arg(long)]
    proposals_out: Option<PathBuf>,
    /// Absent-object triples sampled per image
    #[arg(long, default_value_t = 1)]
    absent_per_image: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_W)]
    threshold_w: u32,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_H)]
    threshold_h: u32,
    /// Sampling seed; identical inputs and seed give identical output
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn execute(args: BuildDatasetArgs) -> Result<(), CmdError> {
    let annotations = AnnotationSet::from_json(&read_input(&args.annotations)?)
        .map_err(|e| CmdError::Data(e.to_string()))?;
    let vocab: Vec<String> = read_input(&args.vocab)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let templates = match &args.templates {
        Some(path) => TemplateSet::from_json(&read_input(path)?)
            .map_err(|e| CmdError::Data(e.to_string()))?,
        None => TemplateSet::default(),
    };
    let cfg = BuilderConfig {
        threshold_w: args.threshold_w,
        threshold_h: args.threshold_h,
        absent_per_image: args.absent_per_image,
        seed: args.seed,
        ..BuilderConfig::default()
    };
    let triples = build_negative_triples(&annotations, &vocab, &templates, &cfg)
        .map_err(|e| CmdError::Data(e.to_string()))?;
    tracing::info!("built {} negative triples", triples.len());
    write_output(args.out.as_ref(), &triples_to_jsonl(&triples))?;

    if let Some(path) = &args.proposals_out {
        let proposals = build_proposal_records(&annotations, &templates)
            .map_err(|e| CmdError::Data(e.to_string()))?;
        tracing::info!("built {} proposal records", proposals.len());
        write_output(Some(path), &proposals_to_jsonl(&proposals))?;
    }
    Ok(())
}
