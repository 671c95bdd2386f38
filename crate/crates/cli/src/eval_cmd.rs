use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use framesearch_core::eval::{
    emit_report, hitrate_at_k, load_dataset, ranked_elements, score_run, PredictionRecord,
    RankedResult, ReportFormat, RunReport,
};
use framesearch_core::jsonl;
use framesearch_core::services::{Endpoint, HttpTools, InProcessTools, ServiceConfig, ServiceState, ToolClient};
use serde_json::json;

#[derive(Args)]
pub struct EvalArgs {
    /// One or more prediction files; each becomes a report row.
    #[arg(long, required = true, num_args = 1..)]
    predictions: Vec<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    /// `.md` writes a markdown table, anything else JSON.
    #[arg(long)]
    out: PathBuf,
    /// Row labels, parallel to `--predictions` (defaults to file stems).
    #[arg(long, num_args = 1..)]
    setting: Vec<String>,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    if !args.setting.is_empty() && args.setting.len() != args.predictions.len() {
        bail!("--setting needs one label per predictions file");
    }
    let mut reports: Vec<RunReport> = Vec::new();
    for (i, path) in args.predictions.iter().enumerate() {
        let preds: Vec<PredictionRecord> = jsonl::read(path)?;
        let label = args.setting.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .and_then(|s| s.to_str())
                .map(|s| s.trim_end_matches(".predictions").to_string())
                .unwrap_or_default()
        });
        reports.push(score_run(&label, &preds, &dataset).with_context(|| format!("scoring {}", path.display()))?);
    }
    emit_report(&reports, ReportFormat::from_path(&args.out), &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

#[derive(Args)]
pub struct HitrateArgs {
    /// JSONL of {id, backend, elements}.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    k: Vec<usize>,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn hitrate(args: HitrateArgs) -> Result<()> {
    if args.k.contains(&0) {
        bail!("--k values must be at least 1");
    }
    let dataset = load_dataset(&args.dataset)?;
    let results: Vec<RankedResult> = jsonl::read(&args.results)?;
    let report = hitrate_at_k(&results, &dataset, &args.k)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match args.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    if report.excluded > 0 {
        log::warn!("{} instance(s) without gold_element excluded", report.excluded);
    }
    Ok(())
}

#[derive(Args)]
pub struct RankArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, conflicts_with = "service_config")]
    services: Option<String>,
    #[arg(long)]
    service_config: Option<PathBuf>,
    /// Endpoints whose results carry element names.
    #[arg(long, value_delimiter = ',', default_value = "img_ann,multimodal_ann")]
    backends: Vec<String>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn rank(args: RankArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let tools: Box<dyn ToolClient> = match (&args.services, &args.service_config) {
        (Some(url), _) => Box::new(HttpTools::new(url.clone())),
        (None, Some(cfg)) => Box::new(InProcessTools::new(Arc::new(ServiceState::load(&ServiceConfig::load(cfg)?)?))),
        (None, None) => bail!("pass --services <url> or --service-config <toml>"),
    };
    let mut rows = Vec::new();
    for name in &args.backends {
        let endpoint = Endpoint::from_name(name).with_context(|| format!("unknown backend `{name}`"))?;
        for inst in &dataset {
            let body = match endpoint {
                Endpoint::ImgAnn => json!({ "img": inst.image, "top_k": args.k }),
                Endpoint::MultimodalAnn => json!({ "query": inst.question, "image_path": inst.image, "top_k": args.k }),
                Endpoint::TextAnn | Endpoint::Bm25Ann => json!({ "query": inst.question, "top_k": args.k }),
                _ => bail!("`{name}` is not a retrieval backend"),
            };
            let records = tools.ann(endpoint, &body)?;
            rows.push(RankedResult {
                id: inst.id.clone(),
                backend: name.clone(),
                elements: ranked_elements(&records),
            });
        }
    }
    jsonl::write(&args.out, &rows)?;
    Ok(())
}

