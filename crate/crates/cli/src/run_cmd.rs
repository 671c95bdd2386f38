use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use framesearch_core::eval::{emit_report, load_dataset, score_run, PredictionRecord, QaInstance, ReportFormat};
use framesearch_core::gateway::{DecodeSpec, Gateway, GatewayConfig};
use framesearch_core::msr1::{rollout_group, RewardScheme, RewardWeights, RolloutOptions};
use framesearch_core::par::{run_par, EnrichStrategy, ParOptions};
use framesearch_core::prompts::Prompts;
use framesearch_core::rag::{run_rag, RagOptions};
use framesearch_core::services::{HttpTools, InProcessTools, ServiceConfig, ServiceState, ToolClient};
use serde::Serialize;
use serde_json::{json, Value};

use crate::sibling;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rag,
    Par,
    Msr1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Decode {
    Greedy,
    Sample,
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    dataset: PathBuf,
    /// Gateway config (TOML) for the answerer, and for the planner/policy unless overridden.
    #[arg(long)]
    backend: PathBuf,
    /// Separate gateway config for the PAR planner.
    #[arg(long)]
    planner: Option<PathBuf>,
    /// Base URL of running services.
    #[arg(long, conflicts_with = "service_config")]
    services: Option<String>,
    /// Separate base URL for `/kn_lookup`.
    #[arg(long, requires = "services")]
    kn_url: Option<String>,
    /// Load services in-process from this config instead of calling HTTP.
    #[arg(long)]
    service_config: Option<PathBuf>,
    /// Report path (rag/par) or output directory (msr1).
    #[arg(long)]
    out: PathBuf,
    /// Retrieval depth for rag/par.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 6)]
    max_rounds: u32,
    #[arg(long, default_value = "majority")]
    enrich: EnrichStrategy,
    #[arg(long, default_value_t = 8000)]
    evidence_budget: usize,
    #[arg(long, default_value = "original")]
    scheme: RewardScheme,
    #[arg(long, default_value_t = 4)]
    group_size: usize,
    /// Defaults to greedy for rag/par and sample for msr1 group rollouts.
    #[arg(long, value_enum)]
    decode: Option<Decode>,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    k_img: usize,
    #[arg(long, default_value_t = 5)]
    k_text: usize,
    /// Load prompt templates from this directory instead of the built-in ones.
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// Label of the report row.
    #[arg(long)]
    setting: Option<String>,
}

fn gateway(path: &Path) -> Result<Gateway> {
    let cfg = GatewayConfig::load(path)?;
    Ok(Gateway::from_config(&cfg)?)
}

fn tools(args: &RunArgs) -> Result<Box<dyn ToolClient>> {
    match (&args.services, &args.service_config) {
        (Some(url), _) => {
            let mut t = HttpTools::new(url.clone());
            if let Some(kn) = &args.kn_url {
                t = t.with_kn_base_url(kn.clone());
            }
            Ok(Box::new(t))
        }
        (None, Some(cfg)) => {
            let state = ServiceState::load(&ServiceConfig::load(cfg)?)?;
            Ok(Box::new(InProcessTools::new(Arc::new(state))))
        }
        (None, None) => bail!("pass --services <url> or --service-config <toml>"),
    }
}

struct JsonlOut(BufWriter<File>);

impl JsonlOut {
    fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self(BufWriter::new(f)))
    }

    fn line<T: Serialize>(&mut self, v: &T) -> Result<()> {
        serde_json::to_writer(&mut self.0, v)?;
        self.0.write_all(b"\n")?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.0.flush()?;
        Ok(())
    }
}

fn failed(id: &str, err: &dyn std::fmt::Display) -> PredictionRecord {
    log::error!("{id}: run failed, recorded as unanswered: {err}");
    PredictionRecord {
        id: id.to_string(),
        answer_text: String::new(),
        searched: false,
        tool_calls: Default::default(),
        rounds: 0,
    }
}

fn steps(id: &str, trace: &framesearch_core::trace::Trace) -> Vec<Value> {
    trace
        .steps
        .iter()
        .map(|s| {
            let mut v = serde_json::to_value(s).expect("serializable");
            v["id"] = json!(id);
            v
        })
        .collect()
}

fn prompts(args: &RunArgs) -> Result<Prompts> {
    match &args.prompts {
        Some(dir) => Prompts::from_dir(dir).with_context(|| format!("loading prompts from {}", dir.display())),
        None => Ok(Prompts::builtin()),
    }
}

fn decode_spec(args: &RunArgs) -> DecodeSpec {
    let default = match args.mode {
        Mode::Msr1 => Decode::Sample,
        _ => Decode::Greedy,
    };
    match args.decode.unwrap_or(default) {
        Decode::Greedy => DecodeSpec::greedy(),
        Decode::Sample => DecodeSpec::sample(args.temperature, args.seed),
    }
}

fn write_report(path: &Path, setting: &str, preds: &[PredictionRecord], dataset: &[QaInstance]) -> Result<()> {
    let report = score_run(setting, preds, dataset)?;
    emit_report(&[report], ReportFormat::from_path(path), path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run(args: RunArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let tools = tools(&args)?;
    let prompts = prompts(&args)?;
    let answerer = gateway(&args.backend)?;
    let decode = decode_spec(&args);
    match args.mode {
        Mode::Rag => {
            let opts = RagOptions { k: args.k, decode };
            let mut trace_out = JsonlOut::create(&sibling(&args.out, "trace.jsonl"))?;
            let mut preds = Vec::new();
            for inst in &dataset {
                match run_rag(inst, &opts, tools.as_ref(), &answerer, &prompts) {
                    Ok(p) => {
                        for s in steps(&inst.id, &p.trace) {
                            trace_out.line(&s)?;
                        }
                        preds.push(p.to_record());
                    }
                    Err(e) => preds.push(failed(&inst.id, &e)),
                }
            }
            trace_out.finish()?;
            finish_predictions(&args, "rag", &preds, &dataset)
        }
        Mode::Par => {
            let planner = match &args.planner {
                Some(p) => gateway(p)?,
                None => gateway(&args.backend)?,
            };
            let opts = ParOptions {
                max_rounds: args.max_rounds,
                k: args.k,
                enrich: args.enrich,
                evidence_budget: args.evidence_budget,
                decode,
                ..ParOptions::default()
            };
            let mut trace_out = JsonlOut::create(&sibling(&args.out, "trace.jsonl"))?;
            let mut rounds_out = JsonlOut::create(&sibling(&args.out, "rounds.jsonl"))?;
            let mut preds = Vec::new();
            for inst in &dataset {
                match run_par(inst, &opts, tools.as_ref(), &planner, &answerer, &prompts) {
                    Ok(out) => {
                        for s in steps(&inst.id, &out.prediction.trace) {
                            trace_out.line(&s)?;
                        }
                        for r in &out.rounds {
                            let mut v = serde_json::to_value(r)?;
                            v["id"] = json!(inst.id);
                            rounds_out.line(&v)?;
                        }
                        preds.push(out.prediction.to_record());
                    }
                    Err(e) => preds.push(failed(&inst.id, &e)),
                }
            }
            trace_out.finish()?;
            rounds_out.finish()?;
            finish_predictions(&args, "par", &preds, &dataset)
        }
        Mode::Msr1 => run_msr1(&args, &dataset, tools.as_ref(), &answerer, &prompts, decode),
    }
}

fn finish_predictions(args: &RunArgs, mode: &str, preds: &[PredictionRecord], dataset: &[QaInstance]) -> Result<()> {
    let mut out = JsonlOut::create(&sibling(&args.out, "predictions.jsonl"))?;
    for p in preds {
        out.line(p)?;
    }
    out.finish()?;
    let setting = args.setting.clone().unwrap_or_else(|| mode.to_string());
    write_report(&args.out, &setting, preds, dataset)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}

fn run_msr1(
    args: &RunArgs,
    dataset: &[QaInstance],
    tools: &dyn ToolClient,
    policy: &Gateway,
    prompts: &Prompts,
    decode: DecodeSpec,
) -> Result<()> {
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let opts = RolloutOptions { k_img: args.k_img, k_text: args.k_text, decode };
    let weights = RewardWeights::default();
    let mut traj_out = JsonlOut::create(&args.out.join("trajectories.jsonl"))?;
    let mut preds = Vec::new();
    for inst in dataset {
        match rollout_group(inst, args.group_size, policy, &opts, tools, prompts, args.scheme, &weights) {
            Ok(group) => {
                for rec in &group {
                    traj_out.line(rec)?;
                }
                preds.push(group[0].trajectory.to_record());
            }
            Err(e) => preds.push(failed(&inst.id, &e)),
        }
    }
    traj_out.finish()?;
    let mut out = JsonlOut::create(&args.out.join("predictions.jsonl"))?;
    for p in &preds {
        out.line(p)?;
    }
    out.finish()?;
    let setting = args.setting.clone().unwrap_or_else(|| format!("msr1-{}", args.scheme));
    write_report(&args.out.join("report.json"), &setting, &preds, dataset)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}
