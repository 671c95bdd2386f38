//! Fixed image-then-text retrieval chain with majority-vote element selection.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::eval::{PredictionRecord, QaInstance};
use crate::evidence::{EvidenceItem, EvidencePool};
use crate::gateway::{ChatMessage, DecodeSpec, Gateway, GatewayError};
use crate::index::ScoredRecord;
use crate::prompts::{fill, Prompts};
use crate::services::{Endpoint, ToolClient, ToolError};
use crate::trace::{digest_json, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementSource {
    Majority,
    FallbackTopScore,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreElementChoice {
    pub element: String,
    pub source: ElementSource,
}

impl CoreElementChoice {
    fn empty() -> Self {
        Self {
            element: String::new(),
            source: ElementSource::Empty,
        }
    }
}

/// Non-empty element names ranked by count, then summed score, then name.
pub(crate) fn vote_elements(records: &[ScoredRecord]) -> Vec<String> {
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for r in records {
        if let Some(q) = r.element_query().filter(|q| !q.trim().is_empty()) {
            let e = tally.entry(q).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += r.score;
        }
    }
    let mut ranked: Vec<(&str, (usize, f64))> = tally.into_iter().collect();
    ranked.sort_by(|(qa, (ca, sa)), (qb, (cb, sb))| {
        cb.cmp(ca).then(sb.total_cmp(sa)).then_with(|| qa.cmp(qb))
    });
    ranked.into_iter().map(|(q, _)| q.to_string()).collect()
}

/// Picks the core element of an image-retrieval result.
pub fn select_core_element(records: &[ScoredRecord]) -> CoreElementChoice {
    if let Some(top) = vote_elements(records).into_iter().next() {
        return CoreElementChoice {
            element: top,
            source: ElementSource::Majority,
        };
    }
    match records.first().and_then(|r| r.element_query()) {
        Some(q) if !q.trim().is_empty() => CoreElementChoice {
            element: q.to_string(),
            source: ElementSource::FallbackTopScore,
        },
        _ => CoreElementChoice::empty(),
    }
}

/// Evidence items for the first `n` records, one per payload id.
pub fn extract_topk(source: &str, records: &[ScoredRecord], n: usize) -> Vec<EvidenceItem> {
    let mut seen = HashSet::new();
    records
        .iter()
        .take(n)
        .filter(|r| seen.insert(r.id().to_string()))
        .map(|r| EvidenceItem::from_record(source, r))
        .collect()
}

/// `Q* q` when an element was chosen, else `q`.
pub fn text_query(element: &str, question: &str) -> String {
    if element.is_empty() {
        question.to_string()
    } else {
        format!("{element} {question}")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("model call failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Invalid(String),
}

/// Outcome of one agent run on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub answer_text: String,
    pub evidence: EvidencePool,
    pub trace: Trace,
    #[serde(default)]
    pub rounds: u32,
}

impl Prediction {
    /// Retrieval calls per endpoint, excluding knowledge enrichment.
    pub fn tool_calls(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for step in self.trace.retrieval_calls() {
            *out.entry(step.endpoint.clone().unwrap_or_default()).or_default() += 1;
        }
        out
    }

    pub fn to_record(&self) -> PredictionRecord {
        let tool_calls = self.tool_calls();
        PredictionRecord {
            id: self.id.clone(),
            answer_text: self.answer_text.clone(),
            searched: !tool_calls.is_empty(),
            tool_calls,
            rounds: self.rounds,
        }
    }
}

/// Calls an ANN endpoint and records the step; errors are recorded then returned.
pub(crate) fn traced_ann(
    tools: &dyn ToolClient,
    trace: &mut Trace,
    endpoint: Endpoint,
    body: serde_json::Value,
) -> Result<Vec<ScoredRecord>, ToolError> {
    match tools.ann(endpoint, &body) {
        Ok(records) => {
            trace.tool(endpoint.name(), &body, Ok(&json!({ "scores": records })));
            Ok(records)
        }
        Err(e) => {
            trace.tool(endpoint.name(), &body, Err(&e.to_string()));
            Err(e)
        }
    }
}

/// Asks the answerer for the final option text given the instance and evidence.
pub fn answer(
    instance: &QaInstance,
    evidence: &EvidencePool,
    answerer: &Gateway,
    prompts: &Prompts,
    decode: &DecodeSpec,
    trace: &mut Trace,
) -> Result<String, GatewayError> {
    let opt = |i: usize| instance.options.get(i).map(String::as_str).unwrap_or("");
    let text = fill(
        &prompts.rag_answer,
        &[
            ("question", &instance.question),
            ("option_1", opt(0)),
            ("option_2", opt(1)),
            ("option_3", opt(2)),
            ("option_4", opt(3)),
            ("knowledge", &evidence.render()),
        ],
    );
    let messages = [ChatMessage::user(text).with_image(&instance.image)];
    let digest = digest_json(&messages);
    match answerer.complete(&messages, decode) {
        Ok(reply) => {
            trace.model("answerer", digest, Ok(&reply));
            Ok(reply.trim().to_string())
        }
        Err(e) => {
            trace.model("answerer", digest, Err(&e.to_string()));
            Err(e)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RagOptions {
    pub k: usize,
    pub decode: DecodeSpec,
}

impl Default for RagOptions {
    fn default() -> Self {
        Self {
            k: 5,
            decode: DecodeSpec::greedy(),
        }
    }
}

/// Image retrieval, element vote, text retrieval on `Q* q`, then answering.
pub fn run_rag(
    instance: &QaInstance,
    opts: &RagOptions,
    tools: &dyn ToolClient,
    answerer: &Gateway,
    prompts: &Prompts,
) -> Result<Prediction, RunError> {
    if opts.k == 0 {
        return Err(RunError::Invalid("k must be at least 1".into()));
    }
    let mut trace = Trace::default();
    let img = traced_ann(
        tools,
        &mut trace,
        Endpoint::ImgAnn,
        json!({ "img": instance.image, "top_k": opts.k }),
    )?;
    let choice = select_core_element(&img);
    let query = text_query(&choice.element, &instance.question);
    let text = traced_ann(
        tools,
        &mut trace,
        Endpoint::TextAnn,
        json!({ "query": query, "top_k": opts.k }),
    )?;

    let mut evidence = EvidencePool::new();
    evidence.extend(extract_topk(Endpoint::ImgAnn.name(), &img, opts.k));
    evidence.extend(extract_topk(Endpoint::TextAnn.name(), &text, opts.k));
    let answer_text = answer(instance, &evidence, answerer, prompts, &opts.decode, &mut trace)?;
    Ok(Prediction {
        id: instance.id.clone(),
        answer_text,
        evidence,
        trace,
        rounds: 0,
    })
}
