//! Plan-act-replan agent: one planner decision and at most one tool call per round.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eval::QaInstance;
use crate::evidence::{EvidenceItem, EvidencePool};
use crate::gateway::{ChatMessage, DecodeSpec, Gateway, GatewayError};
use crate::index::ScoredRecord;
use crate::prompts::{fill, lettered_options, Prompts};
use crate::rag::{answer, extract_topk, traced_ann, vote_elements, Prediction, RunError};
use crate::services::{Endpoint, ToolClient};
use crate::trace::{digest_json, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectedTool {
    Bm25Ann,
    ImgAnn,
    TextAnn,
    MultimodalAnn,
    None,
}

impl SelectedTool {
    pub fn endpoint(self) -> Option<Endpoint> {
        match self {
            SelectedTool::Bm25Ann => Some(Endpoint::Bm25Ann),
            SelectedTool::ImgAnn => Some(Endpoint::ImgAnn),
            SelectedTool::TextAnn => Some(Endpoint::TextAnn),
            SelectedTool::MultimodalAnn => Some(Endpoint::MultimodalAnn),
            SelectedTool::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerDecision {
    pub can_answer_now: bool,
    pub selected_tool: SelectedTool,
    #[serde(default)]
    pub bm25_query: String,
    #[serde(default)]
    pub reason: String,
    /// Logged only; never affects control flow.
    #[serde(default)]
    pub confidence: f64,
}

impl PlannerDecision {
    pub fn forced_stop(reason: impl Into<String>) -> Self {
        Self {
            can_answer_now: true,
            selected_tool: SelectedTool::None,
            bm25_query: String::new(),
            reason: reason.into(),
            confidence: 0.0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.can_answer_now || self.selected_tool == SelectedTool::None
    }
}

/// Parses the first `{` .. last `}` span of a planner reply into a decision.
pub fn parse_decision(reply: &str) -> Result<PlannerDecision, String> {
    let (Some(start), Some(end)) = (reply.find('{'), reply.rfind('}')) else {
        return Err("no JSON object found".into());
    };
    if end < start {
        return Err("no JSON object found".into());
    }
    let d: PlannerDecision =
        serde_json::from_str(&reply[start..=end]).map_err(|e| format!("invalid decision JSON: {e}"))?;
    if d.selected_tool == SelectedTool::Bm25Ann && d.bm25_query.trim().is_empty() {
        return Err("bm25_ann requires a non-empty bm25_query".into());
    }
    if !(0.0..=1.0).contains(&d.confidence) {
        return Err(format!("confidence {} outside [0, 1]", d.confidence));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub tool: String,
    pub result_count: usize,
    pub error: bool,
}

/// Tool-call history and the set of tools used so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolHistory {
    entries: Vec<HistoryEntry>,
    used_tools: BTreeSet<String>,
}

impl ToolHistory {
    pub fn push(&mut self, tool: &str, result_count: usize, error: bool) {
        self.used_tools.insert(tool.to_string());
        self.entries.push(HistoryEntry {
            tool: tool.to_string(),
            result_count,
            error,
        });
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn used_tools(&self) -> &BTreeSet<String> {
        &self.used_tools
    }

    fn render(&self) -> String {
        if self.entries.is_empty() {
            return "无".into();
        }
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if e.error {
                    format!("{}. {}: 调用失败", i + 1, e.tool)
                } else {
                    format!("{}. {}: {} 条结果", i + 1, e.tool, e.result_count)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render_used(&self) -> String {
        if self.used_tools.is_empty() {
            "无".into()
        } else {
            self.used_tools.iter().cloned().collect::<Vec<_>>().join(", ")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnrichStrategy {
    #[default]
    Majority,
    Llm,
}

impl FromStr for EnrichStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(EnrichStrategy::Majority),
            "llm" => Ok(EnrichStrategy::Llm),
            other => Err(format!("unknown enrichment strategy `{other}` (expected majority or llm)")),
        }
    }
}

impl fmt::Display for EnrichStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnrichStrategy::Majority => "majority",
            EnrichStrategy::Llm => "llm",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ParOptions {
    pub max_rounds: u32,
    pub k: usize,
    pub enrich: EnrichStrategy,
    /// Queries looked up under the majority strategy.
    pub enrich_top: usize,
    /// Character budget for evidence shown to the planner.
    pub evidence_budget: usize,
    pub decode: DecodeSpec,
}

impl Default for ParOptions {
    fn default() -> Self {
        Self {
            max_rounds: 6,
            k: 5,
            enrich: EnrichStrategy::Majority,
            enrich_top: 1,
            evidence_budget: 8000,
            decode: DecodeSpec::greedy(),
        }
    }
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct ParRunState<'a> {
    pub instance: &'a QaInstance,
    pub round: u32,
    pub evidence: EvidencePool,
    pub history: ToolHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enrichment {
    pub strategy: EnrichStrategy,
    pub queries: Vec<String>,
    pub found: usize,
    pub added: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub decision: PlannerDecision,
    pub tool: Option<String>,
    pub n_records: usize,
    pub error: Option<String>,
    pub enrichment: Option<Enrichment>,
    /// Planner replies that failed to parse this round.
    #[serde(default)]
    pub malformed: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParOutcome {
    pub prediction: Prediction,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub decision: PlannerDecision,
    pub malformed: u32,
}

/// Asks the planner for this round's decision, with one reprompt on malformed output.
pub fn plan_round(
    state: &ParRunState<'_>,
    opts: &ParOptions,
    planner: &Gateway,
    prompts: &Prompts,
    trace: &mut Trace,
) -> Result<PlanOutcome, GatewayError> {
    let inst = state.instance;
    let prompt = fill(
        &prompts.par_planner,
        &[
            ("skills", &prompts.skills_block()),
            ("image", &inst.image),
            ("question", &inst.question),
            ("options", &lettered_options(&inst.options)),
            ("evidence", &state.evidence.render_within(opts.evidence_budget)),
            ("used_tools", &state.history.render_used()),
            ("history", &state.history.render()),
            ("round", &state.round.to_string()),
            ("max_rounds", &opts.max_rounds.to_string()),
        ],
    );
    let mut messages = vec![ChatMessage::user(prompt).with_image(&inst.image)];
    let mut malformed = 0;
    loop {
        let digest = digest_json(&messages);
        let reply = match planner.complete(&messages, &opts.decode) {
            Ok(r) => {
                trace.model("planner", digest, Ok(&r));
                r
            }
            Err(e) => {
                trace.model("planner", digest, Err(&e.to_string()));
                return Err(e);
            }
        };
        match parse_decision(&reply) {
            Ok(decision) => return Ok(PlanOutcome { decision, malformed }),
            Err(err) => {
                malformed += 1;
                log::warn!("{}: malformed planner reply in round {}: {err}", inst.id, state.round);
                if malformed >= 2 {
                    return Ok(PlanOutcome {
                        decision: PlannerDecision::forced_stop(format!("forced stop: {err}")),
                        malformed,
                    });
                }
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(fill(&prompts.par_reprompt, &[("error", &err)])));
            }
        }
    }
}

/// Request body for the selected tool.
pub fn tool_request(decision: &PlannerDecision, instance: &QaInstance, k: usize) -> Option<(Endpoint, Value)> {
    let body = match decision.selected_tool {
        SelectedTool::Bm25Ann => json!({ "query": decision.bm25_query, "top_k": k }),
        SelectedTool::ImgAnn => json!({ "img": instance.image, "top_k": k }),
        SelectedTool::TextAnn => json!({ "query": instance.question, "top_k": k }),
        SelectedTool::MultimodalAnn => {
            json!({ "query": instance.question, "image_path": instance.image, "top_k": k })
        }
        SelectedTool::None => return None,
    };
    Some((decision.selected_tool.endpoint()?, body))
}

/// Looks up knowledge for the element names voted from image records.
pub fn knowledge_enrich(
    instance: &QaInstance,
    img_records: &[ScoredRecord],
    opts: &ParOptions,
    tools: &dyn ToolClient,
    planner: &Gateway,
    prompts: &Prompts,
    trace: &mut Trace,
) -> (Vec<EvidenceItem>, Enrichment) {
    let candidates = vote_elements(img_records);
    let majority: Vec<String> = candidates.iter().take(opts.enrich_top).cloned().collect();
    let mut enrichment = Enrichment {
        strategy: opts.enrich,
        queries: Vec::new(),
        found: 0,
        added: 0,
        error: None,
    };
    let queries = match opts.enrich {
        EnrichStrategy::Majority => majority,
        EnrichStrategy::Llm => {
            let picked = llm_select(instance, &candidates, opts, planner, prompts, trace);
            if picked.is_empty() { majority } else { picked }
        }
    };
    enrichment.queries = queries.clone();
    if queries.is_empty() {
        return (Vec::new(), enrichment);
    }
    let body = json!({ "queries": queries });
    let results = match tools.kn_lookup(&queries) {
        Ok(r) => {
            trace.tool(Endpoint::KnLookup.name(), &body, Ok(&json!({ "results": r })));
            r
        }
        Err(e) => {
            log::warn!("{}: knowledge enrichment skipped: {e}", instance.id);
            trace.tool(Endpoint::KnLookup.name(), &body, Err(&e.to_string()));
            enrichment.error = Some(e.to_string());
            return (Vec::new(), enrichment);
        }
    };
    let mut items = Vec::new();
    for r in results.iter().filter(|r| r.found) {
        enrichment.found += 1;
        items.extend(
            r.contents
                .iter()
                .map(|c| EvidenceItem::new(Endpoint::KnLookup.name(), format!("{}\n{}", r.query, c))),
        );
    }
    (items, enrichment)
}

fn llm_select(
    instance: &QaInstance,
    candidates: &[String],
    opts: &ParOptions,
    planner: &Gateway,
    prompts: &Prompts,
    trace: &mut Trace,
) -> Vec<String> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let listing = candidates.iter().map(|c| format!("- {c}")).collect::<Vec<_>>().join("\n");
    let messages = [ChatMessage::user(fill(
        &prompts.kn_select,
        &[("question", &instance.question), ("candidates", &listing)],
    ))];
    let digest = digest_json(&messages);
    let reply = match planner.complete(&messages, &opts.decode) {
        Ok(r) => {
            trace.model("kn_select", digest, Ok(&r));
            r
        }
        Err(e) => {
            trace.model("kn_select", digest, Err(&e.to_string()));
            log::warn!("{}: query selection failed, using majority vote: {e}", instance.id);
            return Vec::new();
        }
    };
    let picked: Vec<String> = match (reply.find('['), reply.rfind(']')) {
        (Some(s), Some(e)) if s < e => serde_json::from_str(&reply[s..=e]).unwrap_or_default(),
        _ => Vec::new(),
    };
    let mut out: Vec<String> = Vec::new();
    for p in picked {
        if candidates.contains(&p) && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Runs the loop for up to `max_rounds` rounds, then answers from the gathered evidence.
pub fn run_par(
    instance: &QaInstance,
    opts: &ParOptions,
    tools: &dyn ToolClient,
    planner: &Gateway,
    answerer: &Gateway,
    prompts: &Prompts,
) -> Result<ParOutcome, RunError> {
    if opts.k == 0 || opts.max_rounds == 0 {
        return Err(RunError::Invalid("k and max_rounds must be at least 1".into()));
    }
    let mut trace = Trace::default();
    let mut state = ParRunState {
        instance,
        round: 0,
        evidence: EvidencePool::new(),
        history: ToolHistory::default(),
    };
    let mut rounds = Vec::new();
    for r in 1..=opts.max_rounds {
        state.round = r;
        let plan = plan_round(&state, opts, planner, prompts, &mut trace)?;
        let mut record = RoundRecord {
            round: r,
            decision: plan.decision.clone(),
            tool: None,
            n_records: 0,
            error: None,
            enrichment: None,
            malformed: plan.malformed,
        };
        let request = match plan.decision.is_terminal() {
            true => None,
            false => tool_request(&plan.decision, instance, opts.k),
        };
        let Some((endpoint, body)) = request else {
            rounds.push(record);
            break;
        };
        record.tool = Some(endpoint.name().to_string());
        match traced_ann(tools, &mut trace, endpoint, body) {
            Ok(records) => {
                record.n_records = records.len();
                state.history.push(endpoint.name(), records.len(), false);
                state.evidence.extend(extract_topk(endpoint.name(), &records, opts.k));
                if endpoint == Endpoint::ImgAnn && !records.is_empty() {
                    let (items, mut enrichment) =
                        knowledge_enrich(instance, &records, opts, tools, planner, prompts, &mut trace);
                    enrichment.added = state.evidence.extend(items);
                    record.enrichment = Some(enrichment);
                }
            }
            Err(e) => {
                record.error = Some(e.to_string());
                state.history.push(endpoint.name(), 0, true);
            }
        }
        rounds.push(record);
    }
    let answer_text = answer(instance, &state.evidence, answerer, prompts, &opts.decode, &mut trace)?;
    Ok(ParOutcome {
        prediction: Prediction {
            id: instance.id.clone(),
            answer_text,
            evidence: state.evidence,
            trace,
            rounds: rounds.len() as u32,
        },
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_passes_through() {
        let d = parse_decision(
            r#"好的 {"can_answer_now":false,"selected_tool":"img_ann","bm25_query":"","reason":"r","confidence":0.4}"#,
        )
        .unwrap();
        assert_eq!(d.selected_tool, SelectedTool::ImgAnn);
        assert_eq!(d.confidence, 0.4);
        assert!(!d.is_terminal());
    }

    #[test]
    fn malformed_decisions() {
        assert!(parse_decision("no json here").is_err());
        assert!(parse_decision(r#"{"can_answer_now":false,"selected_tool":"bm25_ann","bm25_query":" "}"#).is_err());
        assert!(parse_decision(r#"{"can_answer_now":false,"selected_tool":"web"}"#).is_err());
        assert!(parse_decision(r#"{"can_answer_now":true,"selected_tool":"none","confidence":1.5}"#).is_err());
        let d = parse_decision(r#"{"can_answer_now":false,"selected_tool":"bm25_ann","bm25_query":"Dust2 A点"}"#).unwrap();
        assert_eq!(d.bm25_query, "Dust2 A点");
    }

    #[test]
    fn history_tracks_used_tools() {
        let mut h = ToolHistory::default();
        h.push("img_ann", 3, false);
        h.push("img_ann", 0, true);
        h.push("text_ann", 5, false);
        assert_eq!(h.entries().len(), 3);
        assert_eq!(h.used_tools().iter().cloned().collect::<Vec<_>>(), vec!["img_ann", "text_ann"]);
        assert!(h.render().contains("2. img_ann: 调用失败"));
    }
}
