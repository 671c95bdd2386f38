//! Three-reply tagged-action rollout, rewards and group advantages.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eval::{match_answer, PredictionRecord, QaInstance};
use crate::gateway::{ChatMessage, DecodeSpec, Gateway, GatewayError};
use crate::index::{Payload, ScoredRecord};
use crate::prompts::{fill, lettered_options, Prompts};
use crate::services::{Endpoint, ToolClient};

pub const MAX_ROUNDS: usize = 3;

static REASON: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<reason>.*?</reason>").unwrap());
static ANSWER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<answer>(.*?)</answer>").unwrap());
static IMG_SEARCH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<search>\s*<img>\s*</search>").unwrap());
static TEXT_SEARCH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<text_search>(.*?)</text_search>").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Action {
    Answer(String),
    ImageSearch,
    TextSearch(String),
    Invalid,
}

impl Action {
    pub fn kind(&self) -> &'static str {
        match self {
            Action::Answer(_) => "answer",
            Action::ImageSearch => "image_search",
            Action::TextSearch(_) => "text_search",
            Action::Invalid => "invalid",
        }
    }
}

/// Classifies a reply by its action tags; `<reason>` blocks are ignored.
pub fn parse_action(text: &str) -> Action {
    let body = REASON.replace_all(text, "");
    let answers: Vec<_> = ANSWER.captures_iter(&body).collect();
    let images = IMG_SEARCH.find_iter(&body).count();
    let texts: Vec<_> = TEXT_SEARCH.captures_iter(&body).collect();
    if answers.len() + images + texts.len() != 1 {
        return Action::Invalid;
    }
    if let Some(c) = answers.first() {
        return Action::Answer(c[1].trim().to_string());
    }
    if let Some(c) = texts.first() {
        let q = c[1].trim();
        return if q.is_empty() { Action::Invalid } else { Action::TextSearch(q.to_string()) };
    }
    Action::ImageSearch
}

/// Tag text for a well-formed action; `Invalid` renders as an empty string.
pub fn render_action(action: &Action) -> String {
    match action {
        Action::Answer(a) => format!("<answer>{a}</answer>"),
        Action::ImageSearch => "<search><img></search>".into(),
        Action::TextSearch(q) => format!("<text_search>{q}</text_search>"),
        Action::Invalid => String::new(),
    }
}

/// Trimmed content of the first answer tag, or empty.
pub fn extract_answer(text: &str) -> String {
    ANSWER
        .captures(text)
        .map(|c| c[1].trim().to_string())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationKind {
    Image,
    Text,
}

pub fn format_observation(records: &[ScoredRecord], kind: ObservationKind) -> String {
    if records.is_empty() {
        return "<information>无结果</information>".into();
    }
    let lines: Vec<String> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let n = i + 1;
            match (&r.payload, kind) {
                (Payload::Image(e), _) => format!("{n}. [{}] {} (score: {:.4})", e.game, e.query, r.score),
                (Payload::Text(c), _) => format!("{n}. {}\n{}\n(score: {:.4})", c.title, c.content, r.score),
                (Payload::Multimodal(m), _) => format!("{n}. {}\n{}\n(score: {:.4})", m.title, m.content, r.score),
            }
        })
        .collect();
    format!("<information>\n{}\n</information>", lines.join("\n"))
}

fn error_observation(endpoint: Endpoint, message: &str) -> String {
    format!("<information>检索失败（{}）：{message}</information>", endpoint.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRound {
    pub index: usize,
    pub generated: String,
    pub action: Action,
    pub observation: String,
    pub stage_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<Value>,
    #[serde(default)]
    pub tool_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub rounds: Vec<RolloutRound>,
    pub final_answer: String,
    pub searched_image: bool,
    pub searched_text: bool,
    pub invalid_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Start,
    AfterImage,
    AfterText,
}

impl Stage {
    fn allows(self, action: &Action, index: usize) -> bool {
        if index == MAX_ROUNDS {
            return matches!(action, Action::Answer(_));
        }
        match (self, action) {
            (_, Action::Invalid) => false,
            (Stage::Start, _) => true,
            (Stage::AfterImage, Action::ImageSearch) => false,
            (Stage::AfterImage, _) => true,
            (Stage::AfterText, a) => matches!(a, Action::Answer(_)),
        }
    }
}

impl Trajectory {
    /// Every round carries exactly one action that its stage permits.
    pub fn is_well_formed(&self) -> bool {
        let mut stage = Stage::Start;
        for r in &self.rounds {
            if !stage.allows(&r.action, r.index) {
                return false;
            }
            stage = match r.action {
                Action::ImageSearch => Stage::AfterImage,
                Action::TextSearch(_) => Stage::AfterText,
                _ => stage,
            };
        }
        self.invalid_count == 0
    }

    pub fn tool_succeeded(&self, endpoint: Endpoint) -> bool {
        self.rounds
            .iter()
            .any(|r| r.tool_ok && r.tool.as_deref() == Some(endpoint.name()))
    }

    /// Calls attempted per endpoint.
    pub fn tool_calls(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for t in self.rounds.iter().filter_map(|r| r.tool.clone()) {
            *out.entry(t).or_default() += 1;
        }
        out
    }

    pub fn to_record(&self) -> PredictionRecord {
        PredictionRecord {
            id: self.id.clone(),
            answer_text: self.final_answer.clone(),
            searched: self.searched_image || self.searched_text,
            tool_calls: self.tool_calls(),
            rounds: self.rounds.len() as u32,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RolloutOptions {
    pub k_img: usize,
    pub k_text: usize,
    pub decode: DecodeSpec,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            k_img: 3,
            k_text: 5,
            decode: DecodeSpec::greedy(),
        }
    }
}

/// One rollout of at most three policy replies.
pub fn rollout(
    instance: &QaInstance,
    policy: &Gateway,
    opts: &RolloutOptions,
    tools: &dyn ToolClient,
    prompts: &Prompts,
) -> Result<Trajectory, GatewayError> {
    let options = lettered_options(&instance.options);
    let round1 = fill(
        &prompts.msr1_round1,
        &[("question", &instance.question), ("options", &options)],
    );
    let mut messages = vec![ChatMessage::user(round1.clone()).with_image(&instance.image)];
    let mut stage_prompt = round1;
    let mut traj = Trajectory {
        id: instance.id.clone(),
        rounds: Vec::new(),
        final_answer: String::new(),
        searched_image: false,
        searched_text: false,
        invalid_count: 0,
    };

    for index in 1..=MAX_ROUNDS {
        let generated = policy.complete(&messages, &opts.decode)?;
        messages.push(ChatMessage::assistant(generated.clone()));
        let action = parse_action(&generated);
        if action == Action::Invalid {
            traj.invalid_count += 1;
        }
        let mut round = RolloutRound {
            index,
            generated: generated.clone(),
            action: action.clone(),
            observation: String::new(),
            stage_prompt: String::new(),
            tool: None,
            request: None,
            tool_ok: false,
        };
        if index == MAX_ROUNDS || matches!(action, Action::Answer(_)) {
            traj.final_answer = extract_answer(&generated);
            traj.rounds.push(round);
            break;
        }
        let call = match &action {
            Action::ImageSearch => {
                traj.searched_image = true;
                Some((
                    Endpoint::ImgAnn,
                    json!({ "img": instance.image, "top_k": opts.k_img }),
                    ObservationKind::Image,
                    &prompts.msr1_after_image,
                ))
            }
            Action::TextSearch(q) => {
                traj.searched_text = true;
                Some((
                    Endpoint::TextAnn,
                    json!({ "query": q, "top_k": opts.k_text }),
                    ObservationKind::Text,
                    &prompts.msr1_after_text,
                ))
            }
            _ => None,
        };
        match call {
            Some((endpoint, body, kind, next_prompt)) => {
                round.observation = match tools.ann(endpoint, &body) {
                    Ok(records) => {
                        round.tool_ok = true;
                        format_observation(&records, kind)
                    }
                    Err(e) => error_observation(endpoint, &e.message),
                };
                round.tool = Some(endpoint.name().to_string());
                round.request = Some(body);
                stage_prompt = fill(
                    next_prompt,
                    &[("question", &instance.question), ("options", &options)],
                );
                messages.push(ChatMessage::observation(round.observation.clone()));
            }
            None => log::debug!("{}: invalid action in round {index}", instance.id),
        }
        round.stage_prompt = stage_prompt.clone();
        messages.push(ChatMessage::user(stage_prompt.clone()));
        traj.rounds.push(round);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardScheme {
    #[default]
    Original,
    Game,
}

impl FromStr for RewardScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(RewardScheme::Original),
            "game" => Ok(RewardScheme::Game),
            other => Err(format!("unknown reward scheme `{other}` (expected original or game)")),
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardScheme::Original => "original",
            RewardScheme::Game => "game",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub answer: f64,
    pub format: f64,
    pub tool: f64,
    pub no_search_penalty: f64,
    pub game_bonus: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            answer: 1.0,
            format: 0.1,
            tool: 0.05,
            no_search_penalty: -0.5,
            game_bonus: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_ans: f64,
    pub r_format: f64,
    /// Tool validity reward, including the game scheme's trajectory bonuses.
    pub r_tool: f64,
    pub penalty: f64,
    pub total: f64,
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn compute_reward(
    traj: &Trajectory,
    gold: &str,
    options: &[String],
    scheme: RewardScheme,
    w: &RewardWeights,
) -> Result<RewardBreakdown, String> {
    let gold_idx = options
        .iter()
        .position(|o| o == gold)
        .ok_or_else(|| format!("gold answer `{gold}` is not among the options"))?;
    let correct = match_answer(&traj.final_answer, options) == Some(gold_idx);
    let well_formed = traj.is_well_formed();
    let img_ok = traj.tool_succeeded(Endpoint::ImgAnn);
    let text_ok = traj.tool_succeeded(Endpoint::TextAnn);

    let r_ans = if correct { w.answer } else { 0.0 };
    let r_format = if well_formed { w.format } else { 0.0 };
    let mut r_tool = w.tool * (img_ok as u8 + text_ok as u8) as f64;
    let mut penalty = 0.0;
    if scheme == RewardScheme::Game {
        if !correct && !traj.searched_image && !traj.searched_text {
            penalty = w.no_search_penalty;
        }
        if well_formed && img_ok {
            r_tool += w.game_bonus;
            let img_round = traj.rounds.iter().position(|r| r.action == Action::ImageSearch);
            let text_round = traj.rounds.iter().position(|r| matches!(r.action, Action::TextSearch(_)));
            if text_ok && matches!((img_round, text_round), (Some(i), Some(t)) if i < t) {
                r_tool += w.game_bonus;
            }
        }
    }
    Ok(RewardBreakdown {
        r_ans,
        r_format,
        r_tool: round9(r_tool),
        penalty,
        total: round9(r_ans + r_format + r_tool + penalty),
    })
}

pub const ADVANTAGE_EPS: f64 = 1e-8;

/// Group-standardized rewards using the population standard deviation.
pub fn normalize_advantages(rewards: &[f64]) -> Result<Vec<f64>, String> {
    if rewards.len() < 2 {
        return Err(format!("a group needs at least 2 rewards, got {}", rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err("rewards must be finite".into());
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 || rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std.max(ADVANTAGE_EPS)).collect())
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    pub sample: usize,
    pub scheme: RewardScheme,
    pub trajectory: Trajectory,
    pub reward: RewardBreakdown,
    pub advantage: f64,
}

/// `group_size` rollouts of one instance with rewards and advantages.
///
/// Sampled decoding uses seed `decode.seed + i` for sample `i`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_group(
    instance: &QaInstance,
    group_size: usize,
    policy: &Gateway,
    opts: &RolloutOptions,
    tools: &dyn ToolClient,
    prompts: &Prompts,
    scheme: RewardScheme,
    weights: &RewardWeights,
) -> Result<Vec<TrajectoryRecord>, String> {
    if group_size < 2 {
        return Err(format!("group size must be at least 2, got {group_size}"));
    }
    let mut trajs = Vec::with_capacity(group_size);
    for i in 0..group_size {
        let mut o = *opts;
        o.decode.seed = opts.decode.seed.wrapping_add(i as u64);
        let t = rollout(instance, policy, &o, tools, prompts).map_err(|e| e.to_string())?;
        let r = compute_reward(&t, &instance.answer, &instance.options, scheme, weights)?;
        trajs.push((t, r));
    }
    let totals: Vec<f64> = trajs.iter().map(|(_, r)| r.total).collect();
    let adv = normalize_advantages(&totals)?;
    Ok(trajs
        .into_iter()
        .zip(adv)
        .enumerate()
        .map(|(i, ((trajectory, reward), advantage))| TrajectoryRecord {
            id: instance.id.clone(),
            sample: i,
            scheme,
            trajectory,
            reward,
            advantage,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{ImageEntry, TextChunk};

    #[test]
    fn parses_single_actions() {
        assert_eq!(parse_action("<reason>x</reason><answer>Titanic</answer>"), Action::Answer("Titanic".into()));
        assert_eq!(parse_action("<reason>y</reason><search><img></search>"), Action::ImageSearch);
        assert_eq!(parse_action("<text_search> 雷电将军 技能 </text_search>"), Action::TextSearch("雷电将军 技能".into()));
    }

    #[test]
    fn multiple_or_missing_actions_are_invalid() {
        assert_eq!(parse_action("<answer>A</answer><text_search>q</text_search>"), Action::Invalid);
        assert_eq!(parse_action("just prose"), Action::Invalid);
        assert_eq!(parse_action("<text_search>  </text_search>"), Action::Invalid);
        assert_eq!(
            parse_action("<reason><search><img></search> maybe</reason><answer>B</answer>"),
            Action::Answer("B".into())
        );
    }

    #[test]
    fn extract_first_answer() {
        assert_eq!(extract_answer("<answer> 2层 </answer>"), "2层");
        assert_eq!(extract_answer("no tags here"), "");
        assert_eq!(extract_answer("<answer>a</answer><answer>b</answer>"), "a");
    }

    #[test]
    fn observation_rendering() {
        assert_eq!(format_observation(&[], ObservationKind::Text), "<information>无结果</information>");
        let t = ScoredRecord {
            payload: Payload::Text(TextChunk { chunk_id: "c".into(), title: "T".into(), content: "C".into() }),
            score: 0.9,
        };
        let obs = format_observation(&[t], ObservationKind::Text);
        assert!(obs.starts_with("<information>") && obs.ends_with("</information>"));
        assert!(obs.contains('T') && obs.contains('C') && obs.contains("0.9"));
        let imgs: Vec<_> = (0..3)
            .map(|i| ScoredRecord {
                payload: Payload::Image(ImageEntry {
                    pid: format!("p{i}"),
                    img: String::new(),
                    query: format!("E{i}"),
                    game: "G".into(),
                }),
                score: 0.9 - i as f64 * 0.1,
            })
            .collect();
        let obs = format_observation(&imgs, ObservationKind::Image);
        let (a, b, c) = (obs.find("E0").unwrap(), obs.find("E1").unwrap(), obs.find("E2").unwrap());
        assert!(a < b && b < c);
    }

    #[test]
    fn advantages() {
        let a = normalize_advantages(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        for (x, y) in a.iter().zip([1.0, -1.0, 1.0, -1.0]) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(normalize_advantages(&[0.3, 0.3, 0.3]).unwrap(), vec![0.0; 3]);
        assert!(normalize_advantages(&[1.0]).is_err());
    }
}
