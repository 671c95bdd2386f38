use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::dataset::{Category, Difficulty, QaInstance};
use super::matching::match_answer;

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub answer_text: String,
    #[serde(default)]
    pub searched: bool,
    #[serde(default)]
    pub tool_calls: BTreeMap<String, u64>,
    #[serde(default)]
    pub rounds: u32,
}

impl PredictionRecord {
    pub fn total_tool_calls(&self) -> u64 {
        self.tool_calls.values().sum()
    }

    pub fn did_search(&self) -> bool {
        self.searched || self.total_tool_calls() > 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Quadrant {
    pub correct_with_search: f64,
    pub correct_without_search: f64,
    pub wrong_with_search: f64,
    pub wrong_without_search: f64,
}

impl Quadrant {
    pub fn sum(&self) -> f64 {
        self.correct_with_search + self.correct_without_search + self.wrong_with_search + self.wrong_without_search
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundBucket {
    pub count: u64,
    pub accuracy: f64,
}

/// Aggregated metrics of one run. Percentages are in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub setting: String,
    pub total: u64,
    pub accuracy: f64,
    pub sr: f64,
    pub per_category: BTreeMap<Category, f64>,
    pub per_difficulty: BTreeMap<Difficulty, f64>,
    pub tool_calls: BTreeMap<String, u64>,
    pub round_histogram: BTreeMap<u32, RoundBucket>,
    pub quadrant: Quadrant,
    /// Predictions whose text matched no option.
    pub unmatched: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("prediction for unknown instance `{0}`")]
    UnknownId(String),
    #[error("no prediction for instance `{0}`")]
    MissingId(String),
    #[error("more than one prediction for instance `{0}`")]
    DuplicateId(String),
    #[error("no instances to score")]
    Empty,
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 * 100.0 / den as f64
    }
}

#[derive(Default)]
struct Tally {
    n: u64,
    correct: u64,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.n += 1;
        self.correct += correct as u64;
    }

    fn pct(&self) -> f64 {
        pct(self.correct, self.n)
    }
}

pub fn score_run(
    setting: &str,
    predictions: &[PredictionRecord],
    instances: &[QaInstance],
) -> Result<RunReport, ScoreError> {
    if instances.is_empty() {
        return Err(ScoreError::Empty);
    }
    let by_id: HashMap<&str, &QaInstance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut seen: HashMap<&str, &PredictionRecord> = HashMap::new();
    for p in predictions {
        if !by_id.contains_key(p.id.as_str()) {
            return Err(ScoreError::UnknownId(p.id.clone()));
        }
        if seen.insert(p.id.as_str(), p).is_some() {
            return Err(ScoreError::DuplicateId(p.id.clone()));
        }
    }

    let mut overall = Tally::default();
    let mut searched = 0u64;
    let mut unmatched = 0u64;
    let mut quad = [0u64; 4];
    let mut cats: BTreeMap<Category, Tally> = BTreeMap::new();
    let mut diffs: BTreeMap<Difficulty, Tally> = BTreeMap::new();
    let mut rounds: BTreeMap<u32, Tally> = BTreeMap::new();
    let mut tool_calls: BTreeMap<String, u64> = BTreeMap::new();

    for inst in instances {
        let p = seen.get(inst.id.as_str()).ok_or_else(|| ScoreError::MissingId(inst.id.clone()))?;
        let matched = match_answer(&p.answer_text, &inst.options);
        unmatched += matched.is_none() as u64;
        let correct = matched == Some(inst.gold_index());
        let did_search = p.did_search();
        overall.add(correct);
        searched += did_search as u64;
        quad[match (correct, did_search) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }] += 1;
        cats.entry(inst.category).or_default().add(correct);
        diffs.entry(inst.difficulty).or_default().add(correct);
        rounds.entry(p.rounds).or_default().add(correct);
        for (tool, n) in &p.tool_calls {
            *tool_calls.entry(tool.clone()).or_default() += n;
        }
    }

    let n = overall.n;
    Ok(RunReport {
        setting: setting.to_string(),
        total: n,
        accuracy: overall.pct(),
        sr: pct(searched, n),
        per_category: cats.into_iter().map(|(k, t)| (k, t.pct())).collect(),
        per_difficulty: diffs.into_iter().map(|(k, t)| (k, t.pct())).collect(),
        tool_calls,
        round_histogram: rounds
            .into_iter()
            .map(|(k, t)| (k, RoundBucket { count: t.n, accuracy: t.pct() }))
            .collect(),
        quadrant: Quadrant {
            correct_with_search: pct(quad[0], n),
            correct_without_search: pct(quad[1], n),
            wrong_with_search: pct(quad[2], n),
            wrong_without_search: pct(quad[3], n),
        },
        unmatched,
    })
}
