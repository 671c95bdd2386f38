use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::dataset::{Difficulty, QaInstance};
use super::score::ScoreError;
use crate::index::ScoredRecord;

/// One line of a hit-rate results file: a backend's ranked element list for an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedResult {
    pub id: String,
    pub backend: String,
    pub elements: Vec<String>,
}

/// Element names of the records in rank order, first occurrence kept.
pub fn ranked_elements(records: &[ScoredRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter_map(|r| r.element_query())
        .filter(|q| !q.trim().is_empty() && seen.insert(q.to_string()))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRateEntry {
    pub backend: String,
    /// `None` aggregates every difficulty.
    pub difficulty: Option<Difficulty>,
    pub k: usize,
    pub n: u64,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRateReport {
    pub entries: Vec<HitRateEntry>,
    /// Instances left out because they carry no gold element.
    pub excluded: u64,
}

impl HitRateReport {
    pub fn get(&self, backend: &str, difficulty: Option<Difficulty>, k: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.backend == backend && e.difficulty == difficulty && e.k == k)
            .map(|e| e.hit_rate)
    }
}

pub fn hitrate_at_k(
    results: &[RankedResult],
    instances: &[QaInstance],
    ks: &[usize],
) -> Result<HitRateReport, ScoreError> {
    let by_id: HashMap<&str, &QaInstance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();

    // (backend, difficulty) -> per-K hit counts and instance count
    let mut tallies: BTreeMap<(String, Option<Difficulty>), (u64, Vec<u64>)> = BTreeMap::new();
    let mut excluded: HashSet<&str> = HashSet::new();
    for r in results {
        let inst = by_id.get(r.id.as_str()).ok_or_else(|| ScoreError::UnknownId(r.id.clone()))?;
        let Some(gold) = inst.gold_element.as_deref() else {
            excluded.insert(inst.id.as_str());
            continue;
        };
        let rank = r.elements.iter().position(|e| e == gold);
        for diff in [None, Some(inst.difficulty)] {
            let slot = tallies
                .entry((r.backend.clone(), diff))
                .or_insert_with(|| (0, vec![0; ks.len()]));
            slot.0 += 1;
            for (i, &k) in ks.iter().enumerate() {
                if rank.is_some_and(|p| p < k) {
                    slot.1[i] += 1;
                }
            }
        }
    }

    let mut entries = Vec::new();
    for ((backend, difficulty), (n, hits)) in tallies {
        for (i, &k) in ks.iter().enumerate() {
            entries.push(HitRateEntry {
                backend: backend.clone(),
                difficulty,
                k,
                n,
                hit_rate: hits[i] as f64 / n as f64,
            });
        }
    }
    Ok(HitRateReport {
        entries,
        excluded: excluded.len() as u64,
    })
}
