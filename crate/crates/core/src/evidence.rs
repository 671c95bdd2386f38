//! Evidence items and the ordered, digest-deduplicated pool agents accumulate.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::index::{Payload, ScoredRecord};
use crate::trace::digest_str;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    /// Tool that produced the item (`img_ann`, `text_ann`, `kn_lookup`, ...).
    pub source: String,
    pub text: String,
}

impl EvidenceItem {
    pub fn new(source: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            text: text.into(),
        }
    }

    /// Text payloads render as title and content, image payloads as element, game and path.
    pub fn from_record(source: &str, record: &ScoredRecord) -> Self {
        let text = match &record.payload {
            Payload::Text(c) => format!("{}\n{}", c.title, c.content),
            Payload::Image(e) => format!("{} | {} | {}", e.query, e.game, e.img),
            Payload::Multimodal(m) => format!("{}\n{}", m.title, m.content),
        };
        Self::new(source, text)
    }

    pub fn digest(&self) -> String {
        digest_str(&self.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<EvidenceItem>", into = "Vec<EvidenceItem>")]
pub struct EvidencePool {
    items: Vec<EvidenceItem>,
    digests: HashSet<String>,
}

impl From<Vec<EvidenceItem>> for EvidencePool {
    fn from(items: Vec<EvidenceItem>) -> Self {
        let mut pool = EvidencePool::default();
        pool.extend(items);
        pool
    }
}

impl From<EvidencePool> for Vec<EvidenceItem> {
    fn from(pool: EvidencePool) -> Self {
        pool.items
    }
}

impl EvidencePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `item` unless an item with the same text digest is present.
    pub fn insert(&mut self, item: EvidenceItem) -> bool {
        if self.digests.insert(item.digest()) {
            self.items.push(item);
            true
        } else {
            false
        }
    }

    /// Returns how many items were new.
    pub fn extend(&mut self, items: impl IntoIterator<Item = EvidenceItem>) -> usize {
        items.into_iter().filter(|i| self.insert(i.clone())).count()
    }

    pub fn items(&self) -> &[EvidenceItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Numbered list in insertion order.
    pub fn render(&self) -> String {
        self.render_within(usize::MAX)
    }

    /// Numbered list, most recent last. When the text exceeds `budget` characters the
    /// oldest items are dropped first and a note records how many were elided.
    pub fn render_within(&self, budget: usize) -> String {
        if self.items.is_empty() {
            return "无".to_string();
        }
        let lines: Vec<String> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| format!("{}. [{}] {}", i + 1, it.source, it.text))
            .collect();
        let mut used = 0usize;
        let mut keep_from = lines.len();
        for (i, line) in lines.iter().enumerate().rev() {
            let cost = line.chars().count() + 1;
            if used + cost > budget {
                break;
            }
            used += cost;
            keep_from = i;
        }
        let mut out = String::new();
        if keep_from > 0 {
            out.push_str(&format!("（已省略较早的 {keep_from} 条证据）\n"));
        }
        out.push_str(&lines[keep_from..].join("\n"));
        out
    }
}
