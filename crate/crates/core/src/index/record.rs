use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub chunk_id: String,
    pub title: String,
    pub content: String,
}

/// A gallery image tagged with the core-element query it depicts (possibly empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub pid: String,
    pub img: String,
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub game: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultimodalEntry {
    pub id: String,
    pub title: String,
    pub content: String,
    pub source_query: String,
    pub source_best_img: String,
}

/// The document side of a retrieval hit.
///
/// Serialized untagged so that records come out flat on the wire, e.g.
/// `{"pid": ..., "img": ..., "query": ..., "game": ..., "score": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Image(ImageEntry),
    Text(TextChunk),
    Multimodal(MultimodalEntry),
}

impl Payload {
    pub fn id(&self) -> &str {
        match self {
            Payload::Image(e) => &e.pid,
            Payload::Text(c) => &c.chunk_id,
            Payload::Multimodal(m) => &m.id,
        }
    }
}

impl From<TextChunk> for Payload {
    fn from(c: TextChunk) -> Self {
        Payload::Text(c)
    }
}

impl From<ImageEntry> for Payload {
    fn from(e: ImageEntry) -> Self {
        Payload::Image(e)
    }
}

impl From<MultimodalEntry> for Payload {
    fn from(m: MultimodalEntry) -> Self {
        Payload::Multimodal(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    #[serde(flatten)]
    pub payload: Payload,
    pub score: f64,
}

impl ScoredRecord {
    pub fn id(&self) -> &str {
        self.payload.id()
    }

    /// The core-element query of an image hit, or the source query of a multimodal hit.
    pub fn element_query(&self) -> Option<&str> {
        match &self.payload {
            Payload::Image(e) => Some(&e.query),
            Payload::Multimodal(m) => Some(&m.source_query),
            Payload::Text(_) => None,
        }
    }
}

/// Score descending, then id ascending.
pub(crate) fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

pub fn sort_records(records: &mut [ScoredRecord]) {
    records.sort_by(|a, b| rank_order(a.score, a.id(), b.score, b.id()));
}
