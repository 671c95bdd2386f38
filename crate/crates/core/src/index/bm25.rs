use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::record::{rank_order, Payload, ScoredRecord, TextChunk};
use super::tokenize::tokenize;
use super::IndexError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, IndexError> {
        let p = Self { k1, b };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(IndexError::Invalid(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::Invalid(format!("b must be in [0,1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Okapi BM25 over [`TextChunk`]s, indexing `title` and `content` together.
///
/// IDF is `ln(1 + (N - df + 0.5) / (df + 0.5))`, which is always positive, so every
/// document sharing a term with the query gets a strictly positive score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bm25Index {
    params: Bm25Params,
    docs: Vec<TextChunk>,
    #[serde(skip)]
    postings: HashMap<String, Vec<(usize, u32)>>,
    #[serde(skip)]
    doc_len: Vec<usize>,
    #[serde(skip)]
    avg_len: f64,
}

/// The text a chunk is indexed under.
pub(crate) fn indexed_text(chunk: &TextChunk) -> String {
    format!("{}\n{}", chunk.title, chunk.content)
}

impl Bm25Index {
    pub fn build(docs: Vec<TextChunk>, params: Bm25Params) -> Result<Self, IndexError> {
        params.validate()?;
        let mut seen = HashSet::new();
        for d in &docs {
            if !seen.insert(d.chunk_id.as_str()) {
                return Err(IndexError::DuplicateId(d.chunk_id.clone()));
            }
            if d.content.is_empty() {
                return Err(IndexError::EmptyContent(d.chunk_id.clone()));
            }
        }
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            let tokens = tokenize(&indexed_text(d));
            doc_len.push(tokens.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((i, n));
            }
        }
        let total: usize = doc_len.iter().sum();
        let avg_len = if docs.is_empty() || total == 0 {
            1.0
        } else {
            total as f64 / docs.len() as f64
        };
        Ok(Self {
            params,
            docs,
            postings,
            doc_len,
            avg_len,
        })
    }

    pub(crate) fn rebuild(self) -> Result<Self, IndexError> {
        Self::build(self.docs, self.params)
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn docs(&self) -> &[TextChunk] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    /// Scores every document sharing at least one term with `query`; others are omitted.
    pub fn search(&self, query: &str, top_k: usize) -> Result<Vec<ScoredRecord>, IndexError> {
        if top_k == 0 {
            return Err(IndexError::ZeroTopK);
        }
        let mut terms = tokenize(query);
        let mut seen = HashSet::new();
        terms.retain(|t| seen.insert(t.clone()));

        let Bm25Params { k1, b } = self.params;
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(list.len());
            for &(doc, tf) in list {
                let tf = tf as f64;
                let norm = 1.0 - b + b * self.doc_len[doc] as f64 / self.avg_len;
                *scores.entry(doc).or_default() += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
        }
        let mut hits: Vec<(f64, usize)> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(d, s)| (s, d))
            .collect();
        hits.sort_by(|a, b| {
            rank_order(a.0, &self.docs[a.1].chunk_id, b.0, &self.docs[b.1].chunk_id)
        });
        hits.truncate(top_k);
        Ok(hits
            .into_iter()
            .map(|(score, d)| ScoredRecord {
                payload: Payload::Text(self.docs[d].clone()),
                score,
            })
            .collect())
    }
}
