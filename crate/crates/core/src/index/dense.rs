use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::record::{rank_order, Payload, ScoredRecord};
use super::IndexError;

/// A finite embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self, IndexError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite { id: "<query>".into() });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; zero when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

/// Exact brute-force cosine index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseIndex {
    dim: usize,
    payloads: Vec<Payload>,
    vectors: Vec<Vector>,
    #[serde(skip)]
    norms: Vec<f64>,
}

impl DenseIndex {
    pub fn build(dim: usize, entries: Vec<(Payload, Vector)>) -> Result<Self, IndexError> {
        if dim == 0 {
            return Err(IndexError::Invalid("dimension must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut payloads = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        for (payload, vector) in entries {
            let id = payload.id().to_string();
            if vector.dim() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    got: vector.dim(),
                });
            }
            if vector.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(IndexError::NonFinite { id });
            }
            if !seen.insert(id.clone()) {
                return Err(IndexError::DuplicateId(id));
            }
            payloads.push(payload);
            vectors.push(vector);
        }
        let norms = vectors.iter().map(Vector::norm).collect();
        Ok(Self {
            dim,
            payloads,
            vectors,
            norms,
        })
    }

    /// Recomputes derived state after deserialization.
    pub(crate) fn rebuild(self) -> Result<Self, IndexError> {
        let entries = self.payloads.into_iter().zip(self.vectors).collect();
        Self::build(self.dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn payloads(&self) -> &[Payload] {
        &self.payloads
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    /// Returns the `min(top_k, len)` most similar entries by cosine similarity.
    pub fn search(&self, query: &[f64], top_k: usize) -> Result<Vec<ScoredRecord>, IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        if top_k == 0 {
            return Err(IndexError::ZeroTopK);
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite { id: "<query>".into() });
        }
        let qn = norm(query);
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (v, &n))| {
                let s = if qn == 0.0 || n == 0.0 {
                    0.0
                } else {
                    let dot: f64 = v.as_slice().iter().zip(query).map(|(x, y)| x * y).sum();
                    dot / (n * qn)
                };
                (s, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            rank_order(a.0, self.payloads[a.1].id(), b.0, self.payloads[b.1].id())
        };
        let k = top_k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, i)| ScoredRecord {
                payload: self.payloads[i].clone(),
                score,
            })
            .collect())
    }
}
