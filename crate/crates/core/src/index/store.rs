//! On-disk index files and their JSONL inputs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bm25::{indexed_text, Bm25Index, Bm25Params};
use super::dense::{DenseIndex, Vector};
use super::embed::{combine_multimodal, HashingEmbedder};
use super::record::{ImageEntry, MultimodalEntry, Payload, TextChunk};
use super::IndexError;
use crate::jsonl::{self, JsonlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Text,
    Image,
    Multimodal,
    Bm25,
}

impl std::str::FromStr for IndexKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "image" => Ok(Self::Image),
            "multimodal" => Ok(Self::Multimodal),
            "bm25" => Ok(Self::Bm25),
            other => Err(format!("unknown index kind `{other}`")),
        }
    }
}

impl std::fmt::Display for IndexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Image => "image",
            Self::Multimodal => "multimodal",
            Self::Bm25 => "bm25",
        })
    }
}

/// One line of a vector sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRow {
    pub id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("expected a {expected:?} index in {path}")]
    WrongKind { expected: IndexKind, path: String },
    #[error("{0}")]
    Missing(String),
}

/// A built index as written by `index build`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum IndexFile {
    Text(DenseIndex),
    Image(DenseIndex),
    Multimodal(DenseIndex),
    Bm25(Bm25Index),
}

impl IndexFile {
    pub fn kind(&self) -> IndexKind {
        match self {
            IndexFile::Text(_) => IndexKind::Text,
            IndexFile::Image(_) => IndexKind::Image,
            IndexFile::Multimodal(_) => IndexKind::Multimodal,
            IndexFile::Bm25(_) => IndexKind::Bm25,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let text = serde_json::to_string(self).expect("index serializes");
        fs::write(path, text).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: display.clone(),
            source,
        })?;
        let file: IndexFile =
            serde_json::from_str(&text).map_err(|source| StoreError::Json { path: display, source })?;
        Ok(match file {
            IndexFile::Text(i) => IndexFile::Text(i.rebuild()?),
            IndexFile::Image(i) => IndexFile::Image(i.rebuild()?),
            IndexFile::Multimodal(i) => IndexFile::Multimodal(i.rebuild()?),
            IndexFile::Bm25(i) => IndexFile::Bm25(i.rebuild()?),
        })
    }

    pub fn load_dense(path: &Path, expected: IndexKind) -> Result<DenseIndex, StoreError> {
        match (Self::load(path)?, expected) {
            (IndexFile::Text(i), IndexKind::Text)
            | (IndexFile::Image(i), IndexKind::Image)
            | (IndexFile::Multimodal(i), IndexKind::Multimodal) => Ok(i),
            _ => Err(StoreError::WrongKind {
                expected,
                path: path.display().to_string(),
            }),
        }
    }

    pub fn load_bm25(path: &Path) -> Result<Bm25Index, StoreError> {
        match Self::load(path)? {
            IndexFile::Bm25(i) => Ok(i),
            _ => Err(StoreError::WrongKind {
                expected: IndexKind::Bm25,
                path: path.display().to_string(),
            }),
        }
    }
}

/// Reads a vector sidecar into an id → vector table, rejecting duplicates.
pub fn load_vector_table(path: &Path) -> Result<HashMap<String, Vector>, StoreError> {
    let rows: Vec<VectorRow> = jsonl::read(path)?;
    let mut table = HashMap::with_capacity(rows.len());
    for row in rows {
        let v = Vector::new(row.vector).map_err(|_| IndexError::NonFinite { id: row.id.clone() })?;
        if table.insert(row.id.clone(), v).is_some() {
            return Err(IndexError::DuplicateId(row.id).into());
        }
    }
    Ok(table)
}

fn join_vectors(
    payloads: Vec<Payload>,
    table: &HashMap<String, Vector>,
) -> Result<(usize, Vec<(Payload, Vector)>), StoreError> {
    let mut dim = None;
    let mut entries = Vec::with_capacity(payloads.len());
    for p in payloads {
        let v = table
            .get(p.id())
            .cloned()
            .ok_or_else(|| IndexError::MissingVector(p.id().to_string()))?;
        dim.get_or_insert(v.dim());
        entries.push((p, v));
    }
    let dim = dim.ok_or_else(|| StoreError::Missing("corpus is empty".into()))?;
    Ok((dim, entries))
}

/// Builds an index from a corpus JSONL and (for dense kinds) a vector sidecar keyed by
/// `chunk_id`, `pid` or multimodal `id`.
pub fn build_index_file(
    kind: IndexKind,
    corpus: &Path,
    vectors: Option<&Path>,
    params: Bm25Params,
) -> Result<IndexFile, StoreError> {
    if kind == IndexKind::Bm25 {
        let docs: Vec<TextChunk> = jsonl::read(corpus)?;
        return Ok(IndexFile::Bm25(Bm25Index::build(docs, params)?));
    }
    let vectors = vectors.ok_or_else(|| StoreError::Missing("--vectors is required for dense indices".into()))?;
    let table = load_vector_table(vectors)?;
    let payloads: Vec<Payload> = match kind {
        IndexKind::Text => {
            let docs: Vec<TextChunk> = jsonl::read(corpus)?;
            if let Some(d) = docs.iter().find(|d| d.content.is_empty()) {
                return Err(IndexError::EmptyContent(d.chunk_id.clone()).into());
            }
            docs.into_iter().map(Payload::Text).collect()
        }
        IndexKind::Image => jsonl::read::<ImageEntry>(corpus)?
            .into_iter()
            .map(Payload::Image)
            .collect(),
        IndexKind::Multimodal => jsonl::read::<MultimodalEntry>(corpus)?
            .into_iter()
            .map(Payload::Multimodal)
            .collect(),
        IndexKind::Bm25 => unreachable!(),
    };
    let (dim, entries) = join_vectors(payloads, &table)?;
    let index = DenseIndex::build(dim, entries)?;
    Ok(match kind {
        IndexKind::Text => IndexFile::Text(index),
        IndexKind::Image => IndexFile::Image(index),
        _ => IndexFile::Multimodal(index),
    })
}

/// Produces a vector sidecar for a text or multimodal corpus with the hashing embedder.
///
/// Multimodal entries combine the text embedding of `title + content` with the vector of
/// `source_best_img` looked up in `image_table`.
pub fn embed_corpus(
    kind: IndexKind,
    corpus: &Path,
    embedder: HashingEmbedder,
    image_table: Option<&HashMap<String, Vector>>,
) -> Result<Vec<VectorRow>, StoreError> {
    match kind {
        IndexKind::Text | IndexKind::Bm25 => {
            let docs: Vec<TextChunk> = jsonl::read(corpus)?;
            Ok(docs
                .iter()
                .map(|d| VectorRow {
                    id: d.chunk_id.clone(),
                    vector: embedder.embed(&indexed_text(d)).into_inner(),
                })
                .collect())
        }
        IndexKind::Multimodal => {
            let table = image_table
                .ok_or_else(|| StoreError::Missing("multimodal embedding needs an image table".into()))?;
            let docs: Vec<MultimodalEntry> = jsonl::read(corpus)?;
            docs.iter()
                .map(|d| {
                    let img = table
                        .get(&d.source_best_img)
                        .ok_or_else(|| IndexError::MissingVector(d.source_best_img.clone()))?;
                    let text = embedder.embed(&format!("{}\n{}", d.title, d.content));
                    Ok(VectorRow {
                        id: d.id.clone(),
                        vector: combine_multimodal(text.as_slice(), img.as_slice()).into_inner(),
                    })
                })
                .collect()
        }
        IndexKind::Image => Err(StoreError::Missing(
            "image vectors come from an encoder sidecar and cannot be derived from text".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_reload_dense_and_bm25() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("chunks.jsonl");
        let vecs = dir.path().join("vecs.jsonl");
        fs::write(
            &corpus,
            "{\"chunk_id\":\"a\",\"title\":\"T\",\"content\":\"dust2 map\"}\n{\"chunk_id\":\"b\",\"title\":\"U\",\"content\":\"mirage\"}\n",
        )
        .unwrap();
        fs::write(
            &vecs,
            "{\"id\":\"a\",\"vector\":[1.0,0.0]}\n{\"id\":\"b\",\"vector\":[0.0,1.0]}\n",
        )
        .unwrap();

        let text = build_index_file(IndexKind::Text, &corpus, Some(&vecs), Bm25Params::default()).unwrap();
        let out = dir.path().join("text.json");
        text.save(&out).unwrap();
        let idx = IndexFile::load_dense(&out, IndexKind::Text).unwrap();
        assert_eq!(idx.search(&[1.0, 0.0], 1).unwrap()[0].id(), "a");
        assert!(IndexFile::load_bm25(&out).is_err());

        let bm = build_index_file(IndexKind::Bm25, &corpus, None, Bm25Params::default()).unwrap();
        bm.save(&out).unwrap();
        let idx = IndexFile::load_bm25(&out).unwrap();
        assert_eq!(idx.search("dust2", 3).unwrap()[0].id(), "a");
    }

    #[test]
    fn missing_vector_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.jsonl");
        let vecs = dir.path().join("v.jsonl");
        fs::write(&corpus, "{\"pid\":\"p1\",\"img\":\"a.jpg\",\"query\":\"q\",\"game\":\"g\"}\n").unwrap();
        fs::write(&vecs, "{\"id\":\"other\",\"vector\":[1.0]}\n").unwrap();
        let err = build_index_file(IndexKind::Image, &corpus, Some(&vecs), Bm25Params::default()).unwrap_err();
        assert!(err.to_string().contains("p1"));
    }
}
