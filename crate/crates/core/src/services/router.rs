use std::collections::HashMap;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::knowledge::KnowledgeBase;
use super::{ServiceConfig, ServiceError};
use crate::index::{
    combine_multimodal, load_vector_table, Bm25Index, DenseIndex, HashingEmbedder, IndexFile,
    IndexKind, Payload, ScoredRecord, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Bm25Ann,
    TextAnn,
    ImgAnn,
    MultimodalAnn,
    KnLookup,
    Health,
}

impl Endpoint {
    pub const ALL: [Endpoint; 6] = [
        Endpoint::Bm25Ann,
        Endpoint::TextAnn,
        Endpoint::ImgAnn,
        Endpoint::MultimodalAnn,
        Endpoint::KnLookup,
        Endpoint::Health,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Bm25Ann => "/bm25_ann",
            Endpoint::TextAnn => "/text_ann",
            Endpoint::ImgAnn => "/img_ann",
            Endpoint::MultimodalAnn => "/multimodal_ann",
            Endpoint::KnLookup => "/kn_lookup",
            Endpoint::Health => "/health",
        }
    }

    /// The tool name used by planners and traces (`img_ann`, ...).
    pub fn name(self) -> &'static str {
        &self.path()[1..]
    }

    pub fn from_path(path: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.path() == path)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    fn method(self) -> &'static str {
        match self {
            Endpoint::Health => "GET",
            _ => "POST",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceResponse {
    pub status: u16,
    pub body: Value,
}

impl ServiceResponse {
    fn ok(body: Value) -> Self {
        Self { status: 200, body }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }
}

/// Read-only state behind every endpoint. Handlers take `&self`, so nothing a request
/// does can alter an index.
#[derive(Debug, Default)]
pub struct ServiceState {
    pub bm25: Option<Bm25Index>,
    pub text: Option<DenseIndex>,
    pub image: Option<DenseIndex>,
    pub multimodal: Option<DenseIndex>,
    /// Image path → embedding, used in place of an image encoder.
    pub image_table: HashMap<String, Vector>,
    pub knowledge: Option<KnowledgeBase>,
}

impl ServiceState {
    pub fn load(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let mut state = ServiceState::default();
        if let Some(p) = &cfg.bm25_index {
            state.bm25 = Some(IndexFile::load_bm25(p)?);
        }
        if let Some(p) = &cfg.text_index {
            state.text = Some(IndexFile::load_dense(p, IndexKind::Text)?);
        }
        if let Some(p) = &cfg.image_index {
            state.image = Some(IndexFile::load_dense(p, IndexKind::Image)?);
        }
        if let Some(p) = &cfg.multimodal_index {
            state.multimodal = Some(IndexFile::load_dense(p, IndexKind::Multimodal)?);
        }
        if let Some(p) = &cfg.image_table {
            state.image_table = load_vector_table(p)?;
        }
        if !cfg.knowledge_files.is_empty() {
            state.knowledge = Some(KnowledgeBase::load(&cfg.knowledge_files)?);
        }
        state.register_gallery_images();
        Ok(state)
    }

    /// Only the knowledge-lookup service (and `/health`).
    pub fn knowledge_only(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        Ok(ServiceState {
            knowledge: Some(KnowledgeBase::load(&cfg.knowledge_files)?),
            ..Default::default()
        })
    }

    /// Makes every gallery image resolvable by its own path.
    pub fn register_gallery_images(&mut self) {
        let Some(image) = &self.image else { return };
        for (p, v) in image.payloads().iter().zip(image.vectors()) {
            if let Payload::Image(e) = p {
                self.image_table.entry(e.img.clone()).or_insert_with(|| v.clone());
            }
        }
    }

    pub fn serves(&self, endpoint: Endpoint) -> bool {
        match endpoint {
            Endpoint::Bm25Ann => self.bm25.is_some(),
            Endpoint::TextAnn => self.text.is_some(),
            Endpoint::ImgAnn => self.image.is_some(),
            Endpoint::MultimodalAnn => self.multimodal.is_some(),
            Endpoint::KnLookup => self.knowledge.is_some(),
            Endpoint::Health => true,
        }
    }

    /// SHA-256 over the serialized indices and knowledge base.
    pub fn digest(&self) -> String {
        let mut table: Vec<_> = self.image_table.iter().collect();
        table.sort_by(|a, b| a.0.cmp(b.0));
        let snapshot = json!({
            "bm25": self.bm25,
            "text": self.text,
            "image": self.image,
            "multimodal": self.multimodal,
            "image_table": table,
            "knowledge": self.knowledge,
        });
        hex::encode(Sha256::digest(snapshot.to_string().as_bytes()))
    }

    pub fn route(&self, method: &str, path: &str, body: &[u8]) -> ServiceResponse {
        let Some(endpoint) = Endpoint::from_path(path) else {
            return ServiceResponse::error(404, format!("unknown endpoint `{path}`"));
        };
        if !self.serves(endpoint) {
            return ServiceResponse::error(404, format!("`{path}` is not served by this process"));
        }
        if !method.eq_ignore_ascii_case(endpoint.method()) {
            return ServiceResponse::error(
                405,
                format!("`{path}` only accepts {}", endpoint.method()),
            );
        }
        if endpoint == Endpoint::Health {
            let n = self.knowledge.as_ref().map_or(0, KnowledgeBase::num_unique_queries);
            return ServiceResponse::ok(json!({ "status": "ok", "num_unique_queries": n }));
        }
        let request = match serde_json::from_slice::<Value>(body) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return ServiceResponse::error(400, "request body must be a JSON object"),
            Err(e) => return ServiceResponse::error(400, format!("malformed JSON body: {e}")),
        };
        match self.dispatch(endpoint, &request) {
            Ok(body) => ServiceResponse::ok(body),
            Err(resp) => resp,
        }
    }

    fn dispatch(&self, endpoint: Endpoint, req: &Map<String, Value>) -> Result<Value, ServiceResponse> {
        let records = match endpoint {
            Endpoint::KnLookup => {
                let queries = string_list(req, "queries")?;
                let kb = self.knowledge.as_ref().expect("checked by serves");
                return Ok(json!({ "results": kb.lookup(&queries) }));
            }
            Endpoint::Bm25Ann => {
                let query = string_field(req, "query")?;
                let top_k = top_k(req)?;
                let index = self.bm25.as_ref().expect("checked by serves");
                index.search(&query, top_k).map_err(internal)?
            }
            Endpoint::TextAnn => {
                let query = string_field(req, "query")?;
                let top_k = top_k(req)?;
                let index = self.text.as_ref().expect("checked by serves");
                let v = HashingEmbedder::new(index.dim()).embed(&query);
                index.search(v.as_slice(), top_k).map_err(internal)?
            }
            Endpoint::ImgAnn => {
                let img = string_field(req, "img")?;
                let top_k = top_k(req)?;
                let v = self.image_vector(&img)?;
                let index = self.image.as_ref().expect("checked by serves");
                index.search(v.as_slice(), top_k).map_err(internal)?
            }
            Endpoint::MultimodalAnn => {
                let query = string_field(req, "query")?;
                let img = string_field(req, "image_path")?;
                let top_k = top_k(req)?;
                let index = self.multimodal.as_ref().expect("checked by serves");
                let image = self.image_vector(&img)?;
                if image.dim() != index.dim() {
                    return Err(internal(format!(
                        "image vector dimension {} does not match multimodal index dimension {}",
                        image.dim(),
                        index.dim()
                    )));
                }
                let text = HashingEmbedder::new(index.dim()).embed(&query);
                let v = combine_multimodal(text.as_slice(), image.as_slice());
                index.search(v.as_slice(), top_k).map_err(internal)?
            }
            Endpoint::Health => unreachable!("handled in route"),
        };
        Ok(scores_body(&records))
    }

    fn image_vector(&self, path: &str) -> Result<&Vector, ServiceResponse> {
        self.image_table
            .get(path)
            .ok_or_else(|| ServiceResponse::error(400, format!("image not in embedding table: `{path}`")))
    }
}

fn scores_body(records: &[ScoredRecord]) -> Value {
    json!({ "scores": records })
}

fn internal(e: impl std::fmt::Display) -> ServiceResponse {
    ServiceResponse::error(500, e.to_string())
}

fn string_field(req: &Map<String, Value>, key: &str) -> Result<String, ServiceResponse> {
    match req.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(ServiceResponse::error(400, format!("`{key}` must be a string"))),
        None => Err(ServiceResponse::error(400, format!("missing field `{key}`"))),
    }
}

fn string_list(req: &Map<String, Value>, key: &str) -> Result<Vec<String>, ServiceResponse> {
    let bad = || ServiceResponse::error(400, format!("`{key}` must be a list of strings"));
    match req.get(key) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(bad))
            .collect(),
        Some(_) => Err(bad()),
        None => Err(ServiceResponse::error(400, format!("missing field `{key}`"))),
    }
}

fn top_k(req: &Map<String, Value>) -> Result<usize, ServiceResponse> {
    match req.get("top_k") {
        Some(v) => match v.as_i64() {
            Some(k) if k >= 1 => Ok(k as usize),
            Some(k) => Err(ServiceResponse::error(400, format!("`top_k` must be >= 1, got {k}"))),
            None => Err(ServiceResponse::error(400, "`top_k` must be an integer")),
        },
        None => Err(ServiceResponse::error(400, "missing field `top_k`")),
    }
}
