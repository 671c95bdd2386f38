#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use framesearch_core::eval::{load_dataset, QaInstance};
use framesearch_core::gateway::{Gateway, GatewayConfig};
use framesearch_core::index::{build_index_file, embed_corpus, Bm25Params, HashingEmbedder, IndexKind};
use framesearch_core::jsonl;
use framesearch_core::services::{InProcessTools, ServiceConfig, ServiceState};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn dataset() -> Vec<QaInstance> {
    load_dataset(&fixtures().join("dataset.jsonl")).expect("fixture dataset")
}

/// Builds every fixture index into `dir` and returns a config pointing at them.
pub fn build_fixture_config(dir: &Path) -> ServiceConfig {
    let fx = fixtures();
    let text_vecs = dir.join("text_vectors.jsonl");
    let rows = embed_corpus(IndexKind::Text, &fx.join("text_chunks.jsonl"), HashingEmbedder::new(64), None).unwrap();
    jsonl::write(&text_vecs, &rows).unwrap();

    let mut table = framesearch_core::index::load_vector_table(&fx.join("image_vectors.jsonl")).unwrap();
    for e in jsonl::read::<framesearch_core::index::ImageEntry>(&fx.join("gallery.jsonl")).unwrap() {
        let v = table[&e.pid].clone();
        table.insert(e.img, v);
    }
    let mm_vecs = dir.join("multimodal_vectors.jsonl");
    let rows = embed_corpus(IndexKind::Multimodal, &fx.join("multimodal.jsonl"), HashingEmbedder::new(8), Some(&table)).unwrap();
    jsonl::write(&mm_vecs, &rows).unwrap();

    let build = |kind, corpus: &str, vectors: Option<&Path>, out: &str| {
        let p = dir.join(out);
        build_index_file(kind, &fx.join(corpus), vectors, Bm25Params::default())
            .unwrap()
            .save(&p)
            .unwrap();
        p
    };
    ServiceConfig {
        host: "127.0.0.1".into(),
        port: None,
        knowledge_files: vec![fx.join("kn_part_1.jsonl"), fx.join("kn_part_2.jsonl")],
        bm25_index: Some(build(IndexKind::Bm25, "text_chunks.jsonl", None, "bm25.json")),
        text_index: Some(build(IndexKind::Text, "text_chunks.jsonl", Some(&text_vecs), "text.json")),
        image_index: Some(build(IndexKind::Image, "gallery.jsonl", Some(&fx.join("image_vectors.jsonl")), "image.json")),
        image_table: Some(fx.join("query_images.jsonl")),
        multimodal_index: Some(build(IndexKind::Multimodal, "multimodal.jsonl", Some(&mm_vecs), "multimodal.json")),
    }
}

pub fn fixture_state() -> Arc<ServiceState> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = build_fixture_config(dir.path());
    Arc::new(ServiceState::load(&cfg).unwrap())
}

pub fn fixture_tools() -> InProcessTools {
    InProcessTools::new(fixture_state())
}

/// The scripted gateway shipped with the fixtures.
pub fn fixture_gateway() -> Gateway {
    let cfg = GatewayConfig::load(&fixtures().join("stub_gateway.toml")).unwrap();
    Gateway::from_config(&cfg).unwrap().with_memory_trace()
}

use std::sync::Mutex;

use framesearch_core::gateway::ScriptRule;
use framesearch_core::services::{Endpoint, ToolClient, ToolError};
use serde_json::Value;

/// Records every request and optionally fails or empties chosen endpoints.
pub struct Recorder<T> {
    pub inner: T,
    pub calls: Mutex<Vec<(Endpoint, Value)>>,
    pub fail: Vec<Endpoint>,
    pub empty: Vec<Endpoint>,
}

impl<T: ToolClient> Recorder<T> {
    pub fn new(inner: T) -> Self {
        Self { inner, calls: Mutex::new(Vec::new()), fail: Vec::new(), empty: Vec::new() }
    }

    pub fn failing(mut self, e: Endpoint) -> Self {
        self.fail.push(e);
        self
    }

    pub fn emptying(mut self, e: Endpoint) -> Self {
        self.empty.push(e);
        self
    }

    pub fn calls(&self) -> Vec<(Endpoint, Value)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn take(&self) -> Vec<(Endpoint, Value)> {
        std::mem::take(&mut *self.calls.lock().unwrap())
    }
}

impl<T: ToolClient> ToolClient for Recorder<T> {
    fn call(&self, endpoint: Endpoint, body: &Value) -> Result<Value, ToolError> {
        self.calls.lock().unwrap().push((endpoint, body.clone()));
        if self.fail.contains(&endpoint) {
            return Err(ToolError { endpoint: endpoint.name().into(), status: Some(500), message: "injected failure".into() });
        }
        if self.empty.contains(&endpoint) {
            return Ok(match endpoint {
                Endpoint::KnLookup => serde_json::json!({ "results": [] }),
                _ => serde_json::json!({ "scores": [] }),
            });
        }
        self.inner.call(endpoint, body)
    }
}

pub fn stub(rules: Vec<ScriptRule>, default: Option<&str>) -> Gateway {
    let s = framesearch_core::gateway::ScriptedStub::new(rules, default.map(str::to_string)).unwrap();
    Gateway::stub(s).with_memory_trace()
}

pub fn decision(tool: &str, can: bool) -> String {
    serde_json::json!({
        "can_answer_now": can, "selected_tool": tool, "bm25_query": if tool == "bm25_ann" { "Dust2 A点" } else { "" },
        "reason": "scripted", "confidence": 0.5
    })
    .to_string()
}
