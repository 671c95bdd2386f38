//! Step records shared by the orchestration traces.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of a string.
pub fn digest_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Hex SHA-256 of the compact JSON serialization of `v`.
pub fn digest_json<T: Serialize>(v: &T) -> String {
    digest_str(&serde_json::to_string(v).expect("serializable"))
}

/// One tool call or model call made during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    /// Tool request bodies are kept verbatim; model prompts only by digest.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub request: Option<Value>,
    pub request_digest: String,
    pub response_digest: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn tool(&mut self, endpoint: &str, request: &Value, response: Result<&Value, &str>) {
        let (response_digest, error) = match response {
            Ok(v) => (digest_json(v), None),
            Err(e) => (digest_str(e), Some(e.to_string())),
        };
        self.steps.push(TraceStep {
            step: self.steps.len() + 1,
            endpoint: Some(endpoint.to_string()),
            model: None,
            request: Some(request.clone()),
            request_digest: digest_json(request),
            response_digest,
            error,
        });
    }

    pub fn model(&mut self, role: &str, request_digest: String, reply: Result<&str, &str>) {
        let (response_digest, error) = match reply {
            Ok(r) => (digest_str(r), None),
            Err(e) => (digest_str(e), Some(e.to_string())),
        };
        self.steps.push(TraceStep {
            step: self.steps.len() + 1,
            endpoint: None,
            model: Some(role.to_string()),
            request: None,
            request_digest,
            response_digest,
            error,
        });
    }

    /// Steps that called a retrieval tool (excluding `kn_lookup` enrichment).
    pub fn retrieval_calls(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps
            .iter()
            .filter(|s| matches!(s.endpoint.as_deref(), Some(e) if e != "kn_lookup"))
    }
}
