//! Tool clients used by the agents: in-process dispatch or HTTP.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::knowledge::KnLookupResult;
use super::router::{Endpoint, ServiceState};
use crate::index::ScoredRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{endpoint} failed{}: {message}", status.map(|s| format!(" with status {s}")).unwrap_or_default())]
pub struct ToolError {
    pub endpoint: String,
    pub status: Option<u16>,
    pub message: String,
}

impl ToolError {
    fn new(endpoint: Endpoint, status: Option<u16>, message: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.name().to_string(),
            status,
            message: message.into(),
        }
    }
}

pub trait ToolClient: Send + Sync {
    /// Sends `body` to `endpoint` and returns the 200 response body.
    fn call(&self, endpoint: Endpoint, body: &Value) -> Result<Value, ToolError>;

    /// Calls a retrieval endpoint and decodes its `scores` list.
    fn ann(&self, endpoint: Endpoint, body: &Value) -> Result<Vec<ScoredRecord>, ToolError> {
        let resp = self.call(endpoint, body)?;
        let scores = resp
            .get("scores")
            .cloned()
            .ok_or_else(|| ToolError::new(endpoint, None, "response has no `scores` field"))?;
        serde_json::from_value(scores)
            .map_err(|e| ToolError::new(endpoint, None, format!("bad `scores`: {e}")))
    }

    fn kn_lookup(&self, queries: &[String]) -> Result<Vec<KnLookupResult>, ToolError> {
        let resp = self.call(Endpoint::KnLookup, &json!({ "queries": queries }))?;
        let results = resp
            .get("results")
            .cloned()
            .ok_or_else(|| ToolError::new(Endpoint::KnLookup, None, "response has no `results` field"))?;
        serde_json::from_value(results)
            .map_err(|e| ToolError::new(Endpoint::KnLookup, None, format!("bad `results`: {e}")))
    }
}

/// Dispatches straight into a [`ServiceState`] without a network hop.
#[derive(Debug, Clone)]
pub struct InProcessTools {
    state: Arc<ServiceState>,
}

impl InProcessTools {
    pub fn new(state: Arc<ServiceState>) -> Self {
        Self { state }
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }
}

impl ToolClient for InProcessTools {
    fn call(&self, endpoint: Endpoint, body: &Value) -> Result<Value, ToolError> {
        let method = if endpoint == Endpoint::Health { "GET" } else { "POST" };
        let resp = self
            .state
            .route(method, endpoint.path(), body.to_string().as_bytes());
        response_result(endpoint, resp.status, resp.body)
    }
}

fn response_result(endpoint: Endpoint, status: u16, body: Value) -> Result<Value, ToolError> {
    if status == 200 {
        return Ok(body);
    }
    let message = body
        .get("error")
        .and_then(Value::as_str)
        .map(str::to_string)
        .unwrap_or_else(|| body.to_string());
    Err(ToolError::new(endpoint, Some(status), message))
}

/// Talks to running services over HTTP. `kn_lookup` may live on a separate base URL.
#[derive(Debug, Clone)]
pub struct HttpTools {
    base_url: String,
    kn_base_url: Option<String>,
    agent: ureq::Agent,
}

impl HttpTools {
    pub fn new(base_url: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            kn_base_url: None,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn with_kn_base_url(mut self, url: impl Into<String>) -> Self {
        self.kn_base_url = Some(url.into().trim_end_matches('/').to_string());
        self
    }

    fn url(&self, endpoint: Endpoint) -> String {
        let base = match (endpoint, &self.kn_base_url) {
            (Endpoint::KnLookup, Some(kn)) => kn,
            _ => &self.base_url,
        };
        format!("{base}{}", endpoint.path())
    }
}

impl ToolClient for HttpTools {
    fn call(&self, endpoint: Endpoint, body: &Value) -> Result<Value, ToolError> {
        let url = self.url(endpoint);
        let result = if endpoint == Endpoint::Health {
            self.agent.get(&url).call()
        } else {
            self.agent.post(&url).send_json(body)
        };
        let mut resp = result.map_err(|e| ToolError::new(endpoint, None, e.to_string()))?;
        let status = resp.status().as_u16();
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ToolError::new(endpoint, Some(status), format!("unreadable body: {e}")))?;
        response_result(endpoint, status, body)
    }
}
