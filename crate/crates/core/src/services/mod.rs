//! Frozen retrieval tool services.
//!
//! [`ServiceState::route`] is the transport-independent dispatcher; [`http`] exposes it
//! over HTTP/1.1 and [`client`] provides in-process and HTTP tool clients for the agents.

pub mod client;
mod config;
pub mod http;
mod knowledge;
mod router;

pub use client::{HttpTools, InProcessTools, ToolClient, ToolError};
pub use config::{ServiceConfig, DEFAULT_KN_PORT};
pub use knowledge::{KnLookupResult, KnowledgeBase, KnowledgeRow};
pub use router::{Endpoint, ServiceResponse, ServiceState};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] crate::index::StoreError),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}
