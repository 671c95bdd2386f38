//! Offline multimodal search environment and agent harness.
//!
//! The crate is organised bottom-up:
//!
//! - [`index`]: immutable dense/BM25 indices, tokenizer, clustering and pair sampling.
//! - [`services`]: the retrieval tool endpoints (`/bm25_ann`, `/text_ann`, `/img_ann`,
//!   `/multimodal_ann`, `/kn_lookup`, `/health`), an HTTP server and tool clients.
//! - [`gateway`]: chat-completion access with a deterministic scripted stub.
//! - [`rag`], [`par`], [`msr1`]: the three search orchestration strategies.
//! - [`eval`]: dataset loading, answer matching and run metrics.

pub mod eval;
pub mod evidence;
pub mod gateway;
pub mod index;
pub mod jsonl;
pub mod msr1;
pub mod par;
pub mod prompts;
pub mod rag;
pub mod services;
pub mod trace;

pub use eval::{Category, Difficulty, QaInstance};
pub use evidence::{EvidenceItem, EvidencePool};
pub use index::{Payload, ScoredRecord};
