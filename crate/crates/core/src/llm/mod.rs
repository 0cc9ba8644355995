//! Completion providers: an HTTP chat-completion client and a scripted
//! responder with seeded fault injection.

mod http;
mod scripted;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use http::{HttpConfig, HttpProvider};
pub use scripted::{Fault, FaultProfile, Script, ScriptEntry, ScriptedProvider};

use crate::prompt::PromptBundle;
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("credential variable {0} is not set")]
    Auth(String),
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("no scripted {purpose} response for query fingerprint {fingerprint}")]
    UnscriptedQuery { fingerprint: String, purpose: String },
}

/// One request/response round trip, kept verbatim for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmExchange {
    pub provider: String,
    pub attempt: u32,
    pub request: PromptBundle,
    /// Bytes sent to the provider.
    pub request_body: String,
    /// Bytes received from the provider.
    pub raw_response: String,
    /// Completion text extracted from the raw response.
    pub content: String,
    pub latency_ms: u64,
}

pub trait LlmProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, bundle: &PromptBundle, attempt: u32) -> Result<LlmExchange, LlmError>;
}

/// Hex SHA-256 of the normalized query text.
pub fn query_fingerprint(query: &str) -> String {
    hex(&Sha256::digest(normalize(query).as_bytes()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_case_and_spacing() {
        assert_eq!(query_fingerprint("Total  Revenue "), query_fingerprint("total revenue"));
        assert_ne!(query_fingerprint("total revenue"), query_fingerprint("total users"));
        assert_eq!(query_fingerprint("x").len(), 64);
    }
}
