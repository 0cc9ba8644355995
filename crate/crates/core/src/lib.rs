//! Guarded natural-language analytics over tabular data.

pub mod claims;
pub mod eval;
pub mod exec;
pub mod fixtures;
pub mod llm;
pub mod pipeline;
pub mod plan;
pub mod prompt;
pub mod rules;
pub mod semantic;
pub mod store;
pub mod text;
