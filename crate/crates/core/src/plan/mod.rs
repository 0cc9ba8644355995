//! The structured-output language: plan documents, arithmetic expressions,
//! and schema-aware validation.

mod doc;
mod expr;
mod validate;
mod verdict;

use serde::Serialize;

pub use doc::{
    abstention_document, abstention_reason, parse_plan, plan_json_schema, parse_response, AggFn, AggSpec, ChartKind,
    DeriveSpec, FilterOp, FilterSpec, JoinKind, JoinSpec, OutputFormat, OutputSpec, PlanResponse,
    QueryPlan, SortDir, SortSpec,
};
pub(crate) use doc::json_error;
pub use expr::{parse_expr, BinOp, Expr, Number};
pub use validate::{resolve_in_frame, validate_plan, Frame, FrameColumn, ValidationOutcome};
pub use verdict::{AbstainReason, ReasonCode, Verdict, Violation, ViolationCode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("at offset {position}: expected {expected} near {fragment:?}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub expected: String,
    pub fragment: String,
}

impl ParseError {
    pub(crate) fn at(src: &str, position: usize, expected: &str) -> ParseError {
        let start = floor_char_boundary(src, position.saturating_sub(12));
        let end = floor_char_boundary(src, (position + 12).min(src.len()));
        ParseError {
            position,
            expected: expected.to_string(),
            fragment: src[start..end].to_string(),
        }
    }
}

fn floor_char_boundary(s: &str, mut i: usize) -> usize {
    while i > 0 && !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}
