use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    UnknownColumn,
    UnknownDataset,
    TypeMismatch,
    BadAlias,
    BadSortKey,
    BadChartShape,
    BadJoinKeys,
    BadLimit,
    ParseError,
    PromptIntrusion,
    Security,
    ForbiddenOperation,
    BrokenLink,
    FabricatedValue,
    SensitiveLeak,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnknownColumn => "UNKNOWN_COLUMN",
            ViolationCode::UnknownDataset => "UNKNOWN_DATASET",
            ViolationCode::TypeMismatch => "TYPE_MISMATCH",
            ViolationCode::BadAlias => "BAD_ALIAS",
            ViolationCode::BadSortKey => "BAD_SORT_KEY",
            ViolationCode::BadChartShape => "BAD_CHART_SHAPE",
            ViolationCode::BadJoinKeys => "BAD_JOIN_KEYS",
            ViolationCode::BadLimit => "BAD_LIMIT",
            ViolationCode::ParseError => "PARSE_ERROR",
            ViolationCode::PromptIntrusion => "PROMPT_INTRUSION",
            ViolationCode::Security => "SECURITY",
            ViolationCode::ForbiddenOperation => "FORBIDDEN_OPERATION",
            ViolationCode::BrokenLink => "BROKEN_LINK",
            ViolationCode::FabricatedValue => "FABRICATED_VALUE",
            ViolationCode::SensitiveLeak => "SENSITIVE_LEAK",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    /// Location inside the plan document, e.g. `aggregates[0].col`; empty when not plan-specific.
    pub path: String,
}

impl Violation {
    pub fn new(code: ViolationCode, path: impl Into<String>, message: impl Into<String>) -> Violation {
        Violation { code, message: message.into(), path: path.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}: {}", self.code, self.message)
        } else {
            write!(f, "{} at {}: {}", self.code, self.path, self.message)
        }
    }
}

/// Why a query ended without an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    AmbiguousTerm,
    InsufficientData,
    InsufficientCoverage,
    PromptIntrusion,
    Security,
    ForbiddenOperation,
    ValidationExhausted,
    ModelAbstained,
    ProviderUnavailable,
    ExecutionFault,
    AuditFailed,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::AmbiguousTerm => "AMBIGUOUS_TERM",
            ReasonCode::InsufficientData => "INSUFFICIENT_DATA",
            ReasonCode::InsufficientCoverage => "INSUFFICIENT_COVERAGE",
            ReasonCode::PromptIntrusion => "PROMPT_INTRUSION",
            ReasonCode::Security => "SECURITY",
            ReasonCode::ForbiddenOperation => "FORBIDDEN_OPERATION",
            ReasonCode::ValidationExhausted => "VALIDATION_EXHAUSTED",
            ReasonCode::ModelAbstained => "MODEL_ABSTAINED",
            ReasonCode::ProviderUnavailable => "PROVIDER_UNAVAILABLE",
            ReasonCode::ExecutionFault => "EXECUTION_FAULT",
            ReasonCode::AuditFailed => "AUDIT_FAILED",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstainReason {
    pub code: ReasonCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Reject { violations: Vec<Violation> },
    Abstain { reason: AbstainReason },
}

impl Verdict {
    /// A reject verdict, or pass when `violations` is empty.
    pub fn from_violations(violations: Vec<Violation>) -> Verdict {
        if violations.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Reject { violations }
        }
    }

    pub fn abstain(code: ReasonCode, detail: impl Into<String>) -> Verdict {
        Verdict::Abstain { reason: AbstainReason { code, detail: detail.into() } }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Verdict::Reject { violations } => violations,
            _ => &[],
        }
    }
}
