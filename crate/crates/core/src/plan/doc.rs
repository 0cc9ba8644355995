//! The plan document an LLM must emit, and its strict JSON parser.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::expr::{parse_expr, Expr};
use super::ParseError;
use crate::store::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinKind {
    #[default]
    Inner,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinSpec {
    pub right: String,
    /// `(left column, right column)` equality pairs.
    pub on: Vec<(String, String)>,
    #[serde(default)]
    pub kind: JoinKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Between,
    In,
    Contains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub col: String,
    pub op: FilterOp,
    #[serde(default)]
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    Sum,
    Avg,
    Count,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggSpec {
    #[serde(rename = "fn")]
    pub func: AggFn,
    /// Column reference, or `*` for `count`.
    pub col: String,
    #[serde(rename = "as")]
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveSpec {
    #[serde(rename = "as")]
    pub alias: String,
    #[serde(with = "expr_text")]
    pub expr: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDir {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortSpec {
    pub by: String,
    #[serde(default)]
    pub dir: SortDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Scalar,
    #[default]
    Table,
    Chart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Line,
    Bar,
    Pie,
    StackedBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_kind: Option<ChartKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryPlan {
    pub source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joins: Vec<JoinSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<FilterSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_by: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregates: Vec<AggSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derive: Vec<DeriveSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sort: Vec<SortSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<i64>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl QueryPlan {
    /// A plan with no aggregates and no grouping returns source rows as-is.
    pub fn is_row_listing(&self) -> bool {
        self.aggregates.is_empty() && self.group_by.is_empty()
    }

    /// Operation tags matched against a rule set's forbidden operations.
    ///
    /// `raw_export` marks an unbounded row listing (no aggregation, no grouping, no limit).
    pub fn operation_tags(&self) -> BTreeSet<&'static str> {
        let mut tags = BTreeSet::new();
        if !self.joins.is_empty() {
            tags.insert("join");
        }
        if !self.filters.is_empty() {
            tags.insert("filter");
        }
        if !self.group_by.is_empty() {
            tags.insert("group_by");
        }
        if !self.aggregates.is_empty() {
            tags.insert("aggregate");
        }
        if !self.derive.is_empty() {
            tags.insert("derive");
        }
        if !self.sort.is_empty() {
            tags.insert("sort");
        }
        if self.limit.is_some() {
            tags.insert("limit");
        }
        if self.is_row_listing() {
            tags.insert("row_listing");
            if self.limit.is_none() {
                tags.insert("raw_export");
            }
        }
        tags.insert(match self.output.format {
            OutputFormat::Scalar => "scalar",
            OutputFormat::Table => "table",
            OutputFormat::Chart => "chart",
        });
        tags
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

mod expr_text {
    use super::*;

    pub fn serialize<S: serde::Serializer>(expr: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&expr.to_string())
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse_expr(&text).map_err(|e| serde::de::Error::custom(format!("invalid expression {text:?}: {e}")))
    }
}

/// JSON Schema for plan documents; the same text is embedded in prompts.
pub fn plan_json_schema() -> &'static str {
    include_str!("../../schemas/plan.schema.json")
}

/// Strict parse: unknown keys, comments, and trailing commas are all errors.
pub fn parse_plan(text: &str) -> Result<QueryPlan, ParseError> {
    serde_json::from_str::<QueryPlan>(text).map_err(|e| json_error(text, &e))
}

/// What the model returned in place of a plan.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanResponse {
    Plan(QueryPlan),
    Abstain(String),
}

/// Accept either a plan or an abstention document `{"abstain": "<reason>"}`.
pub fn parse_response(text: &str) -> Result<PlanResponse, ParseError> {
    if let Some(reason) = abstention_reason(text) {
        return Ok(PlanResponse::Abstain(reason));
    }
    parse_plan(text).map(PlanResponse::Plan)
}

/// Reason carried by an abstention document, if `text` is one.
pub fn abstention_reason(text: &str) -> Option<String> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Abstention {
        abstain: String,
    }
    serde_json::from_str::<Abstention>(text)
        .ok()
        .map(|a| a.abstain)
        .filter(|r| !r.trim().is_empty())
}

pub fn abstention_document(reason: &str) -> String {
    serde_json::json!({ "abstain": reason }).to_string()
}

pub(crate) fn json_error(text: &str, err: &serde_json::Error) -> ParseError {
    let mut offset = 0usize;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == err.line() {
            offset += err.column().saturating_sub(1).min(line.len());
            break;
        }
        offset += line.len();
    }
    if err.is_eof() {
        offset = text.len();
    }
    let mut msg = err.to_string();
    if let Some(idx) = msg.rfind(" at line ") {
        msg.truncate(idx);
    }
    ParseError::at(text, offset.min(text.len()), &msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_plan() {
        let p = parse_plan(
            r#"{"source":"sessions","aggregates":[{"fn":"count","col":"*","as":"n"}],"output":{"format":"scalar"}}"#,
        )
        .unwrap();
        assert_eq!(p.aggregates.len(), 1);
        assert_eq!(p.aggregates[0].func, AggFn::Count);
        assert!(p.joins.is_empty() && p.filters.is_empty() && p.sort.is_empty());
        assert_eq!(p.output.format, OutputFormat::Scalar);
    }

    #[test]
    fn truncated_document_errors_at_end() {
        let text = r#"{"source":"sessions","aggregates":[{"fn":"count""#;
        let err = parse_plan(text).unwrap_err();
        assert_eq!(err.position, text.len());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_plan(r#"{"source":"s","slect":["a"]}"#).unwrap_err();
        assert!(err.expected.contains("slect"), "{err}");
    }

    #[test]
    fn trailing_comma_and_comments_rejected() {
        assert!(parse_plan(r#"{"source":"s",}"#).is_err());
        assert!(parse_plan("{\"source\":\"s\" /* hi */}").is_err());
    }

    #[test]
    fn bad_expression_is_parse_error() {
        assert!(parse_plan(r#"{"source":"s","derive":[{"as":"x","expr":"((a)"}]}"#).is_err());
    }

    #[test]
    fn fractional_limit_rejected() {
        assert!(parse_plan(r#"{"source":"s","limit":5.5}"#).is_err());
    }

    #[test]
    fn abstention_document_round_trip() {
        let doc = abstention_document("no data for 2025");
        assert_eq!(parse_response(&doc).unwrap(), PlanResponse::Abstain("no data for 2025".into()));
        assert!(abstention_reason(r#"{"abstain":""}"#).is_none());
    }

    #[test]
    fn raw_export_tag() {
        let p = parse_plan(r#"{"source":"s"}"#).unwrap();
        assert!(p.operation_tags().contains("raw_export"));
        let p = parse_plan(r#"{"source":"s","limit":10}"#).unwrap();
        assert!(!p.operation_tags().contains("raw_export"));
        assert!(p.operation_tags().contains("row_listing"));
    }

    #[test]
    fn serialization_uses_wire_names() {
        let text = r#"{"source":"s","joins":[{"right":"c","on":[["a","b"]],"kind":"left"}],"filters":[{"col":"d","op":"between","args":["2017-01-01","2017-02-01"]}],"group_by":["g"],"aggregates":[{"fn":"sum","col":"v","as":"total"}],"derive":[{"as":"r","expr":"total / 2"}],"sort":[{"by":"total","dir":"desc"}],"limit":3,"output":{"format":"chart","chart_kind":"stacked_bar"}}"#;
        let p = parse_plan(text).unwrap();
        assert_eq!(p.to_json(), text);
    }
}
