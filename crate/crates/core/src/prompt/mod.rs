//! Prompt assembly. Everything here is a pure function of its inputs; the
//! current date arrives as an explicit anchor.

mod dates;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use dates::{resolve_relative_dates, DateRange, ResolvedDate};

use crate::semantic::QueryHint;
use crate::store::DatasetMetadata;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Produce a plan document (or an abstention document).
    Plan,
    /// Describe an executed result in prose.
    Narration,
    /// Answer directly in prose; used when structured output is switched off.
    Answer,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Plan => "plan",
            Purpose::Narration => "narration",
            Purpose::Answer => "answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> GenerationParams {
        GenerationParams { temperature: 0.0, max_tokens: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub purpose: Purpose,
    pub system_text: String,
    pub context_blocks: Vec<ContextBlock>,
    pub user_query: String,
    pub generation_params: GenerationParams,
}

pub const RETRY_LABEL: &str = "previous attempt failed validation";

impl PromptBundle {
    pub fn push_block(&mut self, label: &str, text: impl Into<String>) {
        self.context_blocks.push(ContextBlock { label: label.to_string(), text: text.into() });
    }

    pub fn block(&self, label: &str) -> Option<&str> {
        self.context_blocks.iter().find(|b| b.label == label).map(|b| b.text.as_str())
    }

    /// Chat messages for an HTTP provider: system text plus context, then the question.
    pub fn messages(&self) -> Vec<(&'static str, String)> {
        let mut system = self.system_text.clone();
        for b in &self.context_blocks {
            system.push_str(&format!("\n\n## {}\n{}", b.label, b.text));
        }
        vec![("system", system), ("user", self.user_query.clone())]
    }
}

const PLAN_SYSTEM: &str = "You translate analytics questions into query plans for a data engine. \
Respond with a single plan document that conforms to the grammar below and nothing else. \
If the data is insufficient, the period is not covered, or the question cannot be answered from the listed datasets, \
respond with an abstention document {\"abstain\": \"<reason>\"}. Never answer in prose and never invent columns.";

const RULES_REMINDER: &str = "Use only datasets and columns listed below. \
Column references may use vocabulary terms from the semantic context. \
Date phrases: \"last N days\" is the N days ending today inclusive; \"last month\" and \"past month\" are the previous complete calendar month; \
\"this month\" and \"this year\" run to today; \"last quarter\" and \"last year\" are the previous complete calendar periods; \
\"last N months\" is the N complete calendar months before the current one; \"Qn\" without a year means the current year. \
Filter dates with the ranges listed under resolved dates.";

pub fn render_metadata(metadata: &[(String, DatasetMetadata)]) -> String {
    if metadata.is_empty() {
        return "(no datasets)".into();
    }
    metadata
        .iter()
        .map(|(name, m)| {
            let coverage = match m.time_coverage {
                Some((a, b)) => format!("{a}..{b}"),
                None => "no time column".into(),
            };
            format!(
                "{name}: source {}; covers {coverage}; {} rows; ingested {}",
                m.source_label,
                m.row_count,
                m.ingested_at_rfc3339()
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn or_none(text: String) -> String {
    if text.trim().is_empty() {
        "(none)".into()
    } else {
        text
    }
}

/// Plan-generation prompt. Block order is fixed: grammar, rules reminder,
/// dataset metadata, semantic context, resolved dates, hints.
pub fn build_prompt(
    query: &str,
    semantic_context: &str,
    metadata: &[(String, DatasetMetadata)],
    now: NaiveDate,
    hints: &[QueryHint],
    grammar_text: &str,
) -> PromptBundle {
    let dates = resolve_relative_dates(query, now)
        .into_iter()
        .map(|r| format!("\"{}\" = {}", r.phrase, r.range))
        .collect::<Vec<_>>()
        .join("\n");
    let hints = hints
        .iter()
        .map(|h| format!("{}: {}", h.kind.as_str(), h.payload))
        .collect::<Vec<_>>()
        .join("\n");
    let mut bundle = PromptBundle {
        purpose: Purpose::Plan,
        system_text: PLAN_SYSTEM.to_string(),
        context_blocks: Vec::new(),
        user_query: query.to_string(),
        generation_params: GenerationParams::default(),
    };
    bundle.push_block("grammar", grammar_text);
    bundle.push_block("rules reminder", RULES_REMINDER);
    bundle.push_block("dataset metadata", render_metadata(metadata));
    bundle.push_block("semantic context", or_none(semantic_context.to_string()));
    bundle.push_block("resolved dates", or_none(format!("today = {now}\n{dates}").trim_end().to_string()));
    bundle.push_block("hints", or_none(hints));
    bundle
}

const NARRATION_SYSTEM: &str = "Describe the query result below in one or two sentences that answer the question. \
Use only names and numbers that appear in the result. Do not add links, estimates, or explanations that the result does not support.";

pub fn build_narration_prompt(query: &str, plan_json: &str, result_json: &str) -> PromptBundle {
    let mut bundle = PromptBundle {
        purpose: Purpose::Narration,
        system_text: NARRATION_SYSTEM.to_string(),
        context_blocks: Vec::new(),
        user_query: query.to_string(),
        generation_params: GenerationParams::default(),
    };
    bundle.push_block("plan", plan_json);
    bundle.push_block("result", result_json);
    bundle
}

const ANSWER_SYSTEM: &str = "You are a data analyst. Answer the question about the user's data.";

/// Direct-answer prompt used when structured output is off. `context` is empty
/// for a bare baseline, or carries metadata and vocabulary when those layers are on.
pub fn build_answer_prompt(query: &str, context: Vec<ContextBlock>) -> PromptBundle {
    PromptBundle {
        purpose: Purpose::Answer,
        system_text: ANSWER_SYSTEM.to_string(),
        context_blocks: context,
        user_query: query.to_string(),
        generation_params: GenerationParams::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::HintKind;

    fn meta() -> Vec<(String, DatasetMetadata)> {
        vec![(
            "ga_sessions".into(),
            DatasetMetadata {
                source_label: "ga360_fixture".into(),
                time_coverage: Some(("2016-08-01".parse().unwrap(), "2017-08-01".parse().unwrap())),
                row_count: 10000,
                ingested_at: 0,
            },
        )]
    }

    fn now() -> NaiveDate {
        "2017-07-15".parse().unwrap()
    }

    #[test]
    fn metadata_values_verbatim() {
        let b = build_prompt("q", "", &meta(), now(), &[], "{}");
        let block = b.block("dataset metadata").unwrap();
        for needle in ["ga360_fixture", "2016-08-01..2017-08-01", "10000"] {
            assert!(block.contains(needle), "{block}");
        }
    }

    #[test]
    fn block_order_and_determinism() {
        let hints = [QueryHint { kind: HintKind::AnalysisType, payload: "time_series".into() }];
        let a = build_prompt("traffic last quarter", "ctx", &meta(), now(), &hints, "{}");
        let b = build_prompt("traffic last quarter", "ctx", &meta(), now(), &hints, "{}");
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let labels: Vec<_> = a.context_blocks.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(
            labels,
            ["grammar", "rules reminder", "dataset metadata", "semantic context", "resolved dates", "hints"]
        );
        assert!(a.block("resolved dates").unwrap().contains("2017-04-01..2017-06-30"));
        assert_eq!(a.block("hints").unwrap(), "analysis_type: time_series");
        assert_eq!(a.generation_params.temperature, 0.0);
    }

    #[test]
    fn metadata_changes_bytes() {
        let a = build_prompt("q", "", &meta(), now(), &[], "{}");
        let mut m = meta();
        m[0].1.row_count = 10001;
        let b = build_prompt("q", "", &m, now(), &[], "{}");
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
