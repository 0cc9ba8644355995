//! The guarded question-answering flow: screen, prompt, plan, validate,
//! check preconditions, execute, narrate, ground.

mod ground;
mod narrate;

use std::sync::Arc;
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use ground::ground_answer;
pub use narrate::template_narration;

use crate::claims::GroundingReport;
use crate::exec::{execute, render_output, ChartSpec, RenderedAnswer, ResultTable};
use crate::llm::{LlmError, LlmExchange, LlmProvider};
use crate::plan::{
    abstention_reason, parse_response, plan_json_schema, validate_plan, AbstainReason, OutputFormat, PlanResponse,
    QueryPlan, ReasonCode, Verdict, Violation, ViolationCode,
};
use crate::prompt::{build_answer_prompt, build_narration_prompt, build_prompt, render_metadata, resolve_relative_dates, ContextBlock, PromptBundle, RETRY_LABEL};
use crate::rules::{audit_answer, check_preconditions, screen_query, RuleSet};
use crate::semantic::SemanticModel;
use crate::store::{Dataset, DatasetLookup, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrationMode {
    #[default]
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub max_retries: u32,
    pub structured_output: bool,
    pub strict_rules: bool,
    pub prompt_enhancement: bool,
    pub semantic_layer: bool,
    pub narration: NarrationMode,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig::guarded()
    }
}

impl PipelineConfig {
    /// Every layer on.
    pub fn guarded() -> PipelineConfig {
        PipelineConfig {
            max_retries: 2,
            structured_output: true,
            strict_rules: true,
            prompt_enhancement: true,
            semantic_layer: true,
            narration: NarrationMode::Template,
        }
    }

    /// Every layer off: the model's raw text is the answer.
    pub fn baseline() -> PipelineConfig {
        PipelineConfig {
            structured_output: false,
            strict_rules: false,
            prompt_enhancement: false,
            semantic_layer: false,
            ..PipelineConfig::guarded()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Answered,
    Abstained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageVerdict {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarOut {
    pub name: String,
    pub value: Value,
}

/// The executed table plus how it was rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub format: OutputFormat,
    pub table: ResultTable,
    /// Cell display strings, row-major.
    pub display: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<ScalarOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerEnvelope {
    pub status: Status,
    pub answer: Option<String>,
    pub reason: Option<AbstainReason>,
    pub plan: Option<QueryPlan>,
    pub result: Option<EnvelopeResult>,
    pub chart: Option<ChartSpec>,
    pub verdicts: Vec<StageVerdict>,
    pub exchanges: Vec<LlmExchange>,
    pub grounding: Option<GroundingReport>,
    pub timing_ms: u64,
}

impl AnswerEnvelope {
    pub fn is_answered(&self) -> bool {
        self.status == Status::Answered
    }

    pub fn table(&self) -> Option<&ResultTable> {
        self.result.as_ref().map(|r| &r.table)
    }

    /// Violation codes from the last rejecting verdict, if any.
    pub fn last_violation_codes(&self) -> Vec<ViolationCode> {
        self.verdicts
            .iter()
            .rev()
            .find_map(|v| match &v.verdict {
                Verdict::Reject { violations } => Some(violations.iter().map(|x| x.code).collect()),
                _ => None,
            })
            .unwrap_or_default()
    }
}

/// Raised only for configuration faults that no envelope can represent.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("provider credential missing: {0}")]
    Credential(String),
}

/// Immutable after construction; `answer_query` may run concurrently.
pub struct GuardPipeline {
    provider: Arc<dyn LlmProvider>,
    config: PipelineConfig,
    measure_time: bool,
}

struct Run {
    started: Instant,
    measure: bool,
    verdicts: Vec<StageVerdict>,
    exchanges: Vec<LlmExchange>,
    plan: Option<QueryPlan>,
}

impl Run {
    fn record(&mut self, stage: &str, attempt: Option<u32>, verdict: Verdict) {
        self.verdicts.push(StageVerdict { stage: stage.into(), attempt, verdict });
    }

    fn elapsed(&self) -> u64 {
        if self.measure {
            self.started.elapsed().as_millis() as u64
        } else {
            0
        }
    }

    fn abstain(self, code: ReasonCode, detail: impl Into<String>) -> AnswerEnvelope {
        let timing_ms = self.elapsed();
        AnswerEnvelope {
            status: Status::Abstained,
            answer: None,
            reason: Some(AbstainReason { code, detail: detail.into() }),
            plan: self.plan,
            result: None,
            chart: None,
            verdicts: self.verdicts,
            exchanges: self.exchanges,
            grounding: None,
            timing_ms,
        }
    }
}

fn violation_lines(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("- {v}")).collect::<Vec<_>>().join("\n")
}

fn screen_reason(violations: &[Violation]) -> ReasonCode {
    if violations.iter().any(|v| v.code == ViolationCode::PromptIntrusion) {
        ReasonCode::PromptIntrusion
    } else {
        ReasonCode::Security
    }
}

impl GuardPipeline {
    pub fn new(provider: Arc<dyn LlmProvider>, config: PipelineConfig) -> GuardPipeline {
        GuardPipeline { provider, config, measure_time: false }
    }

    /// Report wall-clock time in `timing_ms` (off by default so envelopes are reproducible).
    pub fn with_timing(mut self, on: bool) -> GuardPipeline {
        self.measure_time = on;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn complete(&self, run: &mut Run, bundle: &PromptBundle, attempt: u32) -> Result<Option<String>, PipelineError> {
        match self.provider.complete(bundle, attempt) {
            Ok(ex) => {
                let content = ex.content.clone();
                run.exchanges.push(ex);
                Ok(Some(content))
            }
            Err(LlmError::Auth(var)) => Err(PipelineError::Credential(var)),
            Err(e) => {
                run.record("provider", Some(attempt), Verdict::abstain(ReasonCode::ProviderUnavailable, e.to_string()));
                Ok(None)
            }
        }
    }

    pub fn answer_query(
        &self,
        query: &str,
        store: &dyn DatasetLookup,
        model: &SemanticModel,
        rules: &RuleSet,
        now: NaiveDate,
    ) -> Result<AnswerEnvelope, PipelineError> {
        let mut run = Run {
            started: Instant::now(),
            measure: self.measure_time,
            verdicts: Vec::new(),
            exchanges: Vec::new(),
            plan: None,
        };
        let cfg = self.config;

        if cfg.strict_rules {
            let v = screen_query(query, rules);
            run.record("screen", None, v.clone());
            if let Verdict::Reject { violations } = v {
                let detail = violations.iter().map(|v| v.message.clone()).collect::<Vec<_>>().join("; ");
                return Ok(run.abstain(screen_reason(&violations), detail));
            }
        }

        let empty = SemanticModel::empty();
        let model = if cfg.semantic_layer { model } else { &empty };
        let datasets: Vec<&Dataset> = store.dataset_names().iter().filter_map(|n| store.dataset(n)).collect();
        let metadata: Vec<(String, _)> = datasets.iter().map(|d| (d.name.clone(), d.metadata.clone())).collect();

        if !cfg.structured_output {
            return self.answer_directly(run, query, store, model, rules, now, &datasets, &metadata);
        }

        let mut base = build_prompt(
            query,
            &model.render_context(&datasets),
            &metadata,
            now,
            &model.apply_rules(query),
            plan_json_schema(),
        );
        if !cfg.prompt_enhancement {
            for b in base.context_blocks.iter_mut() {
                if b.label == "dataset metadata" || b.label == "resolved dates" {
                    b.text = "(not provided)".into();
                }
            }
        }

        let mut bundle = base.clone();
        let mut canonical = None;
        let mut last_violations: Vec<Violation> = Vec::new();
        for attempt in 0..=cfg.max_retries {
            let Some(content) = self.complete(&mut run, &bundle, attempt)? else {
                return Ok(run.abstain(ReasonCode::ProviderUnavailable, "the language model could not be reached"));
            };
            let violations = match parse_response(&content) {
                Ok(PlanResponse::Abstain(reason)) => {
                    run.record("plan", Some(attempt), Verdict::abstain(ReasonCode::ModelAbstained, reason.clone()));
                    return Ok(run.abstain(ReasonCode::ModelAbstained, reason));
                }
                Err(e) => vec![Violation::new(ViolationCode::ParseError, format!("offset {}", e.position), e.expected)],
                Ok(PlanResponse::Plan(plan)) => {
                    let outcome = validate_plan(&plan, store, model);
                    run.plan = Some(plan);
                    run.record("validate", Some(attempt), outcome.verdict.clone());
                    match outcome.verdict {
                        Verdict::Pass => {
                            canonical = outcome.plan;
                            break;
                        }
                        Verdict::Abstain { reason } => return Ok(run.abstain(reason.code, reason.detail)),
                        Verdict::Reject { violations } => violations,
                    }
                }
            };
            if run.verdicts.last().is_none_or(|v| v.stage != "validate" || v.attempt != Some(attempt)) {
                run.record("parse", Some(attempt), Verdict::from_violations(violations.clone()));
            }
            bundle = base.clone();
            bundle.push_block(RETRY_LABEL, violation_lines(&violations));
            last_violations = violations;
        }
        let Some(plan) = canonical else {
            return Ok(run.abstain(
                ReasonCode::ValidationExhausted,
                format!(
                    "no valid plan after {} attempt(s); last problems: {}",
                    cfg.max_retries + 1,
                    last_violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
                ),
            ));
        };
        run.plan = Some(plan.clone());

        if cfg.strict_rules {
            let v = check_preconditions(&plan, store, rules);
            run.record("preconditions", None, v.clone());
            match v {
                Verdict::Pass => {}
                Verdict::Reject { violations } => {
                    return Ok(run.abstain(
                        ReasonCode::ForbiddenOperation,
                        violations.iter().map(|v| v.message.clone()).collect::<Vec<_>>().join("; "),
                    ))
                }
                Verdict::Abstain { reason } => return Ok(run.abstain(reason.code, reason.detail)),
            }
        }

        let table = match execute(&plan, store) {
            Ok(t) => t,
            Err(e) => {
                run.record("execute", None, Verdict::abstain(ReasonCode::ExecutionFault, e.to_string()));
                return Ok(run.abstain(ReasonCode::ExecutionFault, e.to_string()));
            }
        };
        run.record("execute", None, Verdict::Pass);
        let rendered = match render_output(&table, &plan.output) {
            Ok(r) => r,
            Err(e) => {
                run.record("render", None, Verdict::abstain(ReasonCode::ExecutionFault, e.to_string()));
                return Ok(run.abstain(ReasonCode::ExecutionFault, e.to_string()));
            }
        };

        let answer = match cfg.narration {
            NarrationMode::Template => template_narration(&table),
            NarrationMode::Llm => self.llm_narration(&mut run, query, &plan, &table, store, rules)?,
        };
        let grounding = ground_answer(&answer, Some(&table), store, model);
        run.record("grounding", None, grounding_verdict(&grounding));

        let display = table.rows.iter().map(|r| r.iter().map(Value::display).collect()).collect();
        let (scalar, chart) = match rendered {
            RenderedAnswer::Scalar { name, value } => (Some(ScalarOut { name, value }), None),
            RenderedAnswer::Chart { chart } => (None, Some(chart)),
            RenderedAnswer::Table { .. } => (None, None),
        };
        let timing_ms = run.elapsed();
        Ok(AnswerEnvelope {
            status: Status::Answered,
            answer: Some(answer),
            reason: None,
            plan: run.plan,
            result: Some(EnvelopeResult { format: plan.output.format, table, display, scalar }),
            chart,
            verdicts: run.verdicts,
            exchanges: run.exchanges,
            grounding: Some(grounding),
            timing_ms,
        })
    }

    /// Second completion describing the result. With strict rules on it must
    /// pass the answer audit; otherwise the template sentence is used instead.
    fn llm_narration(
        &self,
        run: &mut Run,
        query: &str,
        plan: &QueryPlan,
        table: &ResultTable,
        store: &dyn DatasetLookup,
        rules: &RuleSet,
    ) -> Result<String, PipelineError> {
        let bundle = build_narration_prompt(
            query,
            &plan.to_json(),
            &serde_json::to_string(table).expect("table serializes"),
        );
        let Some(text) = self.complete(run, &bundle, 0)? else {
            return Ok(template_narration(table));
        };
        if abstention_reason(&text).is_some() || text.trim().is_empty() {
            run.record("narration", None, Verdict::abstain(ReasonCode::ModelAbstained, "narration declined; template used"));
            return Ok(template_narration(table));
        }
        if self.config.strict_rules {
            let found = audit_answer(&text, Some(table), store, rules);
            let verdict = Verdict::from_violations(found.iter().map(|a| a.to_violation()).collect());
            let pass = verdict.is_pass();
            run.record("audit", None, verdict);
            if !pass {
                return Ok(template_narration(table));
            }
        }
        Ok(text)
    }

    /// Structured output off: the model answers in prose and that text is the answer.
    #[allow(clippy::too_many_arguments)]
    fn answer_directly(
        &self,
        mut run: Run,
        query: &str,
        store: &dyn DatasetLookup,
        model: &SemanticModel,
        rules: &RuleSet,
        now: NaiveDate,
        datasets: &[&Dataset],
        metadata: &[(String, crate::store::DatasetMetadata)],
    ) -> Result<AnswerEnvelope, PipelineError> {
        let cfg = self.config;
        let mut context = Vec::new();
        if cfg.prompt_enhancement {
            context.push(ContextBlock { label: "dataset metadata".into(), text: render_metadata(metadata) });
            let dates: Vec<String> = resolve_relative_dates(query, now)
                .into_iter()
                .map(|r| format!("\"{}\" = {}", r.phrase, r.range))
                .collect();
            context.push(ContextBlock {
                label: "resolved dates".into(),
                text: format!("today = {now}\n{}", dates.join("\n")).trim_end().to_string(),
            });
        }
        if cfg.semantic_layer {
            context.push(ContextBlock { label: "semantic context".into(), text: model.render_context(datasets) });
        }
        let bundle = build_answer_prompt(query, context);
        let Some(text) = self.complete(&mut run, &bundle, 0)? else {
            return Ok(run.abstain(ReasonCode::ProviderUnavailable, "the language model could not be reached"));
        };
        if let Some(reason) = abstention_reason(&text) {
            run.record("answer", Some(0), Verdict::abstain(ReasonCode::ModelAbstained, reason.clone()));
            return Ok(run.abstain(ReasonCode::ModelAbstained, reason));
        }
        if cfg.strict_rules {
            let found = audit_answer(&text, None, store, rules);
            let verdict = Verdict::from_violations(found.iter().map(|a| a.to_violation()).collect());
            run.record("audit", None, verdict.clone());
            if !verdict.is_pass() {
                let detail = verdict.violations().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
                return Ok(run.abstain(ReasonCode::AuditFailed, detail));
            }
        }
        let grounding = ground_answer(&text, None, store, model);
        run.record("grounding", None, grounding_verdict(&grounding));
        let timing_ms = run.elapsed();
        Ok(AnswerEnvelope {
            status: Status::Answered,
            answer: Some(text),
            reason: None,
            plan: None,
            result: None,
            chart: None,
            verdicts: run.verdicts,
            exchanges: run.exchanges,
            grounding: Some(grounding),
            timing_ms,
        })
    }
}

fn grounding_verdict(report: &GroundingReport) -> Verdict {
    Verdict::from_violations(
        report
            .unmatched()
            .map(|c| {
                let code = match c.kind {
                    crate::claims::ClaimKind::Url => ViolationCode::BrokenLink,
                    crate::claims::ClaimKind::Numeric => ViolationCode::FabricatedValue,
                    crate::claims::ClaimKind::Term => ViolationCode::UnknownColumn,
                };
                Violation::new(code, "", format!("unmatched claim {:?}", c.text))
            })
            .collect(),
    )
}
