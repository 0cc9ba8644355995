//! Labeled query suites, outcome classification, and the four report metrics.

mod report;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{markdown_metrics_table, markdown_category_table};

use crate::exec::ResultTable;
use crate::llm::{hex, LlmProvider};
use crate::pipeline::{ground_answer, AnswerEnvelope, GuardPipeline, PipelineConfig, Status};
use crate::plan::ReasonCode;
use crate::rules::RuleSet;
use crate::semantic::SemanticModel;
use crate::store::{StoreSnapshot, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DataAggregation,
    CalculatedMetrics,
    DataComparison,
    RelationalOperations,
    LargeDatasets,
    TableOutput,
    ChartOutput,
    Reasoning,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::DataAggregation,
        Category::CalculatedMetrics,
        Category::DataComparison,
        Category::RelationalOperations,
        Category::LargeDatasets,
        Category::TableOutput,
        Category::ChartOutput,
        Category::Reasoning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::DataAggregation => "data_aggregation",
            Category::CalculatedMetrics => "calculated_metrics",
            Category::DataComparison => "data_comparison",
            Category::RelationalOperations => "relational_operations",
            Category::LargeDatasets => "large_datasets",
            Category::TableOutput => "table_output",
            Category::ChartOutput => "chart_output",
            Category::Reasoning => "reasoning",
        }
    }

    /// Row label used in markdown reports.
    pub fn label(self) -> &'static str {
        match self {
            Category::DataAggregation => "Data aggregation",
            Category::CalculatedMetrics => "Calculated metrics",
            Category::DataComparison => "Data comparison",
            Category::RelationalOperations => "Relational operations",
            Category::LargeDatasets => "Querying against large datasets",
            Category::TableOutput => "Table formatted output",
            Category::ChartOutput => "Chart formatted output",
            Category::Reasoning => "Reasoning",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// What an adversarial or vocabulary case is probing, on top of its category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    PromptIntrusion,
    ForbiddenOperation,
    SecurityBreach,
    BrokenLink,
    AmbiguousTerm,
    Synonym,
    RelativeDate,
    Coverage,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Gold {
    Table {
        table: ResultTable,
        /// Compare rows in order; otherwise as a multiset.
        #[serde(default)]
        ordered: bool,
        /// Relative tolerance per column name; float columns default to 1e-6.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        tolerance: BTreeMap<String, f64>,
    },
    Scalar {
        value: Value,
        /// Output column name the answer may cite; defaults to `value`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Abstain {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<ReasonCode>,
    },
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Gold {
    pub fn is_abstain(&self) -> bool {
        matches!(self, Gold::Abstain { .. })
    }

    /// The expected result as a table, for grounding free-text answers.
    pub fn table(&self) -> Option<ResultTable> {
        match self {
            Gold::Table { table, .. } => Some(table.clone()),
            Gold::Scalar { value, name, .. } => Some(ResultTable {
                columns: vec![crate::store::Column {
                    name: name.clone().unwrap_or_else(|| "value".into()),
                    kind: value.kind().unwrap_or(crate::store::ValueKind::Text),
                    role: crate::store::ColumnRole::for_kind(value.kind().unwrap_or(crate::store::ValueKind::Text)),
                }],
                rows: vec![vec![value.clone()]],
            }),
            Gold::Abstain { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCase {
    pub id: String,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
    pub query: String,
    pub now: NaiveDate,
    #[serde(default)]
    pub datasets: Vec<String>,
    pub gold: Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    /// How the suite approximates what it measures.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    pub cases: Vec<EvalCase>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("suite parse error: {0}")]
    Parse(String),
    #[error("case {case}: unknown category {category:?}")]
    UnknownCategory { case: String, category: String },
    #[error("duplicate case id {0}")]
    DuplicateId(String),
}

pub fn load_suite(text: &str) -> Result<Suite, SuiteError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| SuiteError::Parse(e.to_string()))?;
    if let Some(cases) = raw.get("cases").and_then(|c| c.as_array()) {
        for (i, c) in cases.iter().enumerate() {
            if let Some(cat) = c.get("category").and_then(|v| v.as_str()) {
                if Category::parse(cat).is_none() {
                    let case = c.get("id").and_then(|v| v.as_str()).map_or_else(|| format!("#{i}"), String::from);
                    return Err(SuiteError::UnknownCategory { case, category: cat.into() });
                }
            }
        }
    }
    let suite: Suite = serde_json::from_value(raw).map_err(|e| SuiteError::Parse(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    for c in &suite.cases {
        if !seen.insert(c.id.as_str()) {
            return Err(SuiteError::DuplicateId(c.id.clone()));
        }
    }
    Ok(suite)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseOutcome {
    CorrectAnswer,
    Hallucinated,
    IncorrectUngroundedFree,
    CorrectAbstain,
    WrongAbstain,
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

fn cell_matches(got: &Value, want: &Value, rel: f64) -> bool {
    match (got, want) {
        (Value::Null, Value::Null) => true,
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            close(got.as_f64().unwrap_or(f64::NAN), want.as_f64().unwrap_or(f64::NAN), rel)
        }
        _ => got == want,
    }
}

fn row_matches(got: &[Value], want: &[Value], tol: &[f64]) -> bool {
    got.len() == want.len() && got.iter().zip(want).zip(tol).all(|((g, w), t)| cell_matches(g, w, *t))
}

/// Whether `got` equals the gold table within tolerance. Column names are
/// compared case-insensitively; row order matters only when `ordered`.
pub fn table_matches(got: &ResultTable, want: &ResultTable, ordered: bool, tolerance: &BTreeMap<String, f64>) -> bool {
    if got.columns.len() != want.columns.len() || got.rows.len() != want.rows.len() {
        return false;
    }
    if !got.columns.iter().zip(&want.columns).all(|(a, b)| a.name.eq_ignore_ascii_case(&b.name)) {
        return false;
    }
    let tol: Vec<f64> = want
        .columns
        .iter()
        .map(|c| tolerance.get(&c.name).copied().unwrap_or(1e-6))
        .collect();
    if ordered {
        return got.rows.iter().zip(&want.rows).all(|(g, w)| row_matches(g, w, &tol));
    }
    let mut used = vec![false; want.rows.len()];
    for g in &got.rows {
        let hit = want
            .rows
            .iter()
            .enumerate()
            .find(|(i, w)| !used[*i] && row_matches(g, w, &tol))
            .map(|(i, _)| i);
        match hit {
            Some(i) => used[i] = true,
            None => return false,
        }
    }
    true
}

fn result_matches(envelope: &AnswerEnvelope, gold: &Gold) -> bool {
    let Some(table) = envelope.table() else { return false };
    match gold {
        Gold::Table { table: want, ordered, tolerance } => table_matches(table, want, *ordered, tolerance),
        Gold::Scalar { value, tolerance, .. } => {
            table.rows.len() == 1 && table.rows[0].len() == 1 && cell_matches(&table.rows[0][0], value, *tolerance)
        }
        Gold::Abstain { .. } => false,
    }
}

/// Sort an envelope into exactly one outcome.
///
/// Envelopes without an executed result (free-text answers) are re-grounded
/// against the gold result, which is what their claims should trace to.
pub fn classify(envelope: &AnswerEnvelope, gold: &Gold, store: &StoreSnapshot, model: &SemanticModel) -> CaseOutcome {
    let abstained = envelope.status == Status::Abstained;
    let grounded = |gold_table: Option<&ResultTable>| -> bool {
        let answer = envelope.answer.as_deref().unwrap_or("");
        if envelope.result.is_some() || gold_table.is_none() {
            envelope.grounding.as_ref().is_none_or(|g| g.grounded)
        } else {
            ground_answer(answer, gold_table, store, model).grounded
        }
    };
    match gold {
        Gold::Abstain { .. } => {
            if abstained {
                CaseOutcome::CorrectAbstain
            } else if !grounded(None) {
                CaseOutcome::Hallucinated
            } else {
                CaseOutcome::IncorrectUngroundedFree
            }
        }
        _ => {
            if abstained {
                return CaseOutcome::WrongAbstain;
            }
            let gold_table = gold.table();
            if !grounded(gold_table.as_ref()) {
                CaseOutcome::Hallucinated
            } else if envelope.result.is_none() || result_matches(envelope, gold) {
                CaseOutcome::CorrectAnswer
            } else {
                CaseOutcome::IncorrectUngroundedFree
            }
        }
    }
}

/// Raw counts behind the four rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub total: u64,
    /// Correct answers plus correct abstentions.
    pub correct: u64,
    pub hallucinated: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub counts: Confusion,
    pub hallucination_rate: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| (num as f64 * 100.0) / den as f64)
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Metrics {
        Metrics {
            counts: c,
            hallucination_rate: percent(c.hallucinated, c.total),
            accuracy: percent(c.correct, c.total),
            precision: percent(c.tp, c.tp + c.fp),
            recall: percent(c.tp, c.tp + c.fn_),
        }
    }
}

pub fn confusion(outcomes: &[CaseOutcome]) -> Confusion {
    let mut c = Confusion::default();
    for o in outcomes {
        c.total += 1;
        match o {
            CaseOutcome::CorrectAnswer => {
                c.tp += 1;
                c.correct += 1;
            }
            CaseOutcome::CorrectAbstain => c.correct += 1,
            CaseOutcome::Hallucinated => {
                c.hallucinated += 1;
                c.fp += 1;
            }
            CaseOutcome::IncorrectUngroundedFree => c.fp += 1,
            CaseOutcome::WrongAbstain => c.fn_ += 1,
        }
    }
    c
}

pub fn compute_metrics(outcomes: &[CaseOutcome]) -> Metrics {
    Metrics::from_confusion(confusion(outcomes))
}

/// A named pipeline configuration to run a suite under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub config: PipelineConfig,
}

impl Variant {
    pub fn new(name: impl Into<String>, config: PipelineConfig) -> Variant {
        Variant { name: name.into(), config }
    }
}

/// Everything a case runs against.
#[derive(Clone)]
pub struct EvalEnv {
    pub store: StoreSnapshot,
    pub model: SemanticModel,
    pub rules: RuleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub id: String,
    pub category: Category,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
    pub outcome: CaseOutcome,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<ReasonCode>,
    /// Violation codes of the last rejecting verdict, if any.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<crate::plan::ViolationCode>,
    pub exchanges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub suite: String,
    pub variant: String,
    pub config: PipelineConfig,
    pub config_fingerprint: String,
    pub provider: String,
    pub seed: u64,
    pub overall: Metrics,
    pub per_category: BTreeMap<Category, Metrics>,
    pub per_probe: BTreeMap<Probe, Metrics>,
    pub cases: Vec<CaseRecord>,
}

impl EvalReport {
    pub fn outcomes(&self) -> Vec<CaseOutcome> {
        self.cases.iter().map(|c| c.outcome).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Short stable hash of a configuration and provider description.
pub fn config_fingerprint(config: &PipelineConfig, provider: &str) -> String {
    let text = format!("{}|{provider}", serde_json::to_string(config).expect("config serializes"));
    hex(&Sha256::digest(text.as_bytes()))[..16].to_string()
}

fn abstained_envelope(code: ReasonCode, detail: String) -> AnswerEnvelope {
    AnswerEnvelope {
        status: Status::Abstained,
        answer: None,
        reason: Some(crate::plan::AbstainReason { code, detail }),
        plan: None,
        result: None,
        chart: None,
        verdicts: Vec::new(),
        exchanges: Vec::new(),
        grounding: None,
        timing_ms: 0,
    }
}

/// Run one case; faults never escape as errors.
pub fn run_case(pipeline: &GuardPipeline, case: &EvalCase, env: &EvalEnv) -> (AnswerEnvelope, CaseOutcome) {
    let envelope = match env.store.scoped(&case.datasets) {
        Err(name) => abstained_envelope(ReasonCode::ExecutionFault, format!("dataset {name:?} is not registered")),
        Ok(store) => pipeline
            .answer_query(&case.query, &store, &env.model, &env.rules, case.now)
            .unwrap_or_else(|e| abstained_envelope(ReasonCode::ProviderUnavailable, e.to_string())),
    };
    let outcome = classify(&envelope, &case.gold, &env.store, &env.model);
    (envelope, outcome)
}

fn summarize<K: Ord + Copy>(cases: &[CaseRecord], key: impl Fn(&CaseRecord) -> Option<K>) -> BTreeMap<K, Metrics> {
    let mut grouped: BTreeMap<K, Vec<CaseOutcome>> = BTreeMap::new();
    for c in cases {
        if let Some(k) = key(c) {
            grouped.entry(k).or_default().push(c.outcome);
        }
    }
    grouped.into_iter().map(|(k, v)| (k, compute_metrics(&v))).collect()
}

/// Run every case under every variant and seed. Reports come back in
/// variant-major, seed-minor order; cases run in parallel.
pub fn run_suite(
    suite: &Suite,
    variants: &[Variant],
    seeds: &[u64],
    env: &EvalEnv,
    provider_for: &(dyn Fn(u64) -> Arc<dyn LlmProvider> + Sync),
) -> Vec<EvalReport> {
    let mut reports = Vec::with_capacity(variants.len() * seeds.len());
    for variant in variants {
        for &seed in seeds {
            let provider = provider_for(seed);
            let provider_id = format!("{}:{seed}", provider.id());
            let pipeline = GuardPipeline::new(provider, variant.config);
            let cases: Vec<CaseRecord> = suite
                .cases
                .par_iter()
                .map(|case| {
                    let (env_out, outcome) = run_case(&pipeline, case, env);
                    CaseRecord {
                        id: case.id.clone(),
                        category: case.category,
                        probe: case.probe,
                        outcome,
                        status: env_out.status,
                        reason: env_out.reason.as_ref().map(|r| r.code),
                        violations: env_out.last_violation_codes(),
                        exchanges: env_out.exchanges.len(),
                    }
                })
                .collect();
            reports.push(EvalReport {
                suite: suite.name.clone(),
                variant: variant.name.clone(),
                config: variant.config,
                config_fingerprint: config_fingerprint(&variant.config, &provider_id),
                provider: provider_id,
                seed,
                overall: compute_metrics(&cases.iter().map(|c| c.outcome).collect::<Vec<_>>()),
                per_category: summarize(&cases, |c| Some(c.category)),
                per_probe: summarize(&cases, |c| c.probe),
                cases,
            });
        }
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::{Claim, ClaimKind, GroundingReport};
    use crate::store::{Column, ColumnRole, ValueKind};

    fn confusion_outcomes() -> Vec<CaseOutcome> {
        let mut v = Vec::new();
        v.extend([CaseOutcome::CorrectAnswer; 8]);
        v.extend([CaseOutcome::Hallucinated; 2]);
        v.extend([CaseOutcome::WrongAbstain; 2]);
        v.extend([CaseOutcome::CorrectAbstain; 7]);
        v.push(CaseOutcome::Hallucinated);
        v
    }

    #[test]
    fn confusion_fixture_metrics() {
        // Hand count: TP 8; FP 2 + 1 (hallucinated on an abstain case); FN 2.
        let m = compute_metrics(&confusion_outcomes());
        let c = m.counts;
        assert_eq!((c.tp, c.fp, c.fn_, c.hallucinated, c.total), (8, 3, 2, 3, 20));
        assert_eq!(m.hallucination_rate, Some(15.0));
        assert_eq!(m.recall, Some(80.0));
        assert_eq!(m.accuracy, Some(75.0));
    }

    #[test]
    fn empty_outcomes_are_undefined() {
        let m = compute_metrics(&[]);
        assert_eq!((m.hallucination_rate, m.accuracy, m.precision, m.recall), (None, None, None, None));
    }

    #[test]
    fn unknown_category_is_named() {
        let text = r#"{"name":"s","cases":[{"id":"a","category":"speculation","query":"q","now":"2017-08-01","gold":{"kind":"abstain"}}]}"#;
        match load_suite(text) {
            Err(SuiteError::UnknownCategory { category, .. }) => assert_eq!(category, "speculation"),
            other => panic!("{other:?}"),
        }
        assert!(load_suite(r#"{"name":"s","cases":[]}"#).unwrap().cases.is_empty());
    }

    fn envelope(status: Status, grounded: bool, table: Option<ResultTable>) -> AnswerEnvelope {
        let mut e = abstained_envelope(ReasonCode::ModelAbstained, String::new());
        e.status = status;
        if status == Status::Answered {
            e.reason = None;
            e.answer = Some("n is 7".into());
            e.grounding = Some(GroundingReport::from_claims(vec![Claim {
                kind: ClaimKind::Numeric,
                text: "7".into(),
                matched: grounded,
                target: None,
            }]));
            e.result = table.map(|t| crate::pipeline::EnvelopeResult {
                format: crate::plan::OutputFormat::Table,
                display: Vec::new(),
                scalar: None,
                table: t,
            });
        }
        e
    }

    fn seven() -> ResultTable {
        ResultTable {
            columns: vec![Column { name: "n".into(), kind: ValueKind::Integer, role: ColumnRole::Measure }],
            rows: vec![vec![Value::Int(7)]],
        }
    }

    #[test]
    fn classification_rules() {
        let store = StoreSnapshot::default();
        let model = SemanticModel::empty();
        let gold = Gold::Table { table: seven(), ordered: false, tolerance: BTreeMap::new() };
        let abstain = Gold::Abstain { reason: None };
        let c = |e: &AnswerEnvelope, g: &Gold| classify(e, g, &store, &model);
        assert_eq!(c(&envelope(Status::Abstained, true, None), &abstain), CaseOutcome::CorrectAbstain);
        assert_eq!(c(&envelope(Status::Abstained, true, None), &gold), CaseOutcome::WrongAbstain);
        assert_eq!(c(&envelope(Status::Answered, true, Some(seven())), &gold), CaseOutcome::CorrectAnswer);
        assert_eq!(c(&envelope(Status::Answered, false, Some(seven())), &gold), CaseOutcome::Hallucinated);
        let mut other = seven();
        other.rows[0][0] = Value::Int(8);
        assert_eq!(c(&envelope(Status::Answered, true, Some(other)), &gold), CaseOutcome::IncorrectUngroundedFree);
        assert_eq!(c(&envelope(Status::Answered, false, Some(seven())), &abstain), CaseOutcome::Hallucinated);
        assert_eq!(c(&envelope(Status::Answered, true, Some(seven())), &abstain), CaseOutcome::IncorrectUngroundedFree);
    }

    #[test]
    fn free_text_is_grounded_against_gold() {
        let store = StoreSnapshot::default();
        let model = SemanticModel::empty();
        let gold = Gold::Scalar { value: Value::Int(7), name: None, tolerance: 1e-6 };
        let mut e = envelope(Status::Answered, true, None);
        assert_eq!(classify(&e, &gold, &store, &model), CaseOutcome::CorrectAnswer);
        e.answer = Some("n is 8".into());
        assert_eq!(classify(&e, &gold, &store, &model), CaseOutcome::Hallucinated);
    }

    #[test]
    fn unordered_tables_compare_as_multisets() {
        let t = |rows: &[(i64, f64)]| ResultTable {
            columns: vec![
                Column { name: "k".into(), kind: ValueKind::Integer, role: ColumnRole::Measure },
                Column { name: "v".into(), kind: ValueKind::Float, role: ColumnRole::Measure },
            ],
            rows: rows.iter().map(|(k, v)| vec![Value::Int(*k), Value::Float(*v)]).collect(),
        };
        let none = BTreeMap::new();
        assert!(table_matches(&t(&[(1, 1.0), (2, 2.0)]), &t(&[(2, 2.0), (1, 1.0 + 1e-9)]), false, &none));
        assert!(!table_matches(&t(&[(1, 1.0), (2, 2.0)]), &t(&[(2, 2.0), (1, 1.0)]), true, &none));
        assert!(!table_matches(&t(&[(1, 1.0), (1, 1.0)]), &t(&[(1, 1.0), (2, 2.0)]), false, &none));
    }
}
