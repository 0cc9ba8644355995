//! Strict rules: query screening, execution preconditions, and answer audits.

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::claims::{extract_numbers, extract_urls, number_matches};
use crate::exec::{filtered_row_count, ResultTable};
use crate::plan::{json_error, FilterOp, ParseError, QueryPlan, ReasonCode, Verdict, Violation, ViolationCode};
use crate::store::{DatasetLookup, Value, ValueKind};
use crate::text::{normalize, PhraseMatcher};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSet {
    #[serde(default = "one")]
    pub min_rows: usize,
    #[serde(default = "yes")]
    pub require_time_coverage: bool,
    #[serde(default)]
    pub forbidden_ops: Vec<String>,
    #[serde(default)]
    pub sensitive_terms: Vec<String>,
    #[serde(default)]
    pub intrusion_patterns: Vec<String>,
    #[serde(default = "yes")]
    pub url_policy: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for RuleSet {
    fn default() -> RuleSet {
        RuleSet {
            min_rows: 1,
            require_time_coverage: true,
            forbidden_ops: Vec::new(),
            sensitive_terms: Vec::new(),
            intrusion_patterns: Vec::new(),
            url_policy: true,
        }
    }
}

impl RuleSet {
    pub fn load(text: &str) -> Result<RuleSet, ParseError> {
        serde_json::from_str(text).map_err(|e| json_error(text, &e))
    }

    /// Passes everything: no patterns, no thresholds, no URL policy.
    pub fn permissive() -> RuleSet {
        RuleSet { min_rows: 0, require_time_coverage: false, url_policy: false, ..RuleSet::default() }
    }
}

pub fn screen_query(query: &str, rules: &RuleSet) -> Verdict {
    let haystack = normalize(query);
    let mut violations = Vec::new();
    for p in &rules.intrusion_patterns {
        if PhraseMatcher::new(p).matches_normalized(&haystack) {
            violations.push(Violation::new(ViolationCode::PromptIntrusion, "", format!("matched intrusion pattern {p:?}")));
        }
    }
    for t in &rules.sensitive_terms {
        if PhraseMatcher::new(t).matches_normalized(&haystack) {
            violations.push(Violation::new(ViolationCode::Security, "", format!("mentions sensitive term {t:?}")));
        }
    }
    Verdict::from_violations(violations)
}

/// Inclusive day-number bounds requested by the plan's filters on one column.
#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: i64,
    hi: i64,
}

fn day_number(v: &Value) -> Option<i64> {
    match v {
        Value::Date(d) => Some(d.num_days_from_ce() as i64),
        Value::Timestamp(t) => Some(t.div_euclid(86_400) + 719_163),
        _ => None,
    }
}

fn requested_interval(plan: &QueryPlan, column: &str, kind: ValueKind) -> Option<(Interval, Vec<i64>)> {
    let strict = if kind == ValueKind::Date { 1 } else { 0 };
    let mut iv = Interval { lo: i64::MIN, hi: i64::MAX };
    let mut members: Vec<i64> = Vec::new();
    let mut constrained = false;
    for f in plan.filters.iter().filter(|f| f.col.eq_ignore_ascii_case(column)) {
        let days: Vec<i64> = f.args.iter().filter_map(day_number).collect();
        if days.len() != f.args.len() || days.is_empty() {
            continue;
        }
        constrained = true;
        match f.op {
            FilterOp::Eq => {
                iv.lo = iv.lo.max(days[0]);
                iv.hi = iv.hi.min(days[0]);
            }
            FilterOp::Between => {
                iv.lo = iv.lo.max(days[0]);
                iv.hi = iv.hi.min(days[1]);
            }
            FilterOp::Ge => iv.lo = iv.lo.max(days[0]),
            FilterOp::Gt => iv.lo = iv.lo.max(days[0] + strict),
            FilterOp::Le => iv.hi = iv.hi.min(days[0]),
            FilterOp::Lt => iv.hi = iv.hi.min(days[0] - strict),
            FilterOp::In => members.extend(days),
            FilterOp::Ne | FilterOp::Contains => {}
        }
    }
    constrained.then_some((iv, members))
}

pub fn check_preconditions(plan: &QueryPlan, store: &dyn DatasetLookup, rules: &RuleSet) -> Verdict {
    let tags = plan.operation_tags();
    let forbidden: Vec<Violation> = rules
        .forbidden_ops
        .iter()
        .filter(|op| tags.contains(op.as_str()))
        .map(|op| Violation::new(ViolationCode::ForbiddenOperation, "", format!("operation {op:?} is not allowed")))
        .collect();
    if !forbidden.is_empty() {
        return Verdict::Reject { violations: forbidden };
    }

    if rules.require_time_coverage {
        let names = std::iter::once(&plan.source).chain(plan.joins.iter().map(|j| &j.right));
        for name in names {
            let Some(ds) = store.find(name) else { continue };
            let (Some(t), Some((start, end))) = (ds.schema.primary_time(), ds.metadata.time_coverage) else {
                continue;
            };
            let col = &ds.schema.columns[t];
            let qualified = format!("{}.{}", ds.name, col.name);
            let Some((iv, members)) = requested_interval(plan, &qualified, col.kind) else {
                continue;
            };
            let (cs, ce) = (start.num_days_from_ce() as i64, end.num_days_from_ce() as i64);
            let disjoint = iv.lo > iv.hi
                || iv.hi < cs
                || iv.lo > ce
                || (!members.is_empty() && !members.iter().any(|&d| d >= cs.max(iv.lo) && d <= ce.min(iv.hi)));
            if disjoint {
                return Verdict::abstain(
                    ReasonCode::InsufficientCoverage,
                    format!(
                        "{} covers {start}..{end}; the requested period on {} falls outside it",
                        ds.name, col.name
                    ),
                );
            }
        }
    }

    match filtered_row_count(plan, store) {
        Ok(n) if n < rules.min_rows => Verdict::abstain(
            ReasonCode::InsufficientData,
            format!("the query matches {n} row(s); at least {} required", rules.min_rows),
        ),
        Ok(_) => Verdict::Pass,
        Err(e) => Verdict::abstain(ReasonCode::ExecutionFault, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub code: ViolationCode,
    pub claim: String,
    pub detail: String,
}

impl AuditViolation {
    pub fn to_violation(&self) -> Violation {
        Violation::new(self.code, "", format!("{:?}: {}", self.claim, self.detail))
    }
}

/// Text cells from every dataset in the store, for URL checks.
pub fn source_has_text(store: &dyn DatasetLookup, needle: &str) -> bool {
    store.dataset_names().iter().filter_map(|n| store.dataset(n)).any(|ds| {
        ds.rows
            .iter()
            .flatten()
            .any(|v| v.as_text().is_some_and(|t| t == needle))
    })
}

/// Audit free text. Links are checked against the result and the source data;
/// numbers only when there is an executed result.
pub fn audit_answer(
    answer: &str,
    result: Option<&ResultTable>,
    store: &dyn DatasetLookup,
    rules: &RuleSet,
) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    if rules.url_policy {
        for url in extract_urls(answer) {
            let in_result = result.is_some_and(|r| r.cells().any(|v| v.as_text() == Some(url.as_str())));
            if !in_result && !source_has_text(store, &url) {
                out.push(AuditViolation {
                    code: ViolationCode::BrokenLink,
                    claim: url,
                    detail: "link does not appear in the result or the source data".into(),
                });
            }
        }
    }
    // Numbers can only be checked against an executed result.
    if let Some(r) = result {
        for tok in extract_numbers(answer) {
            if !r.cells().any(|c| number_matches(&tok, c)) {
                out.push(AuditViolation {
                    code: ViolationCode::FabricatedValue,
                    claim: tok.text,
                    detail: "number does not match any result value".into(),
                });
            }
        }
    }
    let haystack = normalize(answer);
    for term in &rules.sensitive_terms {
        if PhraseMatcher::new(term).matches_normalized(&haystack) {
            out.push(AuditViolation {
                code: ViolationCode::SensitiveLeak,
                claim: term.clone(),
                detail: "answer mentions a sensitive term".into(),
            });
        }
    }
    out
}
