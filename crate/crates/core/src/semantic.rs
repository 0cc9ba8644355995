//! Semantic model: canonical fields, metric formulas, synonyms, and phrase rules.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::plan::{json_error, parse_expr, Expr, ParseError};
use crate::store::Dataset;
use crate::text::{normalize, PhraseMatcher};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("semantic model is not valid JSON: {0}")]
    Parse(#[from] ParseError),
    #[error("synonym cycle: {}", .cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
    #[error("synonym {alias:?} points at undefined name {target:?}")]
    DanglingTarget { alias: String, target: String },
    #[error("metric {metric:?}: {detail}")]
    BadMetricExpr { metric: String, detail: String },
    #[error("name {0:?} is defined more than once")]
    DuplicateName(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Parse(_) => "ParseError",
            ModelError::Cycle { .. } => "CycleError",
            ModelError::DanglingTarget { .. } => "DanglingTarget",
            ModelError::BadMetricExpr { .. } => "BadMetricExpr",
            ModelError::DuplicateName(_) => "DuplicateName",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub dataset: String,
    pub column: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub expr: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SynonymTarget {
    One(String),
    Many(Vec<String>),
}

impl SynonymTarget {
    fn targets(&self) -> Vec<&str> {
        match self {
            SynonymTarget::One(t) => vec![t.as_str()],
            SynonymTarget::Many(ts) => ts.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintKind {
    AnalysisType,
    OutputFormat,
    MetricSuggestion,
    FilterConstraint,
}

impl HintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HintKind::AnalysisType => "analysis_type",
            HintKind::OutputFormat => "output_format",
            HintKind::MetricSuggestion => "metric_suggestion",
            HintKind::FilterConstraint => "filter_constraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryHint {
    pub kind: HintKind,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRule {
    pub trigger: String,
    pub hint: QueryHint,
}

/// The on-disk model document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub fields: BTreeMap<String, FieldDef>,
    #[serde(default)]
    pub metrics: BTreeMap<String, MetricConfig>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, SynonymTarget>,
    #[serde(default)]
    pub rules: Vec<CustomRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", content = "target", rename_all = "snake_case")]
pub enum Resolution {
    Field(String),
    Metric(String),
    Ambiguous(Vec<String>),
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    /// Formula with synonyms resolved and nested metrics inlined.
    pub expr: Expr,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticModel {
    config: ModelConfig,
    fields: BTreeMap<String, FieldDef>,
    metrics: BTreeMap<String, Metric>,
    synonyms: BTreeMap<String, Resolution>,
    rules: Vec<(PhraseMatcher, QueryHint)>,
}

impl Serialize for SemanticModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.config.serialize(s)
    }
}

pub fn load_model(config_text: &str) -> Result<SemanticModel, ModelError> {
    let config: ModelConfig =
        serde_json::from_str(config_text).map_err(|e| json_error(config_text, &e))?;
    SemanticModel::compile(config)
}

impl SemanticModel {
    pub fn empty() -> SemanticModel {
        SemanticModel::default()
    }

    pub fn compile(raw: ModelConfig) -> Result<SemanticModel, ModelError> {
        let mut seen = BTreeSet::new();
        let mut claim = |name: &str| -> Result<String, ModelError> {
            let n = normalize(name);
            if !seen.insert(n.clone()) {
                return Err(ModelError::DuplicateName(n));
            }
            Ok(n)
        };
        let mut config = ModelConfig::default();
        for (name, def) in &raw.fields {
            config.fields.insert(claim(name)?, def.clone());
        }
        for (name, def) in &raw.metrics {
            config.metrics.insert(claim(name)?, def.clone());
        }
        for (name, target) in &raw.synonyms {
            let target = match target {
                SynonymTarget::One(t) => SynonymTarget::One(normalize(t)),
                SynonymTarget::Many(ts) => SynonymTarget::Many(ts.iter().map(|t| normalize(t)).collect()),
            };
            config.synonyms.insert(claim(name)?, target);
        }
        config.rules = raw.rules.clone();

        let mut model = SemanticModel {
            fields: config.fields.clone(),
            rules: config
                .rules
                .iter()
                .map(|r| (PhraseMatcher::new(&r.trigger), r.hint.clone()))
                .collect(),
            ..SemanticModel::default()
        };
        for alias in config.synonyms.keys() {
            let resolution = resolve_alias(&config, alias, &mut Vec::new())?;
            model.synonyms.insert(alias.clone(), resolution);
        }
        for name in config.metrics.keys() {
            let expr = compile_metric(&config, &model.synonyms, name, &mut Vec::new())?;
            let description = config.metrics[name].description.clone();
            model.metrics.insert(name.clone(), Metric { expr, description });
        }
        model.config = config;
        Ok(model)
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty() && self.metrics.is_empty() && self.synonyms.is_empty() && self.rules.is_empty()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.get(&normalize(name))
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(&normalize(name))
    }

    /// Every name the model knows: fields, metrics, and aliases.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.fields
            .keys()
            .chain(self.metrics.keys())
            .chain(self.synonyms.keys())
            .map(String::as_str)
    }

    pub fn resolve_term(&self, term: &str) -> Resolution {
        let key = normalize(term);
        if self.fields.contains_key(&key) {
            return Resolution::Field(key);
        }
        if self.metrics.contains_key(&key) {
            return Resolution::Metric(key);
        }
        self.synonyms.get(&key).cloned().unwrap_or(Resolution::Unknown)
    }

    pub fn apply_rules(&self, query: &str) -> Vec<QueryHint> {
        let haystack = normalize(query);
        let mut hints: Vec<QueryHint> = Vec::new();
        for (matcher, hint) in &self.rules {
            if matcher.matches_normalized(&haystack) && !hints.contains(hint) {
                hints.push(hint.clone());
            }
        }
        hints
    }

    /// Deterministic text block describing datasets and vocabulary for a prompt.
    pub fn render_context(&self, datasets: &[&Dataset]) -> String {
        let mut sorted: Vec<&Dataset> = datasets.to_vec();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        let mut out = String::from("Datasets:\n");
        for ds in sorted {
            let cols: Vec<String> = ds
                .schema
                .columns
                .iter()
                .map(|c| format!("{} {} {}", c.name, c.kind, role_word(c.role)))
                .collect();
            out.push_str(&format!("dataset {}({})\n", ds.name, cols.join(", ")));
        }
        if !self.fields.is_empty() || !self.metrics.is_empty() {
            out.push_str("Vocabulary:\n");
            for (name, f) in &self.fields {
                out.push_str(&format!("field {name} = {}.{}", f.dataset, f.column));
                push_description(&mut out, &f.description);
            }
            for (name, m) in &self.metrics {
                out.push_str(&format!("metric {name} = {}", m.expr));
                push_description(&mut out, &m.description);
            }
        }
        if !self.synonyms.is_empty() {
            out.push_str("Synonyms:\n");
            for (alias, res) in &self.synonyms {
                let target = match res {
                    Resolution::Field(t) | Resolution::Metric(t) => t.clone(),
                    Resolution::Ambiguous(ts) => format!("ambiguous: {}", ts.join(" | ")),
                    Resolution::Unknown => continue,
                };
                out.push_str(&format!("{alias} -> {target}\n"));
            }
        }
        out
    }
}

fn role_word(role: crate::store::ColumnRole) -> &'static str {
    match role {
        crate::store::ColumnRole::Dimension => "dimension",
        crate::store::ColumnRole::Measure => "measure",
        crate::store::ColumnRole::Time => "time",
    }
}

fn push_description(out: &mut String, description: &str) {
    if !description.trim().is_empty() {
        out.push_str(" -- ");
        out.push_str(description.trim());
    }
    out.push('\n');
}

fn resolve_alias(config: &ModelConfig, name: &str, stack: &mut Vec<String>) -> Result<Resolution, ModelError> {
    if config.fields.contains_key(name) {
        return Ok(Resolution::Field(name.to_string()));
    }
    if config.metrics.contains_key(name) {
        return Ok(Resolution::Metric(name.to_string()));
    }
    let Some(target) = config.synonyms.get(name) else {
        return Ok(Resolution::Unknown);
    };
    if let Some(pos) = stack.iter().position(|s| s == name) {
        let mut cycle = stack[pos..].to_vec();
        cycle.push(name.to_string());
        return Err(ModelError::Cycle { cycle });
    }
    stack.push(name.to_string());
    let mut candidates: Vec<String> = Vec::new();
    for t in target.targets() {
        match resolve_alias(config, t, stack)? {
            Resolution::Field(c) | Resolution::Metric(c) => candidates.push(c),
            Resolution::Ambiguous(cs) => candidates.extend(cs),
            Resolution::Unknown => {
                return Err(ModelError::DanglingTarget { alias: name.to_string(), target: t.to_string() })
            }
        }
    }
    stack.pop();
    let mut distinct: Vec<String> = Vec::new();
    for c in candidates {
        if !distinct.contains(&c) {
            distinct.push(c);
        }
    }
    Ok(match distinct.len() {
        0 => Resolution::Unknown,
        1 => {
            let only = distinct.remove(0);
            if config.fields.contains_key(&only) {
                Resolution::Field(only)
            } else {
                Resolution::Metric(only)
            }
        }
        _ => Resolution::Ambiguous(distinct),
    })
}

fn compile_metric(
    config: &ModelConfig,
    synonyms: &BTreeMap<String, Resolution>,
    name: &str,
    stack: &mut Vec<String>,
) -> Result<Expr, ModelError> {
    if let Some(pos) = stack.iter().position(|s| s == name) {
        let mut cycle = stack[pos..].to_vec();
        cycle.push(name.to_string());
        return Err(ModelError::Cycle { cycle });
    }
    let text = &config.metrics[name].expr;
    let parsed = parse_expr(text).map_err(|e| ModelError::BadMetricExpr {
        metric: name.to_string(),
        detail: e.to_string(),
    })?;
    stack.push(name.to_string());
    let mut failure = None;
    let expr = parsed.substitute(&mut |r| {
        if failure.is_some() {
            return None;
        }
        let key = normalize(r);
        let resolution = if config.fields.contains_key(&key) {
            Resolution::Field(key.clone())
        } else if config.metrics.contains_key(&key) {
            Resolution::Metric(key.clone())
        } else {
            synonyms.get(&key).cloned().unwrap_or(Resolution::Unknown)
        };
        match resolution {
            Resolution::Field(f) => Some(Expr::Ref(f)),
            Resolution::Metric(m) => match compile_metric(config, synonyms, &m, stack) {
                Ok(e) => Some(e),
                Err(e) => {
                    failure = Some(e);
                    None
                }
            },
            Resolution::Ambiguous(cs) => {
                failure = Some(ModelError::BadMetricExpr {
                    metric: name.to_string(),
                    detail: format!("{r:?} is ambiguous between {}", cs.join(", ")),
                });
                None
            }
            Resolution::Unknown => {
                failure = Some(ModelError::BadMetricExpr {
                    metric: name.to_string(),
                    detail: format!("{r:?} is not a defined field or metric"),
                });
                None
            }
        }
    });
    stack.pop();
    match failure {
        Some(e) => Err(e),
        None => Ok(expr),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(text: &str) -> SemanticModel {
        load_model(text).unwrap()
    }

    const BASE: &str = r#"{
        "fields": {
            "cost": {"dataset": "campaigns", "column": "cost", "description": "Ad spend"},
            "revenue": {"dataset": "campaigns", "column": "revenue"},
            "clicks": {"dataset": "campaigns", "column": "clicks"},
            "impressions": {"dataset": "campaigns", "column": "impressions"},
            "conversions": {"dataset": "campaigns", "column": "conversions"}
        },
        "metrics": {
            "roas": {"expr": "revenue / spend"},
            "click_rate": {"expr": "clicks / impressions"},
            "conversion_rate": {"expr": "conversions / clicks"}
        },
        "synonyms": {"spend": "cost", "ad spend": "spend", "rate": ["click_rate", "conversion_rate"], "ctr": "click_rate"},
        "rules": [
            {"trigger": "trend", "hint": {"kind": "analysis_type", "payload": "time_series"}},
            {"trigger": "roi", "hint": {"kind": "metric_suggestion", "payload": "roi"}},
            {"trigger": "trends", "hint": {"kind": "analysis_type", "payload": "time_series"}}
        ]
    }"#;

    #[test]
    fn synonym_chains_collapse() {
        let m = model(BASE);
        assert_eq!(m.resolve_term("Spend"), Resolution::Field("cost".into()));
        assert_eq!(m.resolve_term("  AD   spend "), Resolution::Field("cost".into()));
        assert_eq!(m.resolve_term("cost"), Resolution::Field("cost".into()));
        assert_eq!(m.resolve_term("ctr"), Resolution::Metric("click_rate".into()));
        assert_eq!(m.resolve_term("frobnication"), Resolution::Unknown);
        assert_eq!(
            m.resolve_term("rate"),
            Resolution::Ambiguous(vec!["click_rate".into(), "conversion_rate".into()])
        );
    }

    #[test]
    fn metric_refs_canonicalized() {
        let m = model(BASE);
        assert_eq!(m.metric("roas").unwrap().expr.to_string(), "revenue / cost");
    }

    #[test]
    fn cycle_is_named() {
        let err = load_model(r#"{"synonyms":{"a":"b","b":"a"}}"#).unwrap_err();
        match err {
            ModelError::Cycle { cycle } => {
                assert!(cycle.contains(&"a".to_string()) && cycle.contains(&"b".to_string()))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_and_bad_metric() {
        assert!(matches!(
            load_model(r#"{"synonyms":{"a":"nothing"}}"#),
            Err(ModelError::DanglingTarget { .. })
        ));
        assert!(matches!(
            load_model(r#"{"metrics":{"m":{"expr":"x +"}}}"#),
            Err(ModelError::BadMetricExpr { .. })
        ));
        assert!(matches!(
            load_model(r#"{"metrics":{"m":{"expr":"ghost / 2"}}}"#),
            Err(ModelError::BadMetricExpr { .. })
        ));
        assert!(matches!(
            load_model(r#"{"metrics":{"m":{"expr":"n"},"n":{"expr":"m"}}}"#),
            Err(ModelError::Cycle { .. })
        ));
        assert!(matches!(load_model(r#"{"fieldz":{}}"#), Err(ModelError::Parse(_))));
    }

    #[test]
    fn rules_in_order_without_duplicates() {
        let m = model(BASE);
        let hints = m.apply_rules("Generate a chart showing traffic trends");
        assert_eq!(hints.len(), 1);
        assert_eq!(hints[0].payload, "time_series");
        let hints = m.apply_rules("Which campaign had the highest ROI?");
        assert_eq!(hints[0].kind, HintKind::MetricSuggestion);
        assert!(SemanticModel::empty().apply_rules("trend").is_empty());
    }

    #[test]
    fn context_counts_vocabulary_lines() {
        let m = model(
            r#"{"fields":{"a":{"dataset":"d","column":"a"},"b":{"dataset":"d","column":"b"}},"metrics":{"r":{"expr":"a / b"}}}"#,
        );
        let text = m.render_context(&[]);
        let vocab = text.lines().filter(|l| l.starts_with("field ") || l.starts_with("metric ")).count();
        assert_eq!(vocab, 3);
        assert_eq!(text, m.render_context(&[]));
        assert_eq!(SemanticModel::empty().render_context(&[]), "Datasets:\n");
    }
}
