//! Schema-aware plan validation. Reports every violation, and produces a
//! canonical plan whose column refs are qualified `dataset.column` names.

use std::collections::HashMap;

use super::doc::{AggFn, FilterOp, OutputFormat, QueryPlan};
use super::expr::{Expr, Number};
use super::verdict::{ReasonCode, Verdict, Violation, ViolationCode};
use crate::semantic::{Resolution, SemanticModel};
use crate::store::{Column, ColumnRole, Dataset, DatasetLookup, Value, ValueKind};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameColumn {
    pub dataset: String,
    pub name: String,
    pub kind: ValueKind,
    pub role: ColumnRole,
}

impl FrameColumn {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.dataset, self.name)
    }
}

/// Columns visible to a plan after its joins: source columns, then each joined dataset's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub columns: Vec<FrameColumn>,
}

impl Frame {
    pub fn for_datasets(datasets: &[&Dataset]) -> Frame {
        let mut frame = Frame::default();
        for ds in datasets {
            frame.extend(ds);
        }
        frame
    }

    fn extend(&mut self, ds: &Dataset) {
        self.columns.extend(ds.schema.columns.iter().map(|c| FrameColumn {
            dataset: ds.name.clone(),
            name: c.name.clone(),
            kind: c.kind,
            role: c.role,
        }));
    }

    /// `dataset.column` exactly, or a bare name's first match (case-insensitive).
    pub fn resolve(&self, reference: &str) -> Option<usize> {
        self.resolve_within(reference, None)
    }

    fn resolve_within(&self, reference: &str, dataset: Option<&str>) -> Option<usize> {
        let reference = reference.trim();
        let in_scope = |c: &FrameColumn| dataset.is_none_or(|d| c.dataset.eq_ignore_ascii_case(d));
        if let Some(i) = self
            .columns
            .iter()
            .position(|c| in_scope(c) && c.qualified().eq_ignore_ascii_case(reference))
        {
            return Some(i);
        }
        self.columns
            .iter()
            .position(|c| in_scope(c) && c.name.eq_ignore_ascii_case(reference))
    }

    /// Output names for the selected columns: bare, or qualified when two share a bare name.
    pub fn output_names(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .map(|&i| {
                let col = &self.columns[i];
                let clash = indices
                    .iter()
                    .filter(|&&j| self.columns[j].name.eq_ignore_ascii_case(&col.name))
                    .count()
                    > 1;
                if clash {
                    col.qualified()
                } else {
                    col.name.clone()
                }
            })
            .collect()
    }
}

pub fn resolve_in_frame(frame: &Frame, reference: &str) -> Option<usize> {
    frame.resolve(reference)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub verdict: Verdict,
    /// Present only when the verdict is pass.
    pub plan: Option<QueryPlan>,
    pub columns: Vec<Column>,
}

enum Lookup {
    Found(usize),
    Metric(String),
    Ambiguous(Vec<String>),
    Missing(String),
}

struct Checker<'a> {
    model: &'a SemanticModel,
    violations: Vec<Violation>,
    ambiguous: Vec<(String, Vec<String>)>,
}

impl Checker<'_> {
    fn violation(&mut self, code: ViolationCode, path: String, message: String) {
        self.violations.push(Violation { code, message, path });
    }

    fn lookup(&self, frame: &Frame, reference: &str, dataset: Option<&str>) -> Lookup {
        if let Some(i) = frame.resolve_within(reference, dataset) {
            return Lookup::Found(i);
        }
        if reference.contains('.') || reference.trim().is_empty() {
            return Lookup::Missing(format!("no column {reference:?} in the plan's datasets"));
        }
        match self.model.resolve_term(reference) {
            Resolution::Field(f) => {
                let def = self.model.field(&f).expect("resolved field is defined");
                if dataset.is_some_and(|d| !d.eq_ignore_ascii_case(&def.dataset)) {
                    return Lookup::Missing(format!(
                        "{reference:?} means {}.{}, which is not in {}",
                        def.dataset,
                        def.column,
                        dataset.unwrap_or_default()
                    ));
                }
                match frame.resolve_within(&format!("{}.{}", def.dataset, def.column), dataset) {
                    Some(i) => Lookup::Found(i),
                    None => Lookup::Missing(format!(
                        "{reference:?} means {}.{}, which is not among the plan's datasets",
                        def.dataset, def.column
                    )),
                }
            }
            Resolution::Metric(m) => Lookup::Metric(m),
            Resolution::Ambiguous(cs) => Lookup::Ambiguous(cs),
            Resolution::Unknown => Lookup::Missing(format!("no column {reference:?} in the plan's datasets")),
        }
    }

    fn column(&mut self, frame: &Frame, reference: &str, dataset: Option<&str>, path: String) -> Option<usize> {
        match self.lookup(frame, reference, dataset) {
            Lookup::Found(i) => Some(i),
            Lookup::Metric(m) => {
                self.violation(
                    ViolationCode::UnknownColumn,
                    path,
                    format!("{reference:?} is the metric {m}, not a column; compute it with derive"),
                );
                None
            }
            Lookup::Ambiguous(cs) => {
                self.note_ambiguity(reference, cs);
                None
            }
            Lookup::Missing(msg) => {
                self.violation(ViolationCode::UnknownColumn, path, msg);
                None
            }
        }
    }

    fn note_ambiguity(&mut self, term: &str, candidates: Vec<String>) {
        if !self.ambiguous.iter().any(|(t, _)| t.eq_ignore_ascii_case(term)) {
            self.ambiguous.push((term.to_string(), candidates));
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Validate `plan` against the datasets in `store` and the vocabulary in `model`.
pub fn validate_plan(plan: &QueryPlan, store: &dyn DatasetLookup, model: &SemanticModel) -> ValidationOutcome {
    let mut ck = Checker { model, violations: Vec::new(), ambiguous: Vec::new() };
    let mut canon = plan.clone();

    if let Some(limit) = plan.limit {
        if limit < 0 {
            ck.violation(ViolationCode::BadLimit, "limit".into(), format!("limit must be >= 0, got {limit}"));
        }
    }

    let Some(source) = store.find(&plan.source) else {
        ck.violation(
            ViolationCode::UnknownDataset,
            "source".into(),
            format!("no dataset named {:?}; available: {}", plan.source, store.dataset_names().join(", ")),
        );
        for (i, j) in plan.joins.iter().enumerate() {
            if store.find(&j.right).is_none() {
                ck.violation(
                    ViolationCode::UnknownDataset,
                    format!("joins[{i}].right"),
                    format!("no dataset named {:?}", j.right),
                );
            }
        }
        return finish(ck, None, Vec::new());
    };
    canon.source = source.name.clone();
    let mut frame = Frame::for_datasets(&[source]);
    let mut in_plan = vec![source.name.clone()];

    // joins
    for (i, join) in plan.joins.iter().enumerate() {
        let Some(right) = store.find(&join.right) else {
            ck.violation(
                ViolationCode::UnknownDataset,
                format!("joins[{i}].right"),
                format!("no dataset named {:?}", join.right),
            );
            continue;
        };
        canon.joins[i].right = right.name.clone();
        if in_plan.contains(&right.name) {
            ck.violation(
                ViolationCode::BadJoinKeys,
                format!("joins[{i}].right"),
                format!("dataset {} is already part of the plan", right.name),
            );
            continue;
        }
        if join.on.is_empty() {
            ck.violation(ViolationCode::BadJoinKeys, format!("joins[{i}].on"), "join needs at least one key pair".into());
        }
        let right_frame = Frame::for_datasets(&[right]);
        for (k, (l, r)) in join.on.iter().enumerate() {
            let li = ck.column(&frame, l, None, format!("joins[{i}].on[{k}][0]"));
            let ri = ck.column(&right_frame, r, Some(&right.name), format!("joins[{i}].on[{k}][1]"));
            if let (Some(li), Some(ri)) = (li, ri) {
                let (lc, rc) = (&frame.columns[li], &right_frame.columns[ri]);
                if lc.kind != rc.kind {
                    ck.violation(
                        ViolationCode::BadJoinKeys,
                        format!("joins[{i}].on[{k}]"),
                        format!("{} is {} but {} is {}", lc.qualified(), lc.kind, rc.qualified(), rc.kind),
                    );
                }
                canon.joins[i].on[k] = (lc.qualified(), rc.qualified());
            }
        }
        frame.extend(right);
        in_plan.push(right.name.clone());
    }

    // filters
    for (i, f) in plan.filters.iter().enumerate() {
        let Some(ci) = ck.column(&frame, &f.col, None, format!("filters[{i}].col")) else {
            continue;
        };
        let col = frame.columns[ci].clone();
        canon.filters[i].col = col.qualified();
        let arity_ok = match f.op {
            FilterOp::Between => f.args.len() == 2,
            FilterOp::In => !f.args.is_empty(),
            _ => f.args.len() == 1,
        };
        if !arity_ok {
            ck.violation(
                ViolationCode::TypeMismatch,
                format!("filters[{i}].args"),
                format!("{:?} takes {} argument(s), got {}", f.op, arity_text(f.op), f.args.len()),
            );
            continue;
        }
        if f.op == FilterOp::Contains && col.kind != ValueKind::Text {
            ck.violation(
                ViolationCode::TypeMismatch,
                format!("filters[{i}].op"),
                format!("contains applies to text columns; {} is {}", col.qualified(), col.kind),
            );
            continue;
        }
        for (k, arg) in f.args.iter().enumerate() {
            match coerce_arg(arg, col.kind) {
                Some(v) => canon.filters[i].args[k] = v,
                None => ck.violation(
                    ViolationCode::TypeMismatch,
                    format!("filters[{i}].args[{k}]"),
                    format!("{} cannot be compared with {} column {}", describe(arg), col.kind, col.qualified()),
                ),
            }
        }
    }

    // group_by
    let mut group_idx: Vec<usize> = Vec::new();
    for (i, g) in plan.group_by.iter().enumerate() {
        if let Some(ci) = ck.column(&frame, g, None, format!("group_by[{i}]")) {
            if group_idx.contains(&ci) {
                ck.violation(ViolationCode::BadAlias, format!("group_by[{i}]"), format!("{g:?} is grouped twice"));
                continue;
            }
            canon.group_by[i] = frame.columns[ci].qualified();
            group_idx.push(ci);
        }
    }
    let raw = plan.is_row_listing();
    let base_idx: Vec<usize> = if raw { (0..frame.columns.len()).collect() } else { group_idx.clone() };

    let mut columns: Vec<Column> = Vec::new();
    let mut by_frame: HashMap<usize, String> = HashMap::new();
    for (&ci, name) in base_idx.iter().zip(frame.output_names(&base_idx)) {
        let fc = &frame.columns[ci];
        columns.push(Column { name: name.clone(), kind: fc.kind, role: fc.role });
        by_frame.insert(ci, name);
    }

    let taken = |ck: &mut Checker, columns: &[Column], alias: &str, path: String| -> bool {
        if !is_identifier(alias) {
            ck.violation(ViolationCode::BadAlias, path, format!("alias {alias:?} is not an identifier"));
            return false;
        }
        if columns.iter().any(|c| c.name.eq_ignore_ascii_case(alias)) {
            ck.violation(ViolationCode::BadAlias, path, format!("alias {alias:?} is already an output column"));
            return false;
        }
        true
    };

    // aggregates
    for (i, agg) in plan.aggregates.iter().enumerate() {
        let kind = if agg.col == "*" {
            if agg.func != AggFn::Count {
                ck.violation(
                    ViolationCode::TypeMismatch,
                    format!("aggregates[{i}].col"),
                    format!("{:?} needs a column; \"*\" only works with count", agg.func),
                );
                None
            } else {
                Some(ValueKind::Integer)
            }
        } else {
            ck.column(&frame, &agg.col, None, format!("aggregates[{i}].col")).and_then(|ci| {
                let col = &frame.columns[ci];
                canon.aggregates[i].col = col.qualified();
                match agg.func {
                    AggFn::Count => Some(ValueKind::Integer),
                    _ if !col.kind.is_numeric() => {
                        let msg = format!("{:?} needs a numeric column; {} is {}", agg.func, col.qualified(), col.kind);
                        ck.violation(ViolationCode::TypeMismatch, format!("aggregates[{i}].col"), msg);
                        None
                    }
                    AggFn::Avg => Some(ValueKind::Float),
                    _ => Some(col.kind),
                }
            })
        };
        let ok = taken(&mut ck, &columns, &agg.alias, format!("aggregates[{i}].as"));
        columns.push(Column {
            name: if ok { agg.alias.clone() } else { format!("#agg{i}") },
            kind: kind.unwrap_or(ValueKind::Float),
            role: ColumnRole::Measure,
        });
    }

    // derive
    for (i, d) in plan.derive.iter().enumerate() {
        let path = format!("derive[{i}].expr");
        let mut kinds: Vec<ValueKind> = Vec::new();
        let mut problems: Vec<(ViolationCode, String)> = Vec::new();
        let mut ambiguities: Vec<(String, Vec<String>)> = Vec::new();
        let expr = d.expr.substitute(&mut |r| {
            resolve_derive_ref(&ck, &frame, &columns, &by_frame, r, &mut kinds, &mut problems, &mut ambiguities)
        });
        for (code, msg) in problems {
            ck.violation(code, path.clone(), msg);
        }
        for (t, cs) in ambiguities {
            ck.note_ambiguity(&t, cs);
        }
        canon.derive[i].expr = expr.clone();
        let float = expr_has_division_or_float(&expr) || kinds.contains(&ValueKind::Float);
        let ok = taken(&mut ck, &columns, &d.alias, format!("derive[{i}].as"));
        columns.push(Column {
            name: if ok { d.alias.clone() } else { format!("#derive{i}") },
            kind: if float { ValueKind::Float } else { ValueKind::Integer },
            role: ColumnRole::Measure,
        });
    }

    // sort
    for (i, s) in plan.sort.iter().enumerate() {
        let found = columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(s.by.trim()))
            .map(|c| c.name.clone())
            .or_else(|| match ck.lookup(&frame, &s.by, None) {
                Lookup::Found(ci) => by_frame.get(&ci).cloned(),
                _ => None,
            });
        match found {
            Some(name) => canon.sort[i].by = name,
            None => ck.violation(
                ViolationCode::BadSortKey,
                format!("sort[{i}].by"),
                format!("{:?} is not an output column", s.by),
            ),
        }
    }

    // output shape
    match plan.output.format {
        OutputFormat::Scalar => {
            if plan.output.chart_kind.is_some() {
                ck.violation(ViolationCode::BadChartShape, "output.chart_kind".into(), "chart_kind only applies to chart output".into());
            }
            if raw || !plan.group_by.is_empty() || columns.len() != 1 || plan.limit == Some(0) {
                ck.violation(
                    ViolationCode::BadChartShape,
                    "output.format".into(),
                    "scalar output needs one ungrouped aggregate or derived column".into(),
                );
            }
        }
        OutputFormat::Table => {
            if plan.output.chart_kind.is_some() {
                ck.violation(ViolationCode::BadChartShape, "output.chart_kind".into(), "chart_kind only applies to chart output".into());
            }
        }
        OutputFormat::Chart => {
            if plan.output.chart_kind.is_none() {
                ck.violation(ViolationCode::BadChartShape, "output.chart_kind".into(), "chart output needs chart_kind".into());
            }
            if !columns.iter().any(|c| c.role != ColumnRole::Measure) {
                ck.violation(ViolationCode::BadChartShape, "output".into(), "chart needs a dimension or time column for the x axis".into());
            }
            if !columns.iter().any(|c| c.role == ColumnRole::Measure && c.kind.is_numeric()) {
                ck.violation(ViolationCode::BadChartShape, "output".into(), "chart needs at least one numeric series".into());
            }
        }
    }

    finish(ck, Some(canon), columns)
}

fn finish(ck: Checker, canon: Option<QueryPlan>, columns: Vec<Column>) -> ValidationOutcome {
    if !ck.violations.is_empty() {
        let mut violations = ck.violations;
        for (term, cs) in ck.ambiguous {
            violations.push(Violation::new(
                ViolationCode::UnknownColumn,
                "",
                format!("{term:?} is ambiguous: {}", cs.join(" or ")),
            ));
        }
        return ValidationOutcome { verdict: Verdict::Reject { violations }, plan: None, columns };
    }
    if !ck.ambiguous.is_empty() {
        let detail = ck
            .ambiguous
            .iter()
            .map(|(t, cs)| format!("{t:?} could mean {}", cs.join(" or ")))
            .collect::<Vec<_>>()
            .join("; ");
        return ValidationOutcome { verdict: Verdict::abstain(ReasonCode::AmbiguousTerm, detail), plan: None, columns };
    }
    ValidationOutcome { verdict: Verdict::Pass, plan: canon, columns }
}

#[allow(clippy::too_many_arguments)]
fn resolve_derive_ref(
    ck: &Checker,
    frame: &Frame,
    columns: &[Column],
    by_frame: &HashMap<usize, String>,
    r: &str,
    kinds: &mut Vec<ValueKind>,
    problems: &mut Vec<(ViolationCode, String)>,
    ambiguities: &mut Vec<(String, Vec<String>)>,
) -> Option<Expr> {
    let available = |name: &str| columns.iter().find(|c| c.name.eq_ignore_ascii_case(name));
    let bind = |c: &Column, kinds: &mut Vec<ValueKind>, problems: &mut Vec<(ViolationCode, String)>| {
        if !c.kind.is_numeric() {
            problems.push((ViolationCode::TypeMismatch, format!("{} is {}, not numeric", c.name, c.kind)));
        }
        kinds.push(c.kind);
        Some(Expr::Ref(c.name.clone()))
    };
    if let Some(c) = available(r) {
        return bind(c, kinds, problems);
    }
    match ck.lookup(frame, r, None) {
        Lookup::Found(ci) => {
            if let Some(c) = by_frame.get(&ci).and_then(|n| available(n)) {
                return bind(c, kinds, problems);
            }
            // A field whose canonical name is an aggregate alias.
            if let Resolution::Field(f) = ck.model.resolve_term(r) {
                if let Some(c) = available(&f) {
                    return bind(c, kinds, problems);
                }
            }
            problems.push((
                ViolationCode::BadAlias,
                format!("{r:?} is neither a group_by column nor an earlier alias"),
            ));
            None
        }
        Lookup::Metric(m) => {
            let metric = ck.model.metric(&m).expect("resolved metric is defined");
            let mut missing = Vec::new();
            let expanded = metric.expr.substitute(&mut |leaf| match available(leaf) {
                Some(c) => bind(c, kinds, problems),
                None => {
                    missing.push(leaf.to_string());
                    None
                }
            });
            if missing.is_empty() {
                Some(expanded)
            } else {
                problems.push((
                    ViolationCode::BadAlias,
                    format!("metric {m} = {} needs aliases named {}", metric.expr, missing.join(", ")),
                ));
                None
            }
        }
        Lookup::Ambiguous(cs) => {
            ambiguities.push((r.to_string(), cs));
            None
        }
        Lookup::Missing(msg) => {
            if let Resolution::Field(f) = ck.model.resolve_term(r) {
                if let Some(c) = available(&f) {
                    return bind(c, kinds, problems);
                }
            }
            problems.push((ViolationCode::UnknownColumn, format!("{msg}, and no alias {r:?}")));
            None
        }
    }
}

fn expr_has_division_or_float(expr: &Expr) -> bool {
    match expr {
        Expr::Number(Number::Float(_)) => true,
        Expr::Number(Number::Int(_)) | Expr::Ref(_) => false,
        Expr::Binary { op, lhs, rhs } => {
            *op == super::expr::BinOp::Div || expr_has_division_or_float(lhs) || expr_has_division_or_float(rhs)
        }
    }
}

fn coerce_arg(arg: &Value, kind: ValueKind) -> Option<Value> {
    match (arg, kind) {
        (Value::Null, _) => None,
        (Value::Float(_), ValueKind::Integer) => Some(arg.clone()),
        _ => arg.coerce_to(kind),
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Text(t) => format!("{t:?}"),
        other => other.display(),
    }
}

fn arity_text(op: FilterOp) -> &'static str {
    match op {
        FilterOp::Between => "exactly 2",
        FilterOp::In => "at least 1",
        _ => "exactly 1",
    }
}

#[cfg(test)]
mod tests {
    use super::super::doc::parse_plan;
    use super::*;
    use crate::semantic::load_model;
    use crate::store::{ingest_csv, IngestOptions, StoreSnapshot};

    fn store() -> StoreSnapshot {
        let sessions = ingest_csv(
            b"date,country,device,users,revenue,campaign_id\n2017-01-01,US,mobile,3,10.5,c1\n2017-01-02,UK,desktop,4,2.0,c2\n",
            "sessions",
            &IngestOptions::default(),
        )
        .unwrap();
        let campaigns = ingest_csv(
            b"campaign_id,campaign_name,cost\nc1,Spring Sale,5.0\nc3,Fall Push,7.0\n",
            "campaigns",
            &IngestOptions::default(),
        )
        .unwrap();
        StoreSnapshot::from_datasets([sessions, campaigns])
    }

    fn model() -> SemanticModel {
        load_model(
            r#"{"fields":{"country":{"dataset":"sessions","column":"country"},
                          "cost":{"dataset":"campaigns","column":"cost"},
                          "revenue":{"dataset":"sessions","column":"revenue"}},
                "metrics":{"roas":{"expr":"revenue / cost"},"share":{"expr":"revenue / 2"}},
                "synonyms":{"nation":"country","spend":"cost","income":"revenue","rate":["roas","share"]}}"#,
        )
        .unwrap()
    }

    fn check(text: &str) -> ValidationOutcome {
        validate_plan(&parse_plan(text).unwrap(), &store(), &model())
    }

    fn codes(out: &ValidationOutcome) -> Vec<(ViolationCode, String)> {
        out.verdict.violations().iter().map(|v| (v.code, v.path.clone())).collect()
    }

    #[test]
    fn sum_by_country_passes_and_canonicalizes() {
        let out = check(r#"{"source":"sessions","group_by":["nation"],"aggregates":[{"fn":"sum","col":"income","as":"revenue"}],"sort":[{"by":"revenue","dir":"desc"}]}"#);
        assert_eq!(out.verdict, Verdict::Pass);
        let plan = out.plan.unwrap();
        assert_eq!(plan.group_by, vec!["sessions.country"]);
        assert_eq!(plan.aggregates[0].col, "sessions.revenue");
        let names: Vec<_> = out.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["country", "revenue"]);
    }

    #[test]
    fn unknown_column_path() {
        let out = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"ad_frequency_x","as":"n"}]}"#);
        assert_eq!(codes(&out), vec![(ViolationCode::UnknownColumn, "aggregates[0].col".to_string())]);
    }

    #[test]
    fn sum_over_text_is_type_mismatch() {
        let out = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"country","as":"n"}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::TypeMismatch);
    }

    #[test]
    fn reports_every_violation() {
        let out = check(
            r#"{"source":"sessions","filters":[{"col":"ghost","op":"eq","args":[1]}],"aggregates":[{"fn":"sum","col":"country","as":"1bad"}],"sort":[{"by":"nope"}],"limit":-1,"output":{"format":"chart"}}"#,
        );
        let got: Vec<ViolationCode> = codes(&out).into_iter().map(|c| c.0).collect();
        for want in [
            ViolationCode::BadLimit,
            ViolationCode::UnknownColumn,
            ViolationCode::TypeMismatch,
            ViolationCode::BadAlias,
            ViolationCode::BadSortKey,
            ViolationCode::BadChartShape,
        ] {
            assert!(got.contains(&want), "{want:?} missing from {got:?}");
        }
    }

    #[test]
    fn joins_check_key_kinds_and_datasets() {
        let ok = check(r#"{"source":"sessions","joins":[{"right":"campaigns","on":[["campaign_id","campaign_id"]]}],"group_by":["campaign_name"],"aggregates":[{"fn":"sum","col":"spend","as":"cost"}]}"#);
        assert_eq!(ok.verdict, Verdict::Pass);
        assert_eq!(
            ok.plan.unwrap().joins[0].on[0],
            ("sessions.campaign_id".to_string(), "campaigns.campaign_id".to_string())
        );
        let bad = check(r#"{"source":"sessions","joins":[{"right":"campaigns","on":[["users","campaign_id"]]}],"aggregates":[{"fn":"count","col":"*","as":"n"}]}"#);
        assert_eq!(codes(&bad)[0].0, ViolationCode::BadJoinKeys);
        let missing = check(r#"{"source":"nowhere","joins":[{"right":"also_nowhere","on":[["a","b"]]}]}"#);
        assert_eq!(codes(&missing).len(), 2);
        assert!(codes(&missing).iter().all(|c| c.0 == ViolationCode::UnknownDataset));
    }

    #[test]
    fn derive_references_aliases_and_expands_metrics() {
        let out = check(r#"{"source":"sessions","joins":[{"right":"campaigns","on":[["campaign_id","campaign_id"]]}],"aggregates":[{"fn":"sum","col":"revenue","as":"revenue"},{"fn":"sum","col":"cost","as":"cost"}],"derive":[{"as":"r","expr":"roas"}],"output":{"format":"table"}}"#);
        assert_eq!(out.verdict, Verdict::Pass);
        assert_eq!(out.plan.unwrap().derive[0].expr.to_string(), "revenue / cost");
        let out = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"users","as":"u"}],"derive":[{"as":"r","expr":"u / users"}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::BadAlias);
        let out = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"users","as":"u"}],"derive":[{"as":"r","expr":"u / zzz"}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::UnknownColumn);
    }

    #[test]
    fn ambiguous_term_abstains() {
        let out = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"revenue","as":"revenue"}],"derive":[{"as":"x","expr":"rate"}]}"#);
        match out.verdict {
            Verdict::Abstain { reason } => assert_eq!(reason.code, ReasonCode::AmbiguousTerm),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn filter_arguments_are_typed() {
        let out = check(r#"{"source":"sessions","filters":[{"col":"date","op":"between","args":["2017-01-01","2017-01-31"]}],"aggregates":[{"fn":"count","col":"*","as":"n"}],"output":{"format":"scalar"}}"#);
        assert_eq!(out.verdict, Verdict::Pass);
        assert!(matches!(out.plan.unwrap().filters[0].args[0], Value::Date(_)));
        let out = check(r#"{"source":"sessions","filters":[{"col":"date","op":"between","args":["2017-01-01"]}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::TypeMismatch);
        let out = check(r#"{"source":"sessions","filters":[{"col":"users","op":"contains","args":["3"]}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::TypeMismatch);
        let out = check(r#"{"source":"sessions","filters":[{"col":"date","op":"gt","args":["yesterday"]}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::TypeMismatch);
    }

    #[test]
    fn metric_used_as_column_is_rejected() {
        let out = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"roas","as":"x"}]}"#);
        assert_eq!(codes(&out)[0].0, ViolationCode::UnknownColumn);
    }

    #[test]
    fn chart_shape() {
        let ok = check(r#"{"source":"sessions","group_by":["device"],"aggregates":[{"fn":"sum","col":"users","as":"users"}],"output":{"format":"chart","chart_kind":"pie"}}"#);
        assert_eq!(ok.verdict, Verdict::Pass);
        let bad = check(r#"{"source":"sessions","aggregates":[{"fn":"sum","col":"users","as":"users"}],"output":{"format":"chart","chart_kind":"bar"}}"#);
        assert_eq!(codes(&bad)[0].0, ViolationCode::BadChartShape);
    }
}
