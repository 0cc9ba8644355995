//! Deterministic plan execution over in-memory datasets.

mod render;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::plan::{AggFn, BinOp, Expr, FilterOp, FilterSpec, Frame, JoinKind, Number, QueryPlan, SortDir};
use crate::store::{compare_values, Column, ColumnRole, Dataset, DatasetLookup, KeyValue, Value, ValueKind};

pub use render::{render_output, ChartSpec, ChartSeries, ChartX, RenderError, RenderedAnswer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("unbound reference {0:?}")]
    UnboundRef(String),
    #[error("execution fault: {0}")]
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Serialize, Deserialize)]
struct WireColumn {
    name: String,
    kind: ValueKind,
}

#[derive(Serialize, Deserialize)]
struct WireTable {
    columns: Vec<WireColumn>,
    rows: Vec<Vec<Value>>,
}

impl Serialize for ResultTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let cols: Vec<WireColumn> = self
            .columns
            .iter()
            .map(|c| WireColumn { name: c.name.clone(), kind: c.kind })
            .collect();
        let mut st = s.serialize_struct("ResultTable", 2)?;
        st.serialize_field("columns", &cols)?;
        st.serialize_field("rows", &self.rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ResultTable {
    /// Cells are coerced to their column kind; roles follow from kinds.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireTable::deserialize(d)?;
        let columns: Vec<Column> = wire
            .columns
            .into_iter()
            .map(|c| Column { role: ColumnRole::for_kind(c.kind), name: c.name, kind: c.kind })
            .collect();
        let mut rows = Vec::with_capacity(wire.rows.len());
        for row in wire.rows {
            if row.len() != columns.len() {
                return Err(serde::de::Error::custom("row arity differs from column count"));
            }
            let row = row
                .into_iter()
                .zip(&columns)
                .map(|(v, c)| v.coerce_to(c.kind).unwrap_or(v))
                .collect();
            rows.push(row);
        }
        Ok(ResultTable { columns, rows })
    }
}

impl ResultTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn cells(&self) -> impl Iterator<Item = &Value> {
        self.rows.iter().flatten()
    }
}

static NULL: Value = Value::Null;

type Row<'a> = Vec<&'a Value>;

fn dataset<'a>(store: &'a dyn DatasetLookup, name: &str) -> Result<&'a Dataset, ExecError> {
    store
        .dataset(name)
        .ok_or_else(|| ExecError::Fault(format!("dataset {name:?} is not registered")))
}

fn frame_index(frame: &Frame, reference: &str) -> Result<usize, ExecError> {
    frame
        .resolve(reference)
        .ok_or_else(|| ExecError::Fault(format!("column {reference:?} is not in the frame")))
}

/// Joined and filtered rows, plus the frame describing their layout.
fn frame_rows<'a>(plan: &QueryPlan, store: &'a dyn DatasetLookup) -> Result<(Frame, Vec<Row<'a>>), ExecError> {
    let source = dataset(store, &plan.source)?;
    let mut frame = Frame::for_datasets(&[source]);
    let mut rows: Vec<Row<'a>> = source.rows.iter().map(|r| r.iter().collect()).collect();

    for join in &plan.joins {
        let right = dataset(store, &join.right)?;
        let right_frame = Frame::for_datasets(&[right]);
        let mut keys = Vec::with_capacity(join.on.len());
        for (l, r) in &join.on {
            keys.push((frame_index(&frame, l)?, frame_index(&right_frame, r)?));
        }
        let mut index: HashMap<Vec<KeyValue>, Vec<usize>> = HashMap::new();
        for (i, row) in right.rows.iter().enumerate() {
            if keys.iter().any(|&(_, r)| row[r].is_null()) {
                continue;
            }
            let key = keys.iter().map(|&(_, r)| KeyValue(row[r].clone())).collect();
            index.entry(key).or_default().push(i);
        }
        let width = right.schema.arity();
        let mut joined = Vec::new();
        for row in rows {
            let matches = if keys.iter().any(|&(l, _)| row[l].is_null()) {
                None
            } else {
                let key: Vec<KeyValue> = keys.iter().map(|&(l, _)| KeyValue(row[l].clone())).collect();
                index.get(&key)
            };
            match matches {
                Some(hits) => {
                    for &h in hits {
                        let mut out = row.clone();
                        out.extend(right.rows[h].iter());
                        joined.push(out);
                    }
                }
                None if join.kind == JoinKind::Left => {
                    let mut out = row;
                    out.extend(std::iter::repeat_n(&NULL, width));
                    joined.push(out);
                }
                None => {}
            }
        }
        rows = joined;
        for c in right_frame.columns {
            frame.columns.push(c);
        }
    }

    let mut filters = Vec::with_capacity(plan.filters.len());
    for f in &plan.filters {
        filters.push((frame_index(&frame, &f.col)?, f));
    }
    if !filters.is_empty() {
        rows.retain(|row| filters.iter().all(|(i, f)| filter_passes(row[*i], f)));
    }
    Ok((frame, rows))
}

/// Conjunctive filter semantics; a null cell fails every predicate.
pub fn filter_passes(cell: &Value, filter: &FilterSpec) -> bool {
    if cell.is_null() {
        return false;
    }
    let cmp = |arg: &Value| compare_values(cell, arg);
    let args = &filter.args;
    match filter.op {
        FilterOp::Eq => cmp(&args[0]) == Ordering::Equal,
        FilterOp::Ne => cmp(&args[0]) != Ordering::Equal,
        FilterOp::Lt => cmp(&args[0]) == Ordering::Less,
        FilterOp::Le => cmp(&args[0]) != Ordering::Greater,
        FilterOp::Gt => cmp(&args[0]) == Ordering::Greater,
        FilterOp::Ge => cmp(&args[0]) != Ordering::Less,
        FilterOp::Between => cmp(&args[0]) != Ordering::Less && cmp(&args[1]) != Ordering::Greater,
        FilterOp::In => args.iter().any(|a| cmp(a) == Ordering::Equal),
        FilterOp::Contains => match (cell.as_text(), args[0].as_text()) {
            (Some(hay), Some(needle)) => hay.to_lowercase().contains(&needle.to_lowercase()),
            _ => false,
        },
    }
}

/// Rows that survive joins and filters; what row-count preconditions see.
pub fn filtered_row_count(plan: &QueryPlan, store: &dyn DatasetLookup) -> Result<usize, ExecError> {
    frame_rows(plan, store).map(|(_, rows)| rows.len())
}

enum Acc {
    Count(i64),
    Sum { int: i128, float: f64, is_float: bool, seen: bool },
    Avg { sum: f64, n: u64 },
    Extreme { max: bool, best: Option<Value> },
}

impl Acc {
    fn new(func: AggFn, kind: ValueKind) -> Acc {
        match func {
            AggFn::Count => Acc::Count(0),
            AggFn::Sum => Acc::Sum { int: 0, float: 0.0, is_float: kind == ValueKind::Float, seen: false },
            AggFn::Avg => Acc::Avg { sum: 0.0, n: 0 },
            AggFn::Min => Acc::Extreme { max: false, best: None },
            AggFn::Max => Acc::Extreme { max: true, best: None },
        }
    }

    fn push(&mut self, v: Option<&Value>) {
        match self {
            Acc::Count(n) => {
                if v.is_none_or(|v| !v.is_null()) {
                    *n += 1;
                }
            }
            Acc::Sum { int, float, is_float, seen } => match v {
                Some(Value::Int(i)) if !*is_float => {
                    *int += *i as i128;
                    *seen = true;
                }
                Some(x) => {
                    if let Some(f) = x.as_f64() {
                        *float += f;
                        *seen = true;
                    }
                }
                None => {}
            },
            Acc::Avg { sum, n } => {
                if let Some(f) = v.and_then(Value::as_f64) {
                    *sum += f;
                    *n += 1;
                }
            }
            Acc::Extreme { max, best } => {
                let Some(v) = v.filter(|v| !v.is_null()) else { return };
                let replace = match best {
                    None => true,
                    Some(b) => {
                        let ord = compare_values(v, b);
                        if *max {
                            ord == Ordering::Greater
                        } else {
                            ord == Ordering::Less
                        }
                    }
                };
                if replace {
                    *best = Some(v.clone());
                }
            }
        }
    }

    fn finish(self) -> Value {
        match self {
            Acc::Count(n) => Value::Int(n),
            Acc::Sum { seen: false, .. } => Value::Null,
            Acc::Sum { is_float: true, float, .. } => finite(float),
            Acc::Sum { int, .. } => i64::try_from(int).map(Value::Int).unwrap_or(Value::Null),
            Acc::Avg { n: 0, .. } => Value::Null,
            Acc::Avg { sum, n } => finite(sum / n as f64),
            Acc::Extreme { best, .. } => best.unwrap_or(Value::Null),
        }
    }
}

fn finite(f: f64) -> Value {
    if f.is_finite() {
        Value::Float(f)
    } else {
        Value::Null
    }
}

/// Run a validated, canonical plan.
pub fn execute(plan: &QueryPlan, store: &dyn DatasetLookup) -> Result<ResultTable, ExecError> {
    let (frame, rows) = frame_rows(plan, store)?;

    let mut columns: Vec<Column> = Vec::new();
    let mut out_rows: Vec<Vec<Value>>;

    if plan.is_row_listing() {
        let all: Vec<usize> = (0..frame.columns.len()).collect();
        for (c, name) in frame.columns.iter().zip(frame.output_names(&all)) {
            columns.push(Column { name, kind: c.kind, role: c.role });
        }
        out_rows = rows.into_iter().map(|r| r.into_iter().cloned().collect()).collect();
    } else {
        let mut group_idx = Vec::with_capacity(plan.group_by.len());
        for g in &plan.group_by {
            group_idx.push(frame_index(&frame, g)?);
        }
        for (&i, name) in group_idx.iter().zip(frame.output_names(&group_idx)) {
            let c = &frame.columns[i];
            columns.push(Column { name, kind: c.kind, role: c.role });
        }
        let mut agg_cols: Vec<Option<usize>> = Vec::with_capacity(plan.aggregates.len());
        for agg in &plan.aggregates {
            let (idx, kind) = if agg.col == "*" {
                (None, ValueKind::Integer)
            } else {
                let i = frame_index(&frame, &agg.col)?;
                (Some(i), frame.columns[i].kind)
            };
            let out_kind = match agg.func {
                AggFn::Count => ValueKind::Integer,
                AggFn::Avg => ValueKind::Float,
                _ => kind,
            };
            columns.push(Column { name: agg.alias.clone(), kind: out_kind, role: ColumnRole::Measure });
            agg_cols.push(idx);
        }
        let new_accs = || -> Vec<Acc> {
            plan.aggregates
                .iter()
                .zip(&agg_cols)
                .map(|(a, idx)| Acc::new(a.func, idx.map_or(ValueKind::Integer, |i| frame.columns[i].kind)))
                .collect()
        };

        let mut order: Vec<Vec<Value>> = Vec::new();
        let mut groups: HashMap<Vec<KeyValue>, (usize, Vec<Acc>)> = HashMap::new();
        if group_idx.is_empty() {
            order.push(Vec::new());
            groups.insert(Vec::new(), (0, new_accs()));
        }
        for row in &rows {
            let key: Vec<KeyValue> = group_idx.iter().map(|&i| KeyValue(row[i].clone())).collect();
            let next = order.len();
            let entry = groups.entry(key).or_insert_with(|| (next, new_accs()));
            if entry.0 == next {
                order.push(group_idx.iter().map(|&i| row[i].clone()).collect());
            }
            for (acc, idx) in entry.1.iter_mut().zip(&agg_cols) {
                acc.push(idx.map(|i| row[i]));
            }
        }
        let mut finished: Vec<Option<Vec<Value>>> = vec![None; order.len()];
        for (_, (slot, accs)) in groups {
            finished[slot] = Some(accs.into_iter().map(Acc::finish).collect());
        }
        out_rows = order
            .into_iter()
            .zip(finished)
            .map(|(mut key, aggs)| {
                key.extend(aggs.unwrap_or_default());
                key
            })
            .collect();
    }

    for d in &plan.derive {
        let mut leaves = Vec::new();
        collect_kinds(&d.expr, &columns, &mut leaves)?;
        let float = has_division_or_float(&d.expr) || leaves.contains(&ValueKind::Float);
        let kind = if float { ValueKind::Float } else { ValueKind::Integer };
        let names: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
        for row in out_rows.iter_mut() {
            let v = eval_with(&d.expr, &mut |name| {
                names.iter().position(|n| n == name).map(|i| row[i].clone())
            })?;
            row.push(match (kind, v) {
                (ValueKind::Float, Value::Int(i)) => Value::Float(i as f64),
                (_, v) => v,
            });
        }
        columns.push(Column { name: d.alias.clone(), kind, role: ColumnRole::Measure });
    }

    if !plan.sort.is_empty() {
        let mut keys = Vec::with_capacity(plan.sort.len());
        for s in &plan.sort {
            let i = columns
                .iter()
                .position(|c| c.name == s.by)
                .ok_or_else(|| ExecError::Fault(format!("sort key {:?} is not an output column", s.by)))?;
            keys.push((i, s.dir));
        }
        out_rows.sort_by(|a, b| {
            for &(i, dir) in &keys {
                let ord = match (a[i].is_null(), b[i].is_null()) {
                    (true, true) => Ordering::Equal,
                    (true, false) => Ordering::Greater,
                    (false, true) => Ordering::Less,
                    (false, false) => {
                        let o = compare_values(&a[i], &b[i]);
                        if dir == SortDir::Desc {
                            o.reverse()
                        } else {
                            o
                        }
                    }
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        });
    }
    if let Some(limit) = plan.limit {
        out_rows.truncate(usize::try_from(limit).unwrap_or(0));
    }
    Ok(ResultTable { columns, rows: out_rows })
}

fn collect_kinds(expr: &Expr, columns: &[Column], out: &mut Vec<ValueKind>) -> Result<(), ExecError> {
    for r in expr.refs() {
        let c = columns
            .iter()
            .find(|c| c.name == r)
            .ok_or_else(|| ExecError::UnboundRef(r.to_string()))?;
        out.push(c.kind);
    }
    Ok(())
}

fn has_division_or_float(expr: &Expr) -> bool {
    match expr {
        Expr::Number(Number::Float(_)) => true,
        Expr::Number(Number::Int(_)) | Expr::Ref(_) => false,
        Expr::Binary { op, lhs, rhs } => *op == BinOp::Div || has_division_or_float(lhs) || has_division_or_float(rhs),
    }
}

/// Evaluate `expr` with refs bound from `env`.
pub fn eval_expr(expr: &Expr, env: &HashMap<String, Value>) -> Result<Value, ExecError> {
    eval_with(expr, &mut |name| env.get(name).cloned())
}

pub fn eval_with(expr: &Expr, env: &mut dyn FnMut(&str) -> Option<Value>) -> Result<Value, ExecError> {
    match expr {
        Expr::Number(Number::Int(i)) => Ok(Value::Int(*i)),
        Expr::Number(Number::Float(f)) => Ok(Value::Float(*f)),
        Expr::Ref(name) => env(name).ok_or_else(|| ExecError::UnboundRef(name.clone())),
        Expr::Binary { op, lhs, rhs } => {
            let a = eval_with(lhs, env)?;
            let b = eval_with(rhs, env)?;
            Ok(arith(*op, &a, &b))
        }
    }
}

/// Integer arithmetic stays integer (overflow yields null) except division;
/// null operands, division by zero, and non-finite results yield null.
pub fn arith(op: BinOp, a: &Value, b: &Value) -> Value {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => match op {
            BinOp::Add => x.checked_add(*y).map(Value::Int).unwrap_or(Value::Null),
            BinOp::Sub => x.checked_sub(*y).map(Value::Int).unwrap_or(Value::Null),
            BinOp::Mul => x.checked_mul(*y).map(Value::Int).unwrap_or(Value::Null),
            BinOp::Div if *y == 0 => Value::Null,
            BinOp::Div => finite(*x as f64 / *y as f64),
        },
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => match op {
                BinOp::Add => finite(x + y),
                BinOp::Sub => finite(x - y),
                BinOp::Mul => finite(x * y),
                BinOp::Div if y == 0.0 => Value::Null,
                BinOp::Div => finite(x / y),
            },
            _ => Value::Null,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{parse_expr, parse_plan, validate_plan, Verdict};
    use crate::semantic::SemanticModel;
    use crate::store::{ingest_csv, IngestOptions, StoreSnapshot};

    fn store() -> StoreSnapshot {
        let t = ingest_csv(
            b"k,g,v,f\na,x,2,1.5\nb,y,3,\nc,x,5,2.5\nd,y,,\n",
            "t",
            &IngestOptions::default(),
        )
        .unwrap();
        StoreSnapshot::from_datasets([t])
    }

    fn run(text: &str) -> ResultTable {
        let s = store();
        let out = validate_plan(&parse_plan(text).unwrap(), &s, &SemanticModel::empty());
        assert_eq!(out.verdict, Verdict::Pass, "{text}");
        execute(&out.plan.unwrap(), &s).unwrap()
    }

    #[test]
    fn sum_without_grouping() {
        let r = run(r#"{"source":"t","aggregates":[{"fn":"sum","col":"v","as":"s"}],"output":{"format":"scalar"}}"#);
        assert_eq!(r.rows, vec![vec![Value::Int(10)]]);
    }

    #[test]
    fn avg_of_all_null_group_is_null() {
        let r = run(r#"{"source":"t","group_by":["g"],"aggregates":[{"fn":"avg","col":"f","as":"a"},{"fn":"count","col":"f","as":"n"},{"fn":"count","col":"*","as":"rows"}]}"#);
        assert_eq!(r.rows[0], vec![Value::Text("x".into()), Value::Float(2.0), Value::Int(2), Value::Int(2)]);
        assert_eq!(r.rows[1], vec![Value::Text("y".into()), Value::Null, Value::Int(0), Value::Int(2)]);
    }

    #[test]
    fn empty_input_still_yields_one_aggregate_row() {
        let r = run(r#"{"source":"t","filters":[{"col":"k","op":"eq","args":["zzz"]}],"aggregates":[{"fn":"count","col":"*","as":"n"},{"fn":"sum","col":"v","as":"s"}]}"#);
        assert_eq!(r.rows, vec![vec![Value::Int(0), Value::Null]]);
    }

    #[test]
    fn sort_puts_nulls_last_both_ways() {
        for dir in ["asc", "desc"] {
            let r = run(&format!(r#"{{"source":"t","sort":[{{"by":"v","dir":"{dir}"}}],"limit":10}}"#));
            assert!(r.rows.last().unwrap()[2].is_null());
        }
    }

    #[test]
    fn eval_rules() {
        let env: HashMap<String, Value> =
            [("revenue".to_string(), Value::Float(200.0)), ("cost".to_string(), Value::Float(50.0))].into();
        assert_eq!(eval_expr(&parse_expr("revenue/cost").unwrap(), &env).unwrap(), Value::Float(4.0));
        let env: HashMap<String, Value> = [("a".to_string(), Value::Int(1)), ("b".to_string(), Value::Int(0))].into();
        assert_eq!(eval_expr(&parse_expr("a/b").unwrap(), &env).unwrap(), Value::Null);
        assert_eq!(eval_expr(&parse_expr("1+2*3").unwrap(), &env).unwrap(), Value::Int(7));
        assert!(matches!(eval_expr(&parse_expr("zz").unwrap(), &env), Err(ExecError::UnboundRef(_))));
        assert_eq!(arith(BinOp::Mul, &Value::Int(i64::MAX), &Value::Int(2)), Value::Null);
    }

    #[test]
    fn result_table_json_shape() {
        let r = run(r#"{"source":"t","group_by":["g"],"aggregates":[{"fn":"sum","col":"v","as":"s"}]}"#);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"columns":[{"name":"g","kind":"text"},{"name":"s","kind":"integer"}],"rows":[["x",7],["y",3]]}"#
        );
        let back: ResultTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
