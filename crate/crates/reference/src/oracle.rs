//! Brute-force plan execution: full materialization, nested-loop joins,
//! linear group search. Slow on purpose and shares no code with the engine's
//! executor beyond the plan and value types.

use std::cmp::Ordering;

use groundline_core::exec::ResultTable;
use groundline_core::plan::{AggFn, BinOp, Expr, FilterOp, JoinKind, Number, QueryPlan, SortDir};
use groundline_core::store::{Column, ColumnRole, DatasetLookup, Value, ValueKind};

struct Col {
    dataset: String,
    name: String,
    kind: ValueKind,
    role: ColumnRole,
}

fn find(cols: &[Col], reference: &str) -> usize {
    let r = reference.to_lowercase();
    for (i, c) in cols.iter().enumerate() {
        if format!("{}.{}", c.dataset, c.name).to_lowercase() == r {
            return i;
        }
    }
    for (i, c) in cols.iter().enumerate() {
        if c.name.to_lowercase() == r {
            return i;
        }
    }
    panic!("oracle: unresolved column {reference}")
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn day_seconds(v: &Value) -> Option<i64> {
    match v {
        Value::Date(d) => Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp()),
        Value::Timestamp(t) => Some(*t),
        _ => None,
    }
}

/// Total order used by filters, min/max, and sort. Values of unrelated kinds
/// never meet in a validated plan; they fall back to a fixed kind rank.
pub fn order(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Text(x), Value::Text(y)) => x.as_str().cmp(y.as_str()),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        _ => {
            if let (Some(x), Some(y)) = (num(a), num(b)) {
                return x.partial_cmp(&y).unwrap_or(Ordering::Equal);
            }
            if let (Some(x), Some(y)) = (day_seconds(a), day_seconds(b)) {
                return x.cmp(&y);
            }
            let rank = |v: &Value| match v {
                Value::Null => 0,
                Value::Bool(_) => 1,
                Value::Int(_) | Value::Float(_) => 2,
                Value::Text(_) => 3,
                Value::Date(_) | Value::Timestamp(_) => 4,
            };
            rank(a).cmp(&rank(b))
        }
    }
}

/// Key equality for joins and grouping: same variant and same value.
fn same_key(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x == y,
        _ => a == b,
    }
}

fn passes(cell: &Value, op: FilterOp, args: &[Value]) -> bool {
    if matches!(cell, Value::Null) {
        return false;
    }
    let o = |i: usize| order(cell, &args[i]);
    match op {
        FilterOp::Eq => o(0) == Ordering::Equal,
        FilterOp::Ne => o(0) != Ordering::Equal,
        FilterOp::Lt => o(0) == Ordering::Less,
        FilterOp::Le => o(0) != Ordering::Greater,
        FilterOp::Gt => o(0) == Ordering::Greater,
        FilterOp::Ge => o(0) != Ordering::Less,
        FilterOp::Between => o(0) != Ordering::Less && o(1) != Ordering::Greater,
        FilterOp::In => (0..args.len()).any(|i| o(i) == Ordering::Equal),
        FilterOp::Contains => match (cell, &args[0]) {
            (Value::Text(h), Value::Text(n)) => h.to_lowercase().contains(&n.to_lowercase()),
            _ => false,
        },
    }
}

fn aggregate(func: AggFn, kind: ValueKind, cells: &[Value]) -> Value {
    let present: Vec<&Value> = cells.iter().filter(|v| !matches!(v, Value::Null)).collect();
    match func {
        AggFn::Count => Value::Int(present.len() as i64),
        AggFn::Sum if present.is_empty() => Value::Null,
        AggFn::Sum if kind == ValueKind::Integer => {
            let mut total: i128 = 0;
            for v in &present {
                if let Value::Int(i) = v {
                    total += *i as i128;
                }
            }
            if total > i64::MAX as i128 || total < i64::MIN as i128 {
                Value::Null
            } else {
                Value::Int(total as i64)
            }
        }
        AggFn::Sum => {
            let mut total = 0.0;
            for v in &present {
                total += num(v).unwrap_or(0.0);
            }
            if total.is_finite() {
                Value::Float(total)
            } else {
                Value::Null
            }
        }
        AggFn::Avg => {
            if present.is_empty() {
                return Value::Null;
            }
            let mut total = 0.0;
            for v in &present {
                total += num(v).unwrap_or(0.0);
            }
            let mean = total / present.len() as f64;
            if mean.is_finite() {
                Value::Float(mean)
            } else {
                Value::Null
            }
        }
        AggFn::Min | AggFn::Max => {
            let mut best: Option<&Value> = None;
            for v in present {
                let better = match best {
                    None => true,
                    Some(b) if func == AggFn::Min => order(v, b) == Ordering::Less,
                    Some(b) => order(v, b) == Ordering::Greater,
                };
                if better {
                    best = Some(v);
                }
            }
            best.cloned().unwrap_or(Value::Null)
        }
    }
}

fn eval(expr: &Expr, names: &[String], row: &[Value]) -> Value {
    match expr {
        Expr::Number(Number::Int(i)) => Value::Int(*i),
        Expr::Number(Number::Float(f)) => Value::Float(*f),
        Expr::Ref(r) => {
            let i = names.iter().position(|n| n == r).unwrap_or_else(|| panic!("oracle: unbound {r}"));
            row[i].clone()
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = eval(lhs, names, row);
            let b = eval(rhs, names, row);
            if let (Value::Int(x), Value::Int(y), false) = (&a, &b, *op == BinOp::Div) {
                let r = match op {
                    BinOp::Add => x.checked_add(*y),
                    BinOp::Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                return r.map_or(Value::Null, Value::Int);
            }
            let (Some(x), Some(y)) = (num(&a), num(&b)) else { return Value::Null };
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Value::Null;
                    }
                    x / y
                }
            };
            if r.is_finite() {
                Value::Float(r)
            } else {
                Value::Null
            }
        }
    }
}

fn floaty(expr: &Expr, kinds: &dyn Fn(&str) -> ValueKind) -> bool {
    match expr {
        Expr::Number(Number::Float(_)) => true,
        Expr::Number(Number::Int(_)) => false,
        Expr::Ref(r) => kinds(r) == ValueKind::Float,
        Expr::Binary { op, lhs, rhs } => *op == BinOp::Div || floaty(lhs, kinds) || floaty(rhs, kinds),
    }
}

fn output_names(cols: &[Col], picked: &[usize]) -> Vec<String> {
    picked
        .iter()
        .map(|&i| {
            let n = picked.iter().filter(|&&j| cols[j].name.to_lowercase() == cols[i].name.to_lowercase()).count();
            if n > 1 {
                format!("{}.{}", cols[i].dataset, cols[i].name)
            } else {
                cols[i].name.clone()
            }
        })
        .collect()
}

/// Execute a canonical (validated) plan the slow way.
pub fn execute(plan: &QueryPlan, store: &dyn DatasetLookup) -> ResultTable {
    let src = store.dataset(&plan.source).expect("oracle: source registered");
    let mut cols: Vec<Col> = src
        .schema
        .columns
        .iter()
        .map(|c| Col { dataset: src.name.clone(), name: c.name.clone(), kind: c.kind, role: c.role })
        .collect();
    let mut rows: Vec<Vec<Value>> = src.rows.clone();

    for j in &plan.joins {
        let right = store.dataset(&j.right).expect("oracle: join target registered");
        let right_cols: Vec<Col> = right
            .schema
            .columns
            .iter()
            .map(|c| Col { dataset: right.name.clone(), name: c.name.clone(), kind: c.kind, role: c.role })
            .collect();
        let pairs: Vec<(usize, usize)> = j.on.iter().map(|(l, r)| (find(&cols, l), find(&right_cols, r))).collect();
        let mut out = Vec::new();
        for l in &rows {
            let mut matched = false;
            for r in &right.rows {
                let ok = pairs.iter().all(|&(a, b)| {
                    !matches!(l[a], Value::Null) && !matches!(r[b], Value::Null) && same_key(&l[a], &r[b])
                });
                if ok {
                    matched = true;
                    let mut joined = l.clone();
                    joined.extend(r.iter().cloned());
                    out.push(joined);
                }
            }
            if !matched && j.kind == JoinKind::Left {
                let mut joined = l.clone();
                joined.extend(std::iter::repeat_n(Value::Null, right_cols.len()));
                out.push(joined);
            }
        }
        rows = out;
        cols.extend(right_cols);
    }

    for f in &plan.filters {
        let i = find(&cols, &f.col);
        rows.retain(|r| passes(&r[i], f.op, &f.args));
    }

    let mut columns: Vec<Column> = Vec::new();
    let mut table: Vec<Vec<Value>>;
    if plan.aggregates.is_empty() && plan.group_by.is_empty() {
        let all: Vec<usize> = (0..cols.len()).collect();
        for (i, name) in output_names(&cols, &all).into_iter().enumerate() {
            columns.push(Column { name, kind: cols[i].kind, role: cols[i].role });
        }
        table = rows;
    } else {
        let keys: Vec<usize> = plan.group_by.iter().map(|g| find(&cols, g)).collect();
        for (k, name) in keys.iter().zip(output_names(&cols, &keys)) {
            columns.push(Column { name, kind: cols[*k].kind, role: cols[*k].role });
        }
        // Groups in first-seen order, each holding its member rows.
        let mut groups: Vec<(Vec<Value>, Vec<usize>)> = Vec::new();
        if keys.is_empty() {
            groups.push((Vec::new(), (0..rows.len()).collect()));
        } else {
            for (ri, r) in rows.iter().enumerate() {
                let key: Vec<Value> = keys.iter().map(|&k| r[k].clone()).collect();
                let pos = groups
                    .iter()
                    .position(|(g, _)| g.len() == key.len() && g.iter().zip(&key).all(|(a, b)| same_key(a, b)));
                match pos {
                    Some(p) => groups[p].1.push(ri),
                    None => groups.push((key, vec![ri])),
                }
            }
        }
        let mut agg_inputs = Vec::new();
        for a in &plan.aggregates {
            let (idx, kind) = if a.col == "*" {
                (None, ValueKind::Integer)
            } else {
                let i = find(&cols, &a.col);
                (Some(i), cols[i].kind)
            };
            let out_kind = match a.func {
                AggFn::Count => ValueKind::Integer,
                AggFn::Avg => ValueKind::Float,
                _ => kind,
            };
            columns.push(Column { name: a.alias.clone(), kind: out_kind, role: ColumnRole::Measure });
            agg_inputs.push((a.func, idx, kind));
        }
        table = Vec::new();
        for (key, members) in groups {
            let mut out = key;
            for &(func, idx, kind) in &agg_inputs {
                let cells: Vec<Value> = match idx {
                    None => vec![Value::Int(1); members.len()],
                    Some(i) => members.iter().map(|&m| rows[m][i].clone()).collect(),
                };
                out.push(aggregate(func, kind, &cells));
            }
            table.push(out);
        }
    }

    for d in &plan.derive {
        let names: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
        let kinds = |r: &str| columns.iter().find(|c| c.name == r).map_or(ValueKind::Integer, |c| c.kind);
        let float = floaty(&d.expr, &kinds);
        for row in table.iter_mut() {
            let v = eval(&d.expr, &names, row);
            row.push(match (float, v) {
                (true, Value::Int(i)) => Value::Float(i as f64),
                (_, v) => v,
            });
        }
        columns.push(Column {
            name: d.alias.clone(),
            kind: if float { ValueKind::Float } else { ValueKind::Integer },
            role: ColumnRole::Measure,
        });
    }

    // Insertion sort keeps equal rows in input order.
    if !plan.sort.is_empty() {
        let keys: Vec<(usize, SortDir)> = plan
            .sort
            .iter()
            .map(|s| (columns.iter().position(|c| c.name == s.by).expect("oracle: sort key"), s.dir))
            .collect();
        let before = |a: &[Value], b: &[Value]| -> bool {
            for &(i, dir) in &keys {
                let o = match (matches!(a[i], Value::Null), matches!(b[i], Value::Null)) {
                    (true, true) => Ordering::Equal,
                    (true, false) => Ordering::Greater,
                    (false, true) => Ordering::Less,
                    _ if dir == SortDir::Desc => order(&b[i], &a[i]),
                    _ => order(&a[i], &b[i]),
                };
                if o != Ordering::Equal {
                    return o == Ordering::Less;
                }
            }
            false
        };
        let mut sorted: Vec<Vec<Value>> = Vec::with_capacity(table.len());
        for row in table {
            let mut at = sorted.len();
            while at > 0 && before(&row, &sorted[at - 1]) {
                at -= 1;
            }
            sorted.insert(at, row);
        }
        table = sorted;
    }
    if let Some(n) = plan.limit {
        table.truncate(n.max(0) as usize);
    }
    ResultTable { columns, rows: table }
}
