use groundline_core::plan::{parse_plan, validate_plan, QueryPlan};
use groundline_core::semantic::SemanticModel;
use groundline_core::store::{Column, ColumnRole, Dataset, Schema, StoreSnapshot, Value, ValueKind};
use groundline_reference::oracle;

fn col(name: &str, kind: ValueKind) -> Column {
    Column { name: name.into(), kind, role: ColumnRole::for_kind(kind) }
}

fn text(s: &str) -> Value {
    Value::Text(s.into())
}

fn store() -> StoreSnapshot {
    let t = Dataset::from_rows(
        "t",
        Schema { columns: vec![col("g", ValueKind::Text), col("x", ValueKind::Integer)] },
        vec![
            vec![text("a"), Value::Int(1)],
            vec![text("a"), Value::Int(3)],
            vec![text("b"), Value::Null],
            vec![text("b"), Value::Int(5)],
            vec![Value::Null, Value::Int(2)],
        ],
        "test",
        0,
    )
    .unwrap();
    let u = Dataset::from_rows(
        "u",
        Schema { columns: vec![col("g", ValueKind::Text), col("label", ValueKind::Text)] },
        vec![vec![text("a"), text("first")], vec![text("a"), text("again")]],
        "test",
        0,
    )
    .unwrap();
    StoreSnapshot::from_datasets([t, u])
}

fn canon(doc: &str, store: &StoreSnapshot) -> QueryPlan {
    let out = validate_plan(&parse_plan(doc).unwrap(), store, &SemanticModel::empty());
    out.plan.unwrap_or_else(|| panic!("plan rejected: {:?}", out.verdict))
}

fn f(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

#[test]
fn grouped_aggregates_skip_nulls() {
    let s = store();
    let plan = canon(
        r#"{"source":"t","group_by":["g"],
            "aggregates":[{"fn":"sum","col":"x","as":"s"},{"fn":"avg","col":"x","as":"m"},
                          {"fn":"count","col":"*","as":"n"},{"fn":"count","col":"x","as":"nx"}],
            "sort":[{"by":"s","dir":"desc"}],"output":{"format":"table"}}"#,
        &s,
    );
    let r = oracle::execute(&plan, &s);
    let rows: Vec<(Value, Vec<Option<f64>>)> =
        r.rows.iter().map(|row| (row[0].clone(), row[1..].iter().map(f).collect())).collect();
    // b: 5 (one null skipped), a: 1+3, null group: 2
    assert_eq!(
        rows,
        vec![
            (text("b"), vec![Some(5.0), Some(5.0), Some(2.0), Some(1.0)]),
            (text("a"), vec![Some(4.0), Some(2.0), Some(2.0), Some(2.0)]),
            (Value::Null, vec![Some(2.0), Some(2.0), Some(1.0), Some(1.0)]),
        ]
    );
}

#[test]
fn left_join_keeps_unmatched_and_duplicates_matches() {
    let s = store();
    let plan = canon(
        r#"{"source":"t","joins":[{"right":"u","on":[["t.g","u.g"]],"kind":"left"}],
            "aggregates":[{"fn":"count","col":"*","as":"n"},{"fn":"count","col":"label","as":"labelled"}],
            "output":{"format":"table"}}"#,
        &s,
    );
    let r = oracle::execute(&plan, &s);
    // two "a" rows each match twice; the other three rows survive unmatched
    assert_eq!(r.rows[0].iter().map(f).collect::<Vec<_>>(), vec![Some(7.0), Some(4.0)]);
}

#[test]
fn inner_join_drops_null_keys() {
    let s = store();
    let plan = canon(
        r#"{"source":"t","joins":[{"right":"u","on":[["t.g","u.g"]],"kind":"inner"}],
            "aggregates":[{"fn":"count","col":"*","as":"n"}],"output":{"format":"table"}}"#,
        &s,
    );
    assert_eq!(f(&oracle::execute(&plan, &s).rows[0][0]), Some(4.0));
}

#[test]
fn filters_then_limit() {
    let s = store();
    let plan = canon(
        r#"{"source":"t","filters":[{"col":"x","op":"ge","args":[2]}],
            "sort":[{"by":"x","dir":"asc"}],"limit":2,"output":{"format":"table"}}"#,
        &s,
    );
    let xs: Vec<Option<f64>> = oracle::execute(&plan, &s).rows.iter().map(|r| f(&r[1])).collect();
    assert_eq!(xs, vec![Some(2.0), Some(3.0)]);
}
