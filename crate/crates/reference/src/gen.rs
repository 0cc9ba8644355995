//! Random small tables and plans that validate against them.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};

use groundline_core::store::{Column, ColumnRole, Dataset, Schema, Value, ValueKind};

const LABELS: [&str; 4] = ["red", "green", "blue", "Blue"];
const REGIONS: [&str; 3] = ["north", "south", "east"];

fn maybe<R: Rng>(v: Value, rng: &mut R) -> Value {
    if rng.gen_bool(0.12) {
        Value::Null
    } else {
        v
    }
}

fn col(name: &str, kind: ValueKind) -> Column {
    Column { name: name.into(), kind, role: ColumnRole::for_kind(kind) }
}

/// `facts(id, label, region, qty, price, day)` with at most 20 rows.
pub fn facts<R: Rng>(rng: &mut R) -> Dataset {
    let n = rng.gen_range(0..=20);
    let base = NaiveDate::from_ymd_opt(2017, 1, 1).expect("literal date");
    let rows = (0..n)
        .map(|i| {
            vec![
                Value::Int(i as i64 + 1),
                maybe(Value::Text(LABELS.choose(rng).expect("non-empty").to_string()), rng),
                maybe(Value::Text(REGIONS.choose(rng).expect("non-empty").to_string()), rng),
                maybe(Value::Int(rng.gen_range(-5..40)), rng),
                maybe(Value::Float((rng.gen_range(-500..5000) as f64) / 100.0 + rng.gen::<f64>() * 1e-3), rng),
                maybe(Value::Date(base + chrono::Duration::days(rng.gen_range(0..60))), rng),
            ]
        })
        .collect();
    Dataset::from_rows(
        "facts",
        Schema {
            columns: vec![
                col("id", ValueKind::Integer),
                col("label", ValueKind::Text),
                col("region", ValueKind::Text),
                col("qty", ValueKind::Integer),
                col("price", ValueKind::Float),
                col("day", ValueKind::Date),
            ],
        },
        rows,
        "generated",
        0,
    )
    .expect("generated rows fit the schema")
}

/// `regions(region, manager, budget)`; region keys may repeat or be missing.
pub fn regions<R: Rng>(rng: &mut R) -> Dataset {
    let n = rng.gen_range(0..=6);
    let rows = (0..n)
        .map(|i| {
            vec![
                maybe(Value::Text(REGIONS.choose(rng).expect("non-empty").to_string()), rng),
                Value::Text(format!("m{i}")),
                maybe(Value::Int(rng.gen_range(0..100)), rng),
            ]
        })
        .collect();
    Dataset::from_rows(
        "regions",
        Schema {
            columns: vec![col("region", ValueKind::Text), col("manager", ValueKind::Text), col("budget", ValueKind::Integer)],
        },
        rows,
        "generated",
        0,
    )
    .expect("generated rows fit the schema")
}

fn filter<R: Rng>(rng: &mut R, joined: bool) -> Json {
    match rng.gen_range(0..if joined { 8 } else { 7 }) {
        0 => json!({"col": "label", "op": "eq", "args": [LABELS.choose(rng).expect("non-empty")]}),
        1 => {
            let op = *["lt", "le", "gt", "ge", "ne"].choose(rng).expect("non-empty");
            json!({"col": "qty", "op": op, "args": [rng.gen_range(-5..40)]})
        }
        2 => {
            let a: f64 = rng.gen_range(-5.0..25.0);
            json!({"col": "price", "op": "between", "args": [a, a + rng.gen_range(0.0..30.0)]})
        }
        3 => {
            let picked: Vec<&str> = REGIONS.choose_multiple(rng, 2).copied().collect();
            json!({"col": "region", "op": "in", "args": picked})
        }
        4 => json!({"col": "label", "op": "contains", "args": ["bl"]}),
        5 => {
            let d = rng.gen_range(0..60);
            let day = NaiveDate::from_ymd_opt(2017, 1, 1).expect("literal") + chrono::Duration::days(d);
            json!({"col": "day", "op": "ge", "args": [day.to_string()]})
        }
        6 => json!({"col": "price", "op": "gt", "args": [rng.gen_range(-5..30)]}),
        _ => json!({"col": "budget", "op": "ge", "args": [rng.gen_range(0..100)]}),
    }
}

/// A plan over `facts` (optionally joined to `regions`) that should pass validation.
pub fn plan<R: Rng>(rng: &mut R) -> Json {
    let joined = rng.gen_bool(0.3);
    let mut doc = serde_json::Map::new();
    doc.insert("source".into(), json!("facts"));
    if joined {
        let kind = if rng.gen_bool(0.5) { "inner" } else { "left" };
        doc.insert(
            "joins".into(),
            json!([{"right": "regions", "on": [["facts.region", "regions.region"]], "kind": kind}]),
        );
    }
    let nf = rng.gen_range(0..=2);
    let filters: Vec<Json> = (0..nf).map(|_| filter(rng, joined)).collect();
    if !filters.is_empty() {
        doc.insert("filters".into(), Json::Array(filters));
    }

    let raw = rng.gen_bool(0.15);
    let mut outputs: Vec<String> = Vec::new();
    let mut numeric: Vec<String> = Vec::new();
    if raw {
        outputs.extend(["id", "label", "qty", "price"].map(String::from));
    } else {
        let mut dims: Vec<&str> = vec!["label", "region", "day"];
        if joined {
            dims.push("manager");
        }
        dims.shuffle(rng);
        let ng = rng.gen_range(0..=2);
        let group: Vec<&str> = dims[..ng].to_vec();
        if !group.is_empty() {
            doc.insert("group_by".into(), json!(group));
            outputs.extend(group.iter().map(|g| g.to_string()));
        }
        let mut measures = vec!["qty", "price", "id"];
        if joined {
            measures.push("budget");
        }
        let na = rng.gen_range(1..=3);
        let mut aggs = Vec::new();
        for i in 0..na {
            let func = *["sum", "avg", "count", "min", "max"].choose(rng).expect("non-empty");
            let col = if func == "count" && rng.gen_bool(0.4) { "*" } else { measures.choose(rng).expect("non-empty") };
            let alias = format!("a{i}");
            aggs.push(json!({"fn": func, "col": col, "as": alias}));
            outputs.push(alias.clone());
            numeric.push(alias);
        }
        doc.insert("aggregates".into(), Json::Array(aggs));
        if rng.gen_bool(0.5) {
            let a = numeric.choose(rng).expect("non-empty").clone();
            let b = numeric.choose(rng).expect("non-empty").clone();
            let op = ["+", "-", "*", "/"].choose(rng).expect("non-empty");
            let expr = if rng.gen_bool(0.3) { format!("({a} {op} {b}) * 2") } else { format!("{a} {op} {b}") };
            doc.insert("derive".into(), json!([{"as": "d0", "expr": expr}]));
            outputs.push("d0".into());
        }
    }
    if rng.gen_bool(0.6) && !outputs.is_empty() {
        let ns = rng.gen_range(1..=2.min(outputs.len()));
        let keys: Vec<Json> = outputs
            .choose_multiple(rng, ns)
            .map(|k| json!({"by": k, "dir": if rng.gen_bool(0.5) { "asc" } else { "desc" }}))
            .collect();
        doc.insert("sort".into(), Json::Array(keys));
    }
    if rng.gen_bool(0.4) {
        doc.insert("limit".into(), json!(rng.gen_range(0..8)));
    }
    doc.insert("output".into(), json!({"format": "table"}));
    Json::Object(doc)
}
