//! The published JSON Schemas accept the bundled documents and the plans the engine emits.

use groundline_core::fixtures;
use groundline_core::plan::plan_json_schema;
use serde_json::Value;

fn validator(schema: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str(schema).unwrap()).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value, what: &str) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

#[test]
fn bundled_model_matches_schema() {
    let v = validator(include_str!("../schemas/semantic_model.schema.json"));
    let doc: Value = serde_json::from_str(include_str!("../fixtures/semantic_model.json")).unwrap();
    assert_valid(&v, &doc, "semantic_model.json");
    assert!(!v.is_valid(&serde_json::json!({"fields": {"x": {"dataset": "d"}}})));
    assert!(!v.is_valid(&serde_json::json!({"unexpected": 1})));
}

#[test]
fn bundled_rules_match_schema() {
    let v = validator(include_str!("../schemas/rules.schema.json"));
    let doc: Value = serde_json::from_str(include_str!("../fixtures/rules.json")).unwrap();
    assert_valid(&v, &doc, "rules.json");
    assert!(!v.is_valid(&serde_json::json!({"min_rows": -1})));
}

#[test]
fn scripted_plans_match_plan_schema() {
    let v = validator(plan_json_schema());
    let script: Value = serde_json::from_str(fixtures::SCRIPT_JSON).unwrap();
    let mut checked = 0;
    for entry in script["entries"].as_array().unwrap() {
        if let Some(plan) = entry.get("plan") {
            assert_valid(&v, plan, entry["query"].as_str().unwrap_or("?"));
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} scripted plans");
    assert!(!v.is_valid(&serde_json::json!({"source": "t", "limit": "ten"})));
}
