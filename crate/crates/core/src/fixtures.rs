//! The bundled demo corpus: three datasets, a semantic model, a rule set,
//! four evaluation suites, and the canned replies the scripted provider serves.
//!
//! Files under `fixtures/` are generated by the `build-fixtures` binary in the
//! reference crate; regenerate them rather than editing by hand.

use std::sync::{Arc, OnceLock};

use crate::eval::{load_suite, EvalEnv, Suite};
use crate::llm::{FaultProfile, LlmProvider, Script, ScriptedProvider};
use crate::rules::RuleSet;
use crate::semantic::{load_model, SemanticModel};
use crate::store::{ingest_csv, Dataset, IngestOptions, StoreSnapshot};

/// 2017-08-02T00:00:00Z, recorded as every bundled dataset's ingestion time.
pub const INGESTED_AT: i64 = 1_501_632_000;

pub const GA_SESSIONS_CSV: &str = include_str!("../fixtures/data/ga_sessions.csv");
pub const CAMPAIGNS_CSV: &str = include_str!("../fixtures/data/campaigns.csv");
pub const PROPERTIES_CSV: &str = include_str!("../fixtures/data/properties.csv");
pub const SEMANTIC_MODEL_JSON: &str = include_str!("../fixtures/semantic_model.json");
pub const RULES_JSON: &str = include_str!("../fixtures/rules.json");
pub const SCRIPT_JSON: &str = include_str!("../fixtures/script.json");

pub const SUITES: [(&str, &str); 4] = [
    ("categories", include_str!("../fixtures/suites/categories.json")),
    ("vocabulary", include_str!("../fixtures/suites/vocabulary.json")),
    ("boundaries", include_str!("../fixtures/suites/boundaries.json")),
    ("adversarial", include_str!("../fixtures/suites/adversarial.json")),
];

pub const DATASETS: [(&str, &str); 3] =
    [("ga_sessions", GA_SESSIONS_CSV), ("campaigns", CAMPAIGNS_CSV), ("properties", PROPERTIES_CSV)];

pub fn datasets() -> Vec<Dataset> {
    let opts = IngestOptions { ingested_at: INGESTED_AT, ..IngestOptions::default() };
    DATASETS
        .iter()
        .map(|(name, csv)| ingest_csv(csv.as_bytes(), name, &opts).expect("bundled CSV ingests"))
        .collect()
}

pub fn store() -> StoreSnapshot {
    static STORE: OnceLock<StoreSnapshot> = OnceLock::new();
    STORE.get_or_init(|| StoreSnapshot::from_datasets(datasets())).clone()
}

pub fn model() -> SemanticModel {
    load_model(SEMANTIC_MODEL_JSON).expect("bundled model compiles")
}

pub fn rules() -> RuleSet {
    RuleSet::load(RULES_JSON).expect("bundled rules load")
}

pub fn script() -> Script {
    Script::load(SCRIPT_JSON).expect("bundled script loads")
}

pub fn env() -> EvalEnv {
    EvalEnv { store: store(), model: model(), rules: rules() }
}

pub fn suite(name: &str) -> Option<Suite> {
    SUITES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| load_suite(text).unwrap_or_else(|e| panic!("bundled suite {n}: {e}")))
}

/// Every bundled suite concatenated, in bundle order.
pub fn mixed_suite() -> Suite {
    let mut cases = Vec::new();
    for (name, _) in SUITES {
        cases.extend(suite(name).expect("listed suite").cases);
    }
    Suite { name: "mixed".into(), note: "All bundled suites together.".into(), cases }
}

/// Names the fabricated-field fault must not produce: schema columns,
/// dataset names, and the model's vocabulary.
pub fn reserved_names(store: &StoreSnapshot, model: &SemanticModel) -> Vec<String> {
    let mut out: Vec<String> = model.vocabulary().map(str::to_string).collect();
    for ds in store.iter() {
        out.push(ds.name.clone());
        out.extend(ds.schema.columns.iter().map(|c| c.name.clone()));
    }
    out.sort();
    out.dedup();
    out
}

/// The bundled script served with `faults`.
pub fn scripted_provider(faults: FaultProfile) -> Arc<dyn LlmProvider> {
    let script = script();
    Arc::new(ScriptedProvider::new(&script, faults, reserved_names(&store(), &model())))
}
