use std::path::PathBuf;

use groundline_core::eval::run_case;
use groundline_core::fixtures;
use groundline_core::llm::FaultProfile;
use groundline_core::pipeline::{GuardPipeline, NarrationMode, PipelineConfig};

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).expect("write golden");
        return;
    }
    let expected = std::fs::read_to_string(&path).expect("golden file present; rerun with UPDATE_GOLDEN=1");
    assert_eq!(actual, expected, "{name} drifted; rerun with UPDATE_GOLDEN=1 if the wire change is intended");
}

fn envelope_json(case_id: &str, config: PipelineConfig) -> String {
    let suite = fixtures::mixed_suite();
    let case = suite.cases.iter().find(|c| c.id == case_id).expect("bundled case");
    let pipeline = GuardPipeline::new(fixtures::scripted_provider(FaultProfile::none(0)), config);
    let (envelope, _) = run_case(&pipeline, case, &fixtures::env());
    serde_json::to_string_pretty(&envelope).unwrap() + "\n"
}

#[test]
fn property_answer_wire_format() {
    let llm = PipelineConfig { narration: NarrationMode::Llm, ..PipelineConfig::guarded() };
    golden("property_envelope.json", &envelope_json("reason-000", llm));
}

#[test]
fn abstention_wire_format() {
    golden("coverage_abstention.json", &envelope_json("cover-001", PipelineConfig::guarded()));
}
