use groundline_core::exec::{execute, filtered_row_count, render_output, RenderedAnswer};
use groundline_core::pipeline::ground_answer;
use groundline_core::plan::{parse_plan, validate_plan, FilterOp, FilterSpec, QueryPlan};
use groundline_core::rules::{screen_query, RuleSet};
use groundline_core::semantic::SemanticModel;
use groundline_core::store::{StoreSnapshot, Value};
use groundline_reference::gen;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A generated store and a plan that survived validation, if any.
fn case(seed: u64) -> (StoreSnapshot, Option<QueryPlan>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = StoreSnapshot::from_datasets([gen::facts(&mut rng), gen::regions(&mut rng)]);
    let plan = parse_plan(&gen::plan(&mut rng).to_string()).expect("generated plans parse");
    let canon = validate_plan(&plan, &store, &SemanticModel::empty()).plan;
    (store, canon)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn canonical_plans_round_trip(seed in any::<u64>()) {
        let (store, canon) = case(seed);
        if let Some(canon) = canon {
            let reparsed = parse_plan(&canon.to_json()).expect("canonical json parses");
            // JSON drops value types (dates come back as text), so compare wire forms
            // and let validation coerce the rest.
            prop_assert_eq!(reparsed.to_json(), canon.to_json());
            let again = validate_plan(&reparsed, &store, &SemanticModel::empty()).plan;
            prop_assert_eq!(again.as_ref(), Some(&canon));
        }
    }

    #[test]
    fn extra_filter_never_adds_rows(seed in any::<u64>(), qty in -10i64..50) {
        let (store, canon) = case(seed);
        if let Some(canon) = canon {
            let before = filtered_row_count(&canon, &store).expect("counts");
            let mut narrower = canon.clone();
            narrower.filters.push(FilterSpec { col: "qty".into(), op: FilterOp::Ge, args: vec![Value::Int(qty)] });
            let after = filtered_row_count(&narrower, &store).expect("counts");
            prop_assert!(after <= before, "{after} > {before}");
        }
    }

    #[test]
    fn prose_quoting_the_result_is_grounded(seed in any::<u64>()) {
        let (store, canon) = case(seed);
        if let Some(canon) = canon {
            let result = execute(&canon, &store).expect("validated plans execute");
            let Ok(RenderedAnswer::Table { display, .. }) = render_output(&result, &canon.output) else {
                return Ok(());
            };
            let answer = display.iter().map(|row| row.join(" / ")).collect::<Vec<_>>().join("; ");
            let report = ground_answer(&answer, Some(&result), &store, &SemanticModel::empty());
            prop_assert!(report.grounded, "{answer:?}: {:?}", report.unmatched().collect::<Vec<_>>());

            let invented = format!("{answer}. The total was 987654.25.");
            prop_assert!(!ground_answer(&invented, Some(&result), &store, &SemanticModel::empty()).grounded);
        }
    }

    #[test]
    fn more_patterns_never_unblock(query in "[a-z ]{0,40}", base in prop::collection::vec("[a-z]{1,6}", 0..4), extra in "[a-z]{1,6}") {
        let rules = RuleSet { intrusion_patterns: base.clone(), ..RuleSet::default() };
        let mut more = rules.clone();
        more.intrusion_patterns.push(extra);
        if !screen_query(&query, &rules).is_pass() {
            prop_assert!(!screen_query(&query, &more).is_pass());
        }
    }

    #[test]
    fn empty_rule_set_passes_everything(query in ".{0,80}") {
        prop_assert!(screen_query(&query, &RuleSet::default()).is_pass());
        prop_assert!(screen_query(&query, &RuleSet::permissive()).is_pass());
    }
}
