//! Acceptance run: one pass/fail line per criterion, non-zero exit on any failure.
//!
//! Gold values come from the reference crate (brute-force executor, day-walking
//! calendar) or from the bundled suites, which that crate generates.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use groundline_core::claims::{extract_numbers, number_matches};
use groundline_core::eval::{
    compute_metrics, run_case, run_suite, Category, CaseOutcome, Confusion, EvalReport, Metrics, Probe, Suite,
    Variant,
};
use groundline_core::exec::{execute, ResultTable};
use groundline_core::fixtures;
use groundline_core::llm::{FaultProfile, LlmProvider};
use groundline_core::pipeline::{GuardPipeline, NarrationMode, PipelineConfig};
use groundline_core::plan::{parse_plan, validate_plan, ReasonCode, Verdict, ViolationCode};
use groundline_core::prompt::resolve_relative_dates;
use groundline_core::semantic::SemanticModel;
use groundline_core::store::{StoreSnapshot, Value};
use groundline_reference::{dates, gen, oracle};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized reports, compared across repeated runs.
    artifact: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, artifact: String::new() }
}

fn rate(m: &Metrics) -> f64 {
    m.hallucination_rate.unwrap_or(0.0)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}%"))
}

fn cell_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()),
        _ => a == b,
    }
}

fn tables_eq(a: &ResultTable, b: &ResultTable) -> Result<(), String> {
    let names = |t: &ResultTable| t.columns.iter().map(|c| (c.name.clone(), c.kind)).collect::<Vec<_>>();
    if names(a) != names(b) {
        return Err(format!("columns {:?} vs {:?}", names(a), names(b)));
    }
    if a.rows.len() != b.rows.len() {
        return Err(format!("{} rows vs {}", a.rows.len(), b.rows.len()));
    }
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        if ra.len() != rb.len() || !ra.iter().zip(rb).all(|(x, y)| cell_eq(x, y)) {
            return Err(format!("row {i}: {ra:?} vs {rb:?}"));
        }
    }
    Ok(())
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let model = SemanticModel::empty();
    let (mut checked, mut skipped, mut attempts) = (0, 0, 0);
    let mut mismatches = Vec::new();
    while checked < 1000 && attempts < 5000 {
        attempts += 1;
        let store = StoreSnapshot::from_datasets([gen::facts(&mut rng), gen::regions(&mut rng)]);
        let doc = gen::plan(&mut rng);
        let plan = match parse_plan(&doc.to_string()) {
            Ok(p) => p,
            Err(e) => {
                mismatches.push(format!("generated plan does not parse: {e}"));
                continue;
            }
        };
        let out = validate_plan(&plan, &store, &model);
        let Some(canon) = out.plan else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let want = oracle::execute(&canon, &store);
        match execute(&canon, &store) {
            Ok(got) => {
                if let Err(e) = tables_eq(&got, &want) {
                    mismatches.push(format!("{}: {e}", canon.to_json()));
                }
            }
            Err(e) => mismatches.push(format!("{}: engine error {e}", canon.to_json())),
        }
    }
    let elapsed = started.elapsed();
    let pass = checked == 1000 && mismatches.is_empty() && elapsed < Duration::from_secs(60);
    let mut detail = format!(
        "{checked} plans compared ({skipped} rejected by validation), {} mismatches, {:.1}s",
        mismatches.len(),
        elapsed.as_secs_f64()
    );
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    outcome(pass, detail)
}

fn criterion_2() -> Outcome {
    let fixture = Confusion { total: 20, correct: 15, hallucinated: 3, tp: 8, fp: 2, fn_: 2 };
    let m = Metrics::from_confusion(fixture);
    let pass = m.precision == Some(80.0) && m.recall == Some(80.0) && m.hallucination_rate == Some(15.0);
    // The same equations through the outcome path.
    let mut outcomes = vec![CaseOutcome::CorrectAnswer; 8];
    outcomes.extend([CaseOutcome::IncorrectUngroundedFree; 2]);
    outcomes.extend([CaseOutcome::WrongAbstain; 2]);
    outcomes.extend([CaseOutcome::CorrectAbstain; 8]);
    let via_outcomes = compute_metrics(&outcomes);
    let consistent = via_outcomes.precision == Some(80.0) && via_outcomes.recall == Some(80.0);
    outcome(
        pass && consistent,
        format!(
            "precision {}, recall {}, hallucination_rate {}",
            fmt_opt(m.precision),
            fmt_opt(m.recall),
            fmt_opt(m.hallucination_rate)
        ),
    )
}

fn variants() -> [Variant; 2] {
    [Variant::new("baseline", PipelineConfig::baseline()), Variant::new("guarded", PipelineConfig::guarded())]
}

fn provider_for(profile: impl Fn(u64) -> FaultProfile + Sync) -> impl Fn(u64) -> Arc<dyn LlmProvider> + Sync {
    move |seed| fixtures::scripted_provider(profile(seed))
}

fn artifact(reports: &[EvalReport]) -> String {
    reports.iter().map(EvalReport::to_json_pretty).collect::<Vec<_>>().join("\n")
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let suite = fixtures::suite("categories").expect("bundled");
    let env = fixtures::env();
    let field_only = |seed| FaultProfile { fabricate_field: 0.3, ..FaultProfile::none(seed) };
    let reports = run_suite(&suite, &variants(), &[SEED], &env, &provider_for(field_only));
    let (base, guard) = (&reports[0], &reports[1]);
    let (b, g) = (rate(&base.overall), rate(&guard.overall));
    let mut worse = Vec::new();
    for c in Category::ALL {
        let (bc, gc) = (rate(&base.per_category[&c]), rate(&guard.per_category[&c]));
        if gc >= bc {
            worse.push(format!("{} {gc:.1}% vs {bc:.1}%", c.as_str()));
        }
    }
    let elapsed = started.elapsed();
    let pass = suite.cases.len() == 200
        && (24.0..=36.0).contains(&b)
        && g <= 3.0
        && worse.is_empty()
        && elapsed < Duration::from_secs(120);
    let mut detail = format!(
        "N={}, baseline {b:.2}%, guarded {g:.2}%, guarded below baseline in {}/8 categories, {:.1}s",
        suite.cases.len(),
        8 - worse.len(),
        elapsed.as_secs_f64()
    );
    if !worse.is_empty() {
        detail.push_str(&format!("; not below: {}", worse.join(", ")));
    }
    Outcome { pass, detail, artifact: artifact(&reports) }
}

fn flags(env: &groundline_core::pipeline::AnswerEnvelope, code: ViolationCode) -> bool {
    env.verdicts.iter().any(|v| match &v.verdict {
        Verdict::Reject { violations } => violations.iter().any(|x| x.code == code),
        _ => false,
    })
}

fn criterion_4() -> Outcome {
    let suite = fixtures::suite("adversarial").expect("bundled");
    let env = fixtures::env();
    let guarded = GuardPipeline::new(
        fixtures::scripted_provider(FaultProfile::none(SEED)),
        PipelineConfig { narration: NarrationMode::Llm, ..PipelineConfig::guarded() },
    );
    let baseline = GuardPipeline::new(fixtures::scripted_provider(FaultProfile::none(SEED)), PipelineConfig::baseline());

    #[derive(Default)]
    struct Tally {
        n: usize,
        guarded_ok: usize,
        passed_through: usize,
    }
    let mut tally: BTreeMap<Probe, Tally> = BTreeMap::new();
    let mut log = String::new();
    for case in &suite.cases {
        let probe = case.probe.expect("adversarial cases carry a probe");
        let (g, _) = run_case(&guarded, case, &env);
        let (b, _) = run_case(&baseline, case, &env);
        let t = tally.entry(probe).or_default();
        t.n += 1;
        let (ok, through) = match probe {
            Probe::BrokenLink => {
                let planted = |e: &groundline_core::pipeline::AnswerEnvelope| {
                    e.is_answered() && e.answer.as_deref().is_some_and(|a| a.contains("/promo/"))
                };
                (flags(&g, ViolationCode::BrokenLink) && !planted(&g), planted(&b))
            }
            _ => (!g.is_answered(), b.is_answered()),
        };
        t.guarded_ok += ok as usize;
        t.passed_through += through as usize;
        log.push_str(&serde_json::to_string(&g).expect("envelope serializes"));
        log.push_str(&serde_json::to_string(&b).expect("envelope serializes"));
        log.push('\n');
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (probe, t) in &tally {
        let must_block = matches!(probe, Probe::PromptIntrusion | Probe::ForbiddenOperation | Probe::BrokenLink);
        if t.n < 20 || (must_block && t.guarded_ok != t.n) || t.passed_through * 2 < t.n {
            pass = false;
        }
        parts.push(format!(
            "{probe:?}: guarded {}/{}, baseline passed through {}/{}",
            t.guarded_ok, t.n, t.passed_through, t.n
        ));
    }
    Outcome { pass: pass && tally.len() == 4, detail: parts.join("; "), artifact: log }
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let mut total = 0;
    for (phrase, kind) in dates::phrase_catalog() {
        for now in dates::anchor_dates() {
            total += 1;
            let want = dates::expected(kind, now);
            let text = format!("what was revenue {phrase} by channel");
            let got = resolve_relative_dates(&text, now);
            let ok = got.len() == 1 && (got[0].range.start, got[0].range.end) == want;
            if !ok {
                failures.push(format!("{phrase:?} @ {now}: want {want:?}, got {got:?}"));
            }
        }
    }
    let mut detail = format!("{total} phrase/anchor pairs, {} failures", failures.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    Outcome { pass: failures.is_empty() && total > 0, detail, artifact: failures.join("\n") }
}

fn criterion_6() -> Outcome {
    let suite = fixtures::suite("vocabulary").expect("bundled");
    let env = fixtures::env();
    let configs = [
        Variant::new("semantic_on", PipelineConfig::guarded()),
        Variant::new("semantic_off", PipelineConfig { semantic_layer: false, ..PipelineConfig::guarded() }),
    ];
    let reports = run_suite(&suite, &configs, &[SEED], &env, &provider_for(FaultProfile::none));
    let count = |r: &EvalReport, probe: Probe, pred: &dyn Fn(&groundline_core::eval::CaseRecord) -> bool| {
        let of: Vec<_> = r.cases.iter().filter(|c| c.probe == Some(probe)).collect();
        (of.iter().filter(|c| pred(c)).count(), of.len())
    };
    let (amb_ok, amb_n) = count(&reports[0], Probe::AmbiguousTerm, &|c| {
        c.outcome == CaseOutcome::CorrectAbstain && c.reason == Some(ReasonCode::AmbiguousTerm)
    });
    let (syn_ok, syn_n) = count(&reports[0], Probe::Synonym, &|c| c.outcome == CaseOutcome::CorrectAnswer);
    let (off_unknown, off_n) = count(&reports[1], Probe::Synonym, &|c| {
        c.outcome == CaseOutcome::WrongAbstain && c.violations.contains(&ViolationCode::UnknownColumn)
    });
    let (off_answered, _) = count(&reports[1], Probe::Synonym, &|c| c.outcome == CaseOutcome::CorrectAnswer);
    let pass = amb_n >= 20 && amb_ok == amb_n && syn_n >= 20 && syn_ok == syn_n && off_unknown == off_n;
    Outcome {
        pass,
        detail: format!(
            "semantic on: ambiguous abstained {amb_ok}/{amb_n}, synonyms correct {syn_ok}/{syn_n}; \
             semantic off: synonyms abstained on UNKNOWN_COLUMN {off_unknown}/{off_n}, answered {off_answered}/{off_n}"
        ),
        artifact: artifact(&reports),
    }
}

fn criterion_7() -> Outcome {
    let suite = fixtures::mixed_suite();
    let env = fixtures::env();
    let reports = run_suite(&suite, &variants(), &[SEED], &env, &provider_for(FaultProfile::standard));
    let (b, g) = (&reports[0].overall, &reports[1].overall);
    let higher = |x: Option<f64>, y: Option<f64>| matches!((x, y), (Some(x), Some(y)) if x > y);
    let pass = rate(g) * 5.0 < rate(b) && higher(g.precision, b.precision) && higher(g.recall, b.recall);
    Outcome {
        pass,
        detail: format!(
            "N={}: hallucination {} vs {}, precision {} vs {}, recall {} vs {} (guarded vs baseline)",
            suite.cases.len(),
            fmt_opt(g.hallucination_rate),
            fmt_opt(b.hallucination_rate),
            fmt_opt(g.precision),
            fmt_opt(b.precision),
            fmt_opt(g.recall),
            fmt_opt(b.recall)
        ),
        artifact: artifact(&reports),
    }
}

fn criterion_9() -> Outcome {
    let suite: Suite = fixtures::mixed_suite();
    let env = fixtures::env();
    let n_cases = suite.cases.len();
    let mut runner = TestRunner::new_with_rng(
        RunnerConfig { cases: 500, failure_persistence: None, ..RunnerConfig::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let answered = std::cell::Cell::new(0usize);
    let strategy = (
        0..n_cases,
        any::<u64>(),
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
        (any::<bool>(), any::<bool>(), any::<bool>(), 0u32..4),
    );
    let result = runner.run(&strategy, |(idx, seed, (ff, fv, sp, ma), (strict, enhance, semantic, retries))| {
        let faults =
            FaultProfile { fabricate_field: ff, fabricate_value: fv, speculative: sp, malformed: ma, seed };
        let config = PipelineConfig {
            max_retries: retries,
            structured_output: true,
            strict_rules: strict,
            prompt_enhancement: enhance,
            semantic_layer: semantic,
            narration: NarrationMode::Template,
        };
        let pipeline = GuardPipeline::new(fixtures::scripted_provider(faults), config);
        let (envelope, _) = run_case(&pipeline, &suite.cases[idx], &env);
        if envelope.is_answered() {
            answered.set(answered.get() + 1);
            let table = envelope.table();
            prop_assert!(table.is_some(), "answered without an executed result");
            let table = table.expect("checked");
            let text = envelope.answer.clone().unwrap_or_default();
            for token in extract_numbers(&text) {
                prop_assert!(
                    table.cells().any(|c| number_matches(&token, c)),
                    "case {} answered {:?} with {:?} absent from its result",
                    suite.cases[idx].id,
                    text,
                    token.text
                );
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, format!("500 runs, {} answered, every numeric claim found in its result", answered.get())),
        Err(e) => outcome(false, format!("{e}")),
    }
}

fn run(n: u32, f: fn() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        outcome(false, format!("criterion {n} panicked: {msg}"))
    })
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet`; only a name filter matters here.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f) && !f.contains("acceptance")) {
        return;
    }
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (9, criterion_9),
    ];
    let mut failed = 0;
    let mut artifacts = BTreeMap::new();
    for (n, f) in criteria {
        let o = run(n, f);
        println!("criterion {n}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
        artifacts.insert(n, o.artifact);
    }

    let started = Instant::now();
    let mut differing = Vec::new();
    for (n, f) in criteria.iter().filter(|(n, _)| (3..=7).contains(n)) {
        let again = run(*n, *f);
        if again.artifact != artifacts[n] {
            differing.push(n.to_string());
        }
    }
    let pass8 = differing.is_empty();
    println!(
        "criterion 8: {} - criteria 3-7 rerun with the same seeds, {} ({:.1}s)",
        if pass8 { "PASS" } else { "FAIL" },
        if pass8 { "reports byte-identical".to_string() } else { format!("reports differ for {}", differing.join(", ")) },
        started.elapsed().as_secs_f64()
    );
    failed += (!pass8) as usize;
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
