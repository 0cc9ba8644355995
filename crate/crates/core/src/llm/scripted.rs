//! Deterministic stand-in for a model: canned responses keyed by query
//! fingerprint, with seeded fault injection.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{query_fingerprint, LlmError, LlmExchange, LlmProvider};
use crate::prompt::{PromptBundle, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Fault {
    FabricateField,
    FabricateValue,
    Speculative,
    Malformed,
}

impl Fault {
    /// Application order.
    pub const ALL: [Fault; 4] = [Fault::FabricateField, Fault::FabricateValue, Fault::Speculative, Fault::Malformed];

    fn tag(self) -> &'static str {
        match self {
            Fault::FabricateField => "FABRICATE_FIELD",
            Fault::FabricateValue => "FABRICATE_VALUE",
            Fault::Speculative => "SPECULATIVE",
            Fault::Malformed => "MALFORMED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultProfile {
    #[serde(default)]
    pub fabricate_field: f64,
    #[serde(default)]
    pub fabricate_value: f64,
    #[serde(default)]
    pub speculative: f64,
    #[serde(default)]
    pub malformed: f64,
    #[serde(default)]
    pub seed: u64,
}

impl FaultProfile {
    pub fn none(seed: u64) -> FaultProfile {
        FaultProfile { seed, ..FaultProfile::default() }
    }

    /// The mixed profile used for whole-suite comparisons.
    pub fn standard(seed: u64) -> FaultProfile {
        FaultProfile { fabricate_field: 0.3, fabricate_value: 0.1, speculative: 0.5, malformed: 0.1, seed }
    }

    pub fn probability(&self, fault: Fault) -> f64 {
        match fault {
            Fault::FabricateField => self.fabricate_field,
            Fault::FabricateValue => self.fabricate_value,
            Fault::Speculative => self.speculative,
            Fault::Malformed => self.malformed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for f in Fault::ALL {
            let p = self.probability(f);
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{} probability {p} is outside [0, 1]", f.tag()));
            }
        }
        Ok(())
    }
}

/// A canned reply per purpose. Objects are sent as compact JSON, strings verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narration: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn load(text: &str) -> Result<Script, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn merge(mut self, other: Script) -> Script {
        self.entries.extend(other.entries);
        self
    }
}

fn channel_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub struct ScriptedProvider {
    responses: HashMap<String, [Option<String>; 3]>,
    faults: FaultProfile,
    /// Names the fabricated-field fault must avoid (every schema column and vocabulary term).
    reserved: BTreeSet<String>,
}

const SUFFIXES: [&str; 5] = ["adj", "est", "x", "v2", "total"];

impl ScriptedProvider {
    pub fn new(script: &Script, faults: FaultProfile, reserved: impl IntoIterator<Item = String>) -> ScriptedProvider {
        let mut responses: HashMap<String, [Option<String>; 3]> = HashMap::new();
        for e in &script.entries {
            let slot = responses.entry(query_fingerprint(&e.query)).or_default();
            for (i, ch) in [&e.plan, &e.answer, &e.narration].into_iter().enumerate() {
                if let Some(v) = ch {
                    slot[i] = Some(channel_text(v));
                }
            }
        }
        ScriptedProvider {
            responses,
            faults,
            reserved: reserved.into_iter().map(|n| n.to_lowercase()).collect(),
        }
    }

    pub fn faults(&self) -> FaultProfile {
        self.faults
    }

    fn stream(&self, fault: Fault, fingerprint: &str, purpose: Purpose, attempt: u32) -> ChaCha8Rng {
        let key = format!("{}:{}:{}:{}:{}", self.faults.seed, fault.tag(), fingerprint, purpose.as_str(), attempt);
        let digest = Sha256::digest(key.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }

    /// Apply every fault whose draw fires, in the fixed order. Returns the faults that changed the text.
    pub fn inject(&self, text: &str, fingerprint: &str, purpose: Purpose, attempt: u32) -> (String, Vec<Fault>) {
        let mut out = text.to_string();
        let mut fired = Vec::new();
        for fault in Fault::ALL {
            let mut rng = self.stream(fault, fingerprint, purpose, attempt);
            let draw: f64 = rng.gen();
            if draw >= self.faults.probability(fault) {
                continue;
            }
            let changed = match fault {
                Fault::FabricateField => self.fabricate_field(&out, &mut rng),
                Fault::FabricateValue => fabricate_value(&out, &mut rng),
                Fault::Speculative => speculate(&out, &mut rng),
                Fault::Malformed => Some(truncate(&out)),
            };
            if let Some(c) = changed.filter(|c| *c != out) {
                out = c;
                fired.push(fault);
            }
        }
        (out, fired)
    }

    fn fresh_name(&self, base: &str, rng: &mut ChaCha8Rng) -> String {
        let start = rng.gen_range(0..SUFFIXES.len());
        for k in 0..SUFFIXES.len() {
            let name = format!("{base}_{}", SUFFIXES[(start + k) % SUFFIXES.len()]);
            if !self.reserved.contains(&name.to_lowercase()) {
                return name;
            }
        }
        format!("{base}_unreal")
    }

    fn fabricate_field(&self, text: &str, rng: &mut ChaCha8Rng) -> Option<String> {
        if let Ok(mut doc) = serde_json::from_str::<serde_json::Value>(text) {
            doc.get("source")?;
            let mut slots = column_slots(&doc);
            if slots.is_empty() {
                return None;
            }
            let pick = slots.swap_remove(rng.gen_range(0..slots.len()));
            let target = doc.pointer_mut(&pick)?;
            let base = target.as_str()?.rsplit('.').next()?.to_string();
            *target = serde_json::Value::String(self.fresh_name(&base, rng));
            return Some(doc.to_string());
        }
        let words = word_spans(text);
        let candidates: Vec<&(usize, usize)> = words
            .iter()
            .filter(|(a, b)| {
                let w = &text[*a..*b];
                (w.contains('_') && w.chars().any(char::is_alphabetic)) || self.reserved.contains(&w.to_lowercase())
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let &(a, b) = candidates[rng.gen_range(0..candidates.len())];
        let renamed = self.fresh_name(&text[a..b].to_lowercase(), rng);
        Some(format!("{}{}{}", &text[..a], renamed, &text[b..]))
    }
}

/// JSON pointers to every column reference in a plan document.
fn column_slots(doc: &serde_json::Value) -> Vec<String> {
    let mut out = Vec::new();
    let arr = |k: &str| doc.get(k).and_then(|v| v.as_array()).map(|a| a.len()).unwrap_or(0);
    for i in 0..arr("filters") {
        out.push(format!("/filters/{i}/col"));
    }
    for i in 0..arr("group_by") {
        out.push(format!("/group_by/{i}"));
    }
    for i in 0..arr("aggregates") {
        if doc.pointer(&format!("/aggregates/{i}/col")).and_then(|v| v.as_str()) != Some("*") {
            out.push(format!("/aggregates/{i}/col"));
        }
    }
    for i in 0..arr("joins") {
        let pairs = doc.pointer(&format!("/joins/{i}/on")).and_then(|v| v.as_array()).map_or(0, |a| a.len());
        for k in 0..pairs {
            out.push(format!("/joins/{i}/on/{k}/0"));
            out.push(format!("/joins/{i}/on/{k}/1"));
        }
    }
    out.retain(|p| doc.pointer(p).is_some_and(|v| v.is_string()));
    out
}

fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        let w = c.is_alphanumeric() || c == '_';
        match (w, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

fn bump_int(i: i64) -> i64 {
    let up = (i as f64 * 1.1).round() as i64;
    if up == i {
        i.saturating_add(1)
    } else {
        up
    }
}

fn fabricate_value(text: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    if let Ok(mut doc) = serde_json::from_str::<serde_json::Value>(text) {
        let mut leaves = Vec::new();
        numeric_leaves(&doc, String::new(), &mut leaves);
        if leaves.is_empty() {
            return None;
        }
        let pick = &leaves[rng.gen_range(0..leaves.len())];
        let target = doc.pointer_mut(pick)?;
        let n = target.as_number()?.clone();
        *target = match n.as_i64() {
            Some(i) => serde_json::Value::from(bump_int(i)),
            None => serde_json::Value::from(n.as_f64()? * 1.1),
        };
        return Some(doc.to_string());
    }
    let tokens = crate::claims::extract_numbers(text);
    if tokens.is_empty() {
        return None;
    }
    let tok = &tokens[rng.gen_range(0..tokens.len())];
    let replacement = if tok.decimals == 0 && tok.value.fract() == 0.0 && tok.value.abs() < 9.0e15 {
        bump_int(tok.value as i64).to_string()
    } else {
        format!("{:.*}", tok.decimals.max(1), tok.value * 1.1)
    };
    let replacement = if tok.percent { format!("{replacement}%") } else { replacement };
    let pos = text.replace('\u{2212}', "-").find(&tok.text.replace('\u{2212}', "-"))?;
    let original_len = text[pos..].chars().take(tok.text.chars().count()).map(char::len_utf8).sum::<usize>();
    Some(format!("{}{}{}", &text[..pos], replacement, &text[pos + original_len..]))
}

fn numeric_leaves(v: &serde_json::Value, path: String, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Number(_) => out.push(path),
        serde_json::Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                numeric_leaves(item, format!("{path}/{i}"), out);
            }
        }
        serde_json::Value::Object(map) => {
            for (k, item) in map {
                numeric_leaves(item, format!("{path}/{}", k.replace('~', "~0").replace('/', "~1")), out);
            }
        }
        _ => {}
    }
}

const SPECULATIVE_SUBJECTS: [&str; 4] = ["projected_revenue", "expected_sessions", "estimated_growth", "forecast_users"];

fn speculate(text: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    crate::plan::abstention_reason(text)?;
    let subject = SPECULATIVE_SUBJECTS[rng.gen_range(0..SPECULATIVE_SUBJECTS.len())];
    let value = rng.gen_range(1_000..100_000) as f64 + rng.gen_range(0..100) as f64 / 100.0;
    Some(format!(
        "Based on recent trends, {subject} reached {value:.2} for the requested period, driven mostly by repeat visitors."
    ))
}

fn truncate(text: &str) -> String {
    let keep = text.chars().count() * 4 / 5;
    text.chars().take(keep).collect()
}

impl LlmProvider for ScriptedProvider {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, bundle: &PromptBundle, attempt: u32) -> Result<LlmExchange, LlmError> {
        let fingerprint = query_fingerprint(&bundle.user_query);
        let slot = match bundle.purpose {
            Purpose::Plan => 0,
            Purpose::Answer => 1,
            Purpose::Narration => 2,
        };
        let canned = self
            .responses
            .get(&fingerprint)
            .and_then(|r| r[slot].clone())
            .ok_or_else(|| LlmError::UnscriptedQuery {
                fingerprint: fingerprint.clone(),
                purpose: bundle.purpose.as_str().into(),
            })?;
        let (content, _) = self.inject(&canned, &fingerprint, bundle.purpose, attempt);
        Ok(LlmExchange {
            provider: self.id().to_string(),
            attempt,
            request: bundle.clone(),
            request_body: serde_json::to_string(bundle).expect("bundle serializes"),
            raw_response: content.clone(),
            content,
            latency_ms: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::build_answer_prompt;

    const PLAN: &str = r#"{"source":"sessions","filters":[{"col":"country","op":"eq","args":["US"]}],"group_by":["device"],"aggregates":[{"fn":"sum","col":"revenue","as":"revenue"}],"limit":5}"#;

    fn script() -> Script {
        Script {
            entries: vec![ScriptEntry {
                query: "Revenue by device".into(),
                plan: Some(serde_json::from_str(PLAN).unwrap()),
                answer: Some(serde_json::Value::String("Total revenue by device: mobile 10.50".into())),
                narration: None,
            }],
        }
    }

    fn reserved() -> Vec<String> {
        ["country", "device", "revenue", "sessions"].map(String::from).to_vec()
    }

    fn plan_bundle(q: &str) -> PromptBundle {
        let mut b = build_answer_prompt(q, Vec::new());
        b.purpose = Purpose::Plan;
        b
    }

    #[test]
    fn no_faults_is_verbatim() {
        let p = ScriptedProvider::new(&script(), FaultProfile::none(7), reserved());
        assert_eq!(p.complete(&plan_bundle("revenue  BY device"), 0).unwrap().content, PLAN);
    }

    #[test]
    fn fabricated_field_is_absent_from_schema() {
        let faults = FaultProfile { fabricate_field: 1.0, ..FaultProfile::none(1) };
        let p = ScriptedProvider::new(&script(), faults, reserved());
        for attempt in 0..20 {
            let out = p.complete(&plan_bundle("Revenue by device"), attempt).unwrap().content;
            let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
            let unknown: Vec<String> = column_slots(&doc)
                .iter()
                .filter_map(|s| doc.pointer(s).and_then(|v| v.as_str()).map(String::from))
                .filter(|c| !reserved().contains(c))
                .collect();
            assert_eq!(unknown.len(), 1, "{out}");
        }
    }

    #[test]
    fn fault_pattern_depends_only_on_seed_and_case() {
        let faults = FaultProfile::standard(42);
        let a = ScriptedProvider::new(&script(), faults, reserved());
        let b = ScriptedProvider::new(&script(), faults, reserved());
        for attempt in 0..10 {
            assert_eq!(
                a.complete(&plan_bundle("Revenue by device"), attempt).unwrap().content,
                b.complete(&plan_bundle("Revenue by device"), attempt).unwrap().content
            );
        }
    }

    #[test]
    fn classes_fire_independently() {
        let only_malformed = FaultProfile { malformed: 0.5, ..FaultProfile::none(3) };
        let with_value = FaultProfile { fabricate_value: 0.5, ..only_malformed };
        let a = ScriptedProvider::new(&script(), only_malformed, reserved());
        let b = ScriptedProvider::new(&script(), with_value, reserved());
        for attempt in 0..50 {
            let (_, fa) = a.inject(PLAN, "fp", Purpose::Plan, attempt);
            let (_, fb) = b.inject(PLAN, "fp", Purpose::Plan, attempt);
            assert_eq!(fa.contains(&Fault::Malformed), fb.contains(&Fault::Malformed));
        }
    }

    #[test]
    fn prose_faults() {
        let p = ScriptedProvider::new(&script(), FaultProfile::none(0), reserved());
        let mut rng = p.stream(Fault::FabricateField, "x", Purpose::Answer, 0);
        let out = p.fabricate_field("Total revenue by device: mobile 10.50", &mut rng).unwrap();
        assert!(out.contains("revenue_") || out.contains("device_"), "{out}");
        let out = fabricate_value("Total revenue: 10.50", &mut rng).unwrap();
        assert_eq!(out, "Total revenue: 11.55");
        assert!(speculate("plain prose", &mut rng).is_none());
        assert!(speculate(r#"{"abstain":"no data"}"#, &mut rng).is_some());
        assert_eq!(truncate("abcdefghij"), "abcdefgh");
    }

    #[test]
    fn unscripted_query_errors() {
        let p = ScriptedProvider::new(&script(), FaultProfile::none(0), reserved());
        assert!(matches!(p.complete(&plan_bundle("something else"), 0), Err(LlmError::UnscriptedQuery { .. })));
        let mut narration = plan_bundle("Revenue by device");
        narration.purpose = Purpose::Narration;
        assert!(p.complete(&narration, 0).is_err());
    }
}
