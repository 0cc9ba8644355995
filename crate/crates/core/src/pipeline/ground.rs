use std::collections::HashSet;

use crate::claims::{extract_numbers, extract_terms, extract_urls, number_matches, Claim, ClaimKind, GroundingReport};
use crate::exec::ResultTable;
use crate::rules::source_has_text;
use crate::semantic::{Resolution, SemanticModel};
use crate::store::{DatasetLookup, Value};

/// Lowercased names a term claim may legitimately refer to.
fn vocabulary(result: Option<&ResultTable>, store: &dyn DatasetLookup, model: &SemanticModel) -> HashSet<String> {
    let mut vocab: HashSet<String> = model.vocabulary().map(str::to_lowercase).collect();
    for name in store.dataset_names() {
        if let Some(ds) = store.dataset(&name) {
            vocab.extend(ds.schema.columns.iter().map(|c| c.name.to_lowercase()));
        }
        vocab.insert(name.to_lowercase());
    }
    if let Some(r) = result {
        vocab.extend(r.columns.iter().map(|c| c.name.to_lowercase()));
    }
    vocab
}

fn source_has_text_ci(store: &dyn DatasetLookup, needle: &str) -> bool {
    store.dataset_names().iter().filter_map(|n| store.dataset(n)).any(|ds| {
        ds.rows
            .iter()
            .flatten()
            .any(|v| v.as_text().is_some_and(|t| t.eq_ignore_ascii_case(needle)))
    })
}

/// Check every numeric, term, and link claim in `answer`.
///
/// Numbers must match a result cell; without a result they are checked
/// against the source data instead.
pub fn ground_answer(
    answer: &str,
    result: Option<&ResultTable>,
    store: &dyn DatasetLookup,
    model: &SemanticModel,
) -> GroundingReport {
    let mut claims = Vec::new();

    for url in extract_urls(answer) {
        let in_result = result.is_some_and(|r| r.cells().any(|v| v.as_text() == Some(url.as_str())));
        let matched = in_result || source_has_text(store, &url);
        claims.push(Claim {
            kind: ClaimKind::Url,
            target: matched.then(|| if in_result { "result" } else { "source data" }.to_string()),
            text: url,
            matched,
        });
    }

    // Digits inside text cells ("Route 66") are part of a name, not a numeric claim.
    let mut scrubbed = answer.to_string();
    if let Some(r) = result {
        let mut texts: Vec<&str> = r.cells().filter_map(Value::as_text).filter(|t| !t.is_empty()).collect();
        texts.sort_by_key(|t| std::cmp::Reverse(t.len()));
        for t in texts {
            if t.chars().any(|c| c.is_ascii_digit()) {
                scrubbed = scrubbed.replace(t, &" ".repeat(t.len()));
            }
        }
    }
    let numbers = extract_numbers(&scrubbed);
    if !numbers.is_empty() {
        let source_cells: Vec<&Value> = if result.is_none() {
            store
                .dataset_names()
                .iter()
                .filter_map(|n| store.dataset(n))
                .flat_map(|ds| ds.rows.iter().flatten())
                .collect()
        } else {
            Vec::new()
        };
        for tok in numbers {
            let hit = match result {
                Some(r) => r.columns.iter().enumerate().find_map(|(ci, c)| {
                    r.rows.iter().find(|row| number_matches(&tok, &row[ci])).map(|_| c.name.clone())
                }),
                None => source_cells.iter().any(|c| number_matches(&tok, c)).then(|| "source data".to_string()),
            };
            claims.push(Claim { kind: ClaimKind::Numeric, text: tok.text, matched: hit.is_some(), target: hit });
        }
    }

    let vocab = vocabulary(result, store, model);
    for term in extract_terms(answer, &vocab) {
        let lower = term.to_lowercase();
        let target = if vocab.contains(&lower) {
            Some("vocabulary".to_string())
        } else if result.is_some_and(|r| r.cells().any(|v| v.as_text().is_some_and(|t| t.eq_ignore_ascii_case(&term)))) {
            Some("result".to_string())
        } else if model.resolve_term(&term) != Resolution::Unknown {
            Some("semantic model".to_string())
        } else if source_has_text_ci(store, &term) {
            Some("source data".to_string())
        } else {
            None
        };
        claims.push(Claim { kind: ClaimKind::Term, text: term, matched: target.is_some(), target });
    }

    GroundingReport::from_claims(claims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{Column, ColumnRole, StoreSnapshot, ValueKind};

    fn figure_table() -> ResultTable {
        let rows = [("New York", 84.05), ("Houston", 72.49), ("Chicago", 33.45), ("Los Angeles", 13.19), ("Phoenix", -2.44)];
        ResultTable {
            columns: vec![
                Column { name: "location".into(), kind: ValueKind::Text, role: ColumnRole::Dimension },
                Column { name: "avg_price_change".into(), kind: ValueKind::Float, role: ColumnRole::Measure },
            ],
            rows: rows.iter().map(|(l, v)| vec![Value::Text(l.to_string()), Value::Float(*v)]).collect(),
        }
    }

    #[test]
    fn figure_sentence_is_grounded() {
        let store = StoreSnapshot::default();
        let model = SemanticModel::empty();
        let t = figure_table();
        let r = ground_answer("New York shows the highest average increase", Some(&t), &store, &model);
        assert!(r.grounded);
        assert_eq!(r.claims[0].text, "New York");
        let r = ground_answer("New York leads at 84.05", Some(&t), &store, &model);
        assert!(r.grounded, "{r:?}");
        assert!(ground_answer("nothing to check here", Some(&t), &store, &model).claims.is_empty());
    }

    #[test]
    fn fabrications_are_unmatched() {
        let store = StoreSnapshot::default();
        let t = figure_table();
        let r = ground_answer("avg_price_change_adj was 91.2 in San Diego", Some(&t), &store, &SemanticModel::empty());
        assert!(!r.grounded);
        assert_eq!(r.unmatched().count(), 3);
    }
}
