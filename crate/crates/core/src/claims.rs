//! Claim extraction and matching used by grounding and answer audits.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::store::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Numeric,
    Term,
    Url,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub kind: ClaimKind,
    pub text: String,
    pub matched: bool,
    /// What the claim was matched against, when it was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundingReport {
    pub claims: Vec<Claim>,
    pub grounded: bool,
}

impl GroundingReport {
    pub fn from_claims(claims: Vec<Claim>) -> GroundingReport {
        let grounded = claims.iter().all(|c| c.matched);
        GroundingReport { claims, grounded }
    }

    pub fn unmatched(&self) -> impl Iterator<Item = &Claim> {
        self.claims.iter().filter(|c| !c.matched)
    }
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?i)\b(?:https?://|www\.)[^\s<>"'`]+"#).expect("url regex"))
}

fn date_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b\d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}(?::\d{2})?Z?)?\b").expect("date regex")
    })
}

/// URL tokens with trailing sentence punctuation removed.
pub fn extract_urls(text: &str) -> Vec<String> {
    url_regex()
        .find_iter(text)
        .map(|m| m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']']).to_string())
        .collect()
}

/// Replace URLs and ISO dates with spaces so their digits are not read as numbers.
fn blank_out(text: &str) -> String {
    let mut out = text.replace('\u{2212}', "-");
    for re in [url_regex(), date_regex()] {
        out = re
            .replace_all(&out, |c: &regex::Captures| " ".repeat(c[0].len()))
            .into_owned();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumberToken {
    pub text: String,
    pub value: f64,
    pub decimals: usize,
    pub percent: bool,
}

/// Standalone numbers in prose. Digits glued to letters or underscores
/// ("Q3", "v2", "campaign_7") are not numeric claims.
pub fn extract_numbers(text: &str) -> Vec<NumberToken> {
    let cleaned = blank_out(text);
    let chars: Vec<char> = cleaned.chars().collect();
    let word = |c: char| c.is_alphanumeric() || c == '_';
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let starts_digit = c.is_ascii_digit();
        let signed = c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if !(starts_digit || signed) || (i > 0 && (word(chars[i - 1]) || chars[i - 1] == '.')) {
            i += 1;
            continue;
        }
        if signed && i > 0 && !(chars[i - 1].is_whitespace() || "(:=[".contains(chars[i - 1])) {
            i += 1;
            continue;
        }
        let start = i;
        if signed {
            i += 1;
        }
        let mut digits = String::new();
        if signed {
            digits.push('-');
        }
        while i < chars.len() {
            let d = chars[i];
            if d.is_ascii_digit() {
                digits.push(d);
                i += 1;
            } else if d == ','
                && chars.get(i + 1).is_some_and(|x| x.is_ascii_digit())
                && chars.get(i + 2).is_some_and(|x| x.is_ascii_digit())
                && chars.get(i + 3).is_some_and(|x| x.is_ascii_digit())
                && !chars.get(i + 4).is_some_and(|x| x.is_ascii_digit())
            {
                i += 1;
            } else {
                break;
            }
        }
        let mut decimals = 0;
        if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|x| x.is_ascii_digit()) {
            digits.push('.');
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                digits.push(chars[i]);
                decimals += 1;
                i += 1;
            }
        }
        if chars.get(i).is_some_and(|&x| word(x)) {
            while i < chars.len() && word(chars[i]) {
                i += 1;
            }
            continue;
        }
        let percent = chars.get(i) == Some(&'%');
        if percent {
            i += 1;
        }
        if let Ok(value) = digits.parse::<f64>() {
            out.push(NumberToken {
                text: chars[start..i].iter().collect(),
                value,
                decimals,
                percent,
            });
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-6 * a.abs().max(b.abs())
}

/// A numeric claim matches a cell if it equals the cell at the cell's display
/// precision (or at the claim's own precision, when coarser), or is within 1e-6 relative.
pub fn number_matches(token: &NumberToken, cell: &Value) -> bool {
    let Some(raw) = cell.as_f64() else { return false };
    let candidates: &[f64] = if token.percent { &[token.value, token.value / 100.0] } else { &[token.value] };
    for &want in candidates {
        if close(want, raw) {
            return true;
        }
        if matches!(cell, Value::Float(_)) {
            for places in [2usize, token.decimals.min(2)] {
                let shown = format!("{raw:.places$}");
                if shown.parse::<f64>().is_ok_and(|s| s == want) {
                    return true;
                }
            }
        }
    }
    false
}

const STARTERS: &[&str] = &[
    "The", "A", "An", "In", "On", "At", "For", "By", "From", "To", "Of", "And", "Or", "But", "With", "During",
    "Total", "Average", "Overall", "Our", "Your", "This", "That", "These", "Those", "Based", "According",
    "Rows", "Top", "Bottom", "Highest", "Lowest", "Sum", "Count", "Here", "There", "It", "We", "I", "As",
];

/// Term-like claims: identifiers containing `_`, vocabulary words, and runs of
/// two or more capitalized words.
pub fn extract_terms(text: &str, vocabulary: &HashSet<String>) -> Vec<String> {
    let cleaned = blank_out(text);
    let mut terms: Vec<String> = Vec::new();
    let push = |t: String, terms: &mut Vec<String>| {
        if !terms.iter().any(|x| x.eq_ignore_ascii_case(&t)) {
            terms.push(t);
        }
    };

    let tokens: Vec<&str> = cleaned
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .collect();
    for t in &tokens {
        let lower = t.to_lowercase();
        let ident = t.contains('_') && t.chars().any(|c| c.is_alphabetic());
        if ident || vocabulary.contains(&lower) {
            push(t.to_string(), &mut terms);
        }
    }

    // Capitalized runs never cross punctuation.
    for segment in cleaned.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == ' ' || c == '\'' || c == '&')) {
        let mut run: Vec<&str> = Vec::new();
        let words: Vec<&str> = segment.split(' ').filter(|w| !w.is_empty()).collect();
        for w in words.iter().copied().chain(std::iter::once("")) {
            let capitalized = w.chars().next().is_some_and(|c| c.is_uppercase()) && !w.contains('_');
            if capitalized {
                run.push(w);
                continue;
            }
            while run.first().is_some_and(|f| STARTERS.contains(f)) {
                run.remove(0);
            }
            if run.len() >= 2 {
                push(run.join(" "), &mut terms);
            }
            run.clear();
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(text: &str) -> Vec<String> {
        extract_numbers(text).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn numbers_skip_dates_urls_and_glued_digits() {
        assert_eq!(nums("Revenue was 1,234.50 in Q3 (2017-04-01..2017-06-30) per https://x.io/a1"), ["1,234.50"]);
        assert_eq!(nums("campaign_7 and v2 and 3rd"), Vec::<String>::new());
        assert_eq!(nums("changed by -2.44 and \u{2212}4.44, up 15%"), ["-2.44", "-4.44", "15%"]);
        assert_eq!(nums("between 10-12"), ["10", "12"]);
        assert_eq!(extract_numbers("1,234.5")[0].value, 1234.5);
    }

    #[test]
    fn display_precision_matching() {
        let t = &extract_numbers("84.05")[0];
        assert!(number_matches(t, &Value::Float(84.050000001)));
        assert!(!number_matches(t, &Value::Float(84.06)));
        let t = &extract_numbers("10")[0];
        assert!(number_matches(t, &Value::Int(10)));
        assert!(!number_matches(t, &Value::Int(11)));
        let t = &extract_numbers("15.5%")[0];
        assert!(number_matches(t, &Value::Float(0.155)));
        assert!(!number_matches(t, &Value::Text("15.5".into())));
    }

    #[test]
    fn terms() {
        let vocab: HashSet<String> = ["revenue".to_string()].into();
        let t = extract_terms("The New York office beat Los Angeles. Revenue of ad_frequency_x rose", &vocab);
        assert_eq!(t, ["Revenue", "ad_frequency_x", "New York", "Los Angeles"]);
        assert!(extract_terms("Total revenue was 10", &HashSet::new()).is_empty());
    }

    #[test]
    fn urls_trimmed() {
        assert_eq!(extract_urls("see https://example.com/p1."), ["https://example.com/p1"]);
    }
}
