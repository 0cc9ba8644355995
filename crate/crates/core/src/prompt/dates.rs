//! Relative-date phrases resolved against an explicit anchor date.

use std::fmt;
use std::sync::OnceLock;

use chrono::{Datelike, Duration, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedDate {
    pub phrase: String,
    pub range: DateRange,
}

const NUMBER_WORDS: [&str; 12] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

fn phrase_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let words = NUMBER_WORDS.join("|");
        Regex::new(&format!(
            r"(?ix)\b(?:
                (?:last|past|previous)\s+(?P<n>\d{{1,4}}|{words})\s+(?P<unit>days?|months?)
              | (?:last|past|previous)\s+(?P<prev>month|quarter|year)
              | this\s+(?P<this>month|year)
              | q(?P<q>[1-4])(?:\s+(?:of\s+)?(?P<qy>\d{{4}}))?
            )\b"
        ))
        .expect("date phrase regex")
    })
}

fn month_start(year: i32, month: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, month, 1).expect("valid month")
}

/// First day of the month `offset` months away from (year, month).
fn shift_month(year: i32, month: u32, offset: i64) -> NaiveDate {
    let index = year as i64 * 12 + (month as i64 - 1) + offset;
    month_start(index.div_euclid(12) as i32, (index.rem_euclid(12) + 1) as u32)
}

fn parse_count(text: &str) -> Option<i64> {
    let lower = text.to_ascii_lowercase();
    NUMBER_WORDS
        .iter()
        .position(|w| *w == lower)
        .map(|i| i as i64 + 1)
        .or_else(|| lower.parse().ok())
}

/// Every supported phrase in `text`, scanned left to right without overlaps.
pub fn resolve_relative_dates(text: &str, now: NaiveDate) -> Vec<ResolvedDate> {
    let mut out = Vec::new();
    for caps in phrase_regex().captures_iter(text) {
        let phrase = caps[0].to_string();
        let this_month = month_start(now.year(), now.month());
        let range = if let Some(n) = caps.name("n") {
            let Some(n) = parse_count(n.as_str()).filter(|&n| n >= 1) else { continue };
            if caps["unit"].to_ascii_lowercase().starts_with("day") {
                DateRange { start: now - Duration::days(n - 1), end: now }
            } else {
                DateRange { start: shift_month(now.year(), now.month(), -n), end: this_month - Duration::days(1) }
            }
        } else if let Some(unit) = caps.name("prev") {
            match unit.as_str().to_ascii_lowercase().as_str() {
                "month" => DateRange { start: shift_month(now.year(), now.month(), -1), end: this_month - Duration::days(1) },
                "quarter" => {
                    let q_start = shift_month(now.year(), now.month(), -((now.month() as i64 - 1) % 3));
                    DateRange { start: shift_month(q_start.year(), q_start.month(), -3), end: q_start - Duration::days(1) }
                }
                _ => DateRange {
                    start: month_start(now.year() - 1, 1),
                    end: month_start(now.year(), 1) - Duration::days(1),
                },
            }
        } else if let Some(unit) = caps.name("this") {
            if unit.as_str().eq_ignore_ascii_case("month") {
                DateRange { start: this_month, end: now }
            } else {
                DateRange { start: month_start(now.year(), 1), end: now }
            }
        } else {
            let q: u32 = caps["q"].parse().expect("digit 1-4");
            let year = caps.name("qy").map_or(now.year(), |y| y.as_str().parse().expect("four digits"));
            let start = month_start(year, (q - 1) * 3 + 1);
            DateRange { start, end: shift_month(year, start.month(), 3) - Duration::days(1) }
        };
        out.push(ResolvedDate { phrase, range });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn one(text: &str, now: &str) -> String {
        let got = resolve_relative_dates(text, d(now));
        assert_eq!(got.len(), 1, "{text}");
        got[0].range.to_string()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(one("last quarter", "2017-07-15"), "2017-04-01..2017-06-30");
        assert_eq!(one("last 30 days", "2017-07-15"), "2017-06-16..2017-07-15");
        assert_eq!(one("in Q3", "2017-07-15"), "2017-07-01..2017-09-30");
    }

    #[test]
    fn boundaries() {
        assert_eq!(one("last month", "2017-01-10"), "2016-12-01..2016-12-31");
        assert_eq!(one("past month", "2020-03-31"), "2020-02-01..2020-02-29");
        assert_eq!(one("last quarter", "2017-01-01"), "2016-10-01..2016-12-31");
        assert_eq!(one("this month", "2020-02-29"), "2020-02-01..2020-02-29");
        assert_eq!(one("last six months", "2017-08-01"), "2017-02-01..2017-07-31");
        assert_eq!(one("Q4 of 2016", "2017-07-15"), "2016-10-01..2016-12-31");
        assert_eq!(one("last year", "2020-02-29"), "2019-01-01..2019-12-31");
    }

    #[test]
    fn scan_is_left_to_right_and_non_overlapping() {
        let got = resolve_relative_dates("compare last month with this year and Q1 2016", d("2017-07-15"));
        let phrases: Vec<_> = got.iter().map(|r| r.phrase.as_str()).collect();
        assert_eq!(phrases, ["last month", "this year", "Q1 2016"]);
        assert!(resolve_relative_dates("Q3x and last 0 days", d("2017-07-15")).is_empty());
    }
}
