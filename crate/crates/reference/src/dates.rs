//! Day-walking reference for relative-date phrases. Every range is found by
//! stepping one calendar day at a time from the anchor rather than by month
//! arithmetic.

use chrono::{Datelike, NaiveDate};

fn back(d: NaiveDate) -> NaiveDate {
    d.pred_opt().expect("date in range")
}

fn first_of_month(mut d: NaiveDate) -> NaiveDate {
    while d.day() != 1 {
        d = back(d);
    }
    d
}

fn first_of_quarter(mut d: NaiveDate) -> NaiveDate {
    while !(d.day() == 1 && d.month() % 3 == 1) {
        d = back(d);
    }
    d
}

fn first_of_year(mut d: NaiveDate) -> NaiveDate {
    while !(d.day() == 1 && d.month() == 1) {
        d = back(d);
    }
    d
}

/// Complete calendar months before the anchor's month: (first day, last day).
fn months_before(now: NaiveDate, n: u32) -> (NaiveDate, NaiveDate) {
    let end = back(first_of_month(now));
    let mut start = first_of_month(end);
    for _ in 1..n {
        start = first_of_month(back(start));
    }
    (start, end)
}

/// A phrase kind the resolver must support, with its expected inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phrase {
    LastDays(u32),
    LastMonths(u32),
    PreviousMonth,
    PreviousQuarter,
    PreviousYear,
    ThisMonth,
    ThisYear,
    Quarter(u32, Option<i32>),
}

pub fn expected(phrase: Phrase, now: NaiveDate) -> (NaiveDate, NaiveDate) {
    match phrase {
        Phrase::LastDays(n) => {
            let mut start = now;
            for _ in 1..n {
                start = back(start);
            }
            (start, now)
        }
        Phrase::LastMonths(n) => months_before(now, n),
        Phrase::PreviousMonth => months_before(now, 1),
        Phrase::PreviousQuarter => {
            let end = back(first_of_quarter(now));
            (first_of_quarter(end), end)
        }
        Phrase::PreviousYear => {
            let end = back(first_of_year(now));
            (first_of_year(end), end)
        }
        Phrase::ThisMonth => (first_of_month(now), now),
        Phrase::ThisYear => (first_of_year(now), now),
        Phrase::Quarter(q, year) => {
            let year = year.unwrap_or(now.year());
            // Walk forward from New Year's day to the quarter's first day, then to its last.
            let mut d = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
            while (d.month() - 1) / 3 + 1 != q {
                d = d.succ_opt().expect("date in range");
            }
            let start = d;
            while d.succ_opt().is_some_and(|n| (n.month() - 1) / 3 + 1 == q && n.year() == year) {
                d = d.succ_opt().expect("date in range");
            }
            (start, d)
        }
    }
}

const WORDS: [&str; 12] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

/// Surface forms for every phrase kind, with the kind each should resolve to.
pub fn phrase_catalog() -> Vec<(String, Phrase)> {
    let mut out = Vec::new();
    for lead in ["last", "past", "previous"] {
        for n in [1u32, 7, 30, 90, 365] {
            let unit = if n == 1 { "day" } else { "days" };
            out.push((format!("{lead} {n} {unit}"), Phrase::LastDays(n)));
        }
        out.push((format!("{lead} three days"), Phrase::LastDays(3)));
        for n in [1u32, 2, 3, 6, 12] {
            let unit = if n == 1 { "month" } else { "months" };
            out.push((format!("{lead} {n} {unit}"), Phrase::LastMonths(n)));
        }
        out.push((format!("{lead} {} months", WORDS[5]), Phrase::LastMonths(6)));
        out.push((format!("{lead} {} months", WORDS[11]), Phrase::LastMonths(12)));
        out.push((format!("{lead} month"), Phrase::PreviousMonth));
        out.push((format!("{lead} quarter"), Phrase::PreviousQuarter));
        out.push((format!("{lead} year"), Phrase::PreviousYear));
    }
    out.push(("this month".into(), Phrase::ThisMonth));
    out.push(("this year".into(), Phrase::ThisYear));
    for q in 1..=4u32 {
        out.push((format!("Q{q}"), Phrase::Quarter(q, None)));
        out.push((format!("Q{q} 2016"), Phrase::Quarter(q, Some(2016))));
        out.push((format!("q{q} of 2020"), Phrase::Quarter(q, Some(2020))));
    }
    out
}

/// Anchors covering month, quarter, and year edges plus a leap day.
pub fn anchor_dates() -> Vec<NaiveDate> {
    [
        "2017-01-01", "2017-01-31", "2017-03-31", "2017-04-01", "2017-06-30", "2017-07-15", "2017-10-01",
        "2017-12-31", "2019-03-01", "2020-02-29", "2020-03-01", "2020-12-31",
    ]
    .iter()
    .map(|s| s.parse().expect("anchor literal"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn hand_checked_ranges() {
        assert_eq!(expected(Phrase::PreviousQuarter, d("2017-01-01")), (d("2016-10-01"), d("2016-12-31")));
        assert_eq!(expected(Phrase::PreviousMonth, d("2020-03-01")), (d("2020-02-01"), d("2020-02-29")));
        assert_eq!(expected(Phrase::LastDays(30), d("2017-07-15")), (d("2017-06-16"), d("2017-07-15")));
        assert_eq!(expected(Phrase::Quarter(1, Some(2020)), d("2017-07-15")), (d("2020-01-01"), d("2020-03-31")));
        assert_eq!(expected(Phrase::LastMonths(12), d("2020-02-29")), (d("2019-02-01"), d("2020-01-31")));
    }
}
