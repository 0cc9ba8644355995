//! Tagged scalar values and their kinds.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Kind of a non-null [`Value`]; also the declared kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Boolean,
    Integer,
    Float,
    Text,
    Date,
    Timestamp,
}

impl ValueKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Integer | ValueKind::Float)
    }

    pub fn is_temporal(self) -> bool {
        matches!(self, ValueKind::Date | ValueKind::Timestamp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Boolean => "boolean",
            ValueKind::Integer => "integer",
            ValueKind::Float => "float",
            ValueKind::Text => "text",
            ValueKind::Date => "date",
            ValueKind::Timestamp => "timestamp",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single cell. Timestamps are UTC seconds since the epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Date(NaiveDate),
    Timestamp(i64),
}

impl Value {
    pub fn kind(&self) -> Option<ValueKind> {
        match self {
            Value::Null => None,
            Value::Bool(_) => Some(ValueKind::Boolean),
            Value::Int(_) => Some(ValueKind::Integer),
            Value::Float(_) => Some(ValueKind::Float),
            Value::Text(_) => Some(ValueKind::Text),
            Value::Date(_) => Some(ValueKind::Date),
            Value::Timestamp(_) => Some(ValueKind::Timestamp),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Calendar day of a date or timestamp value.
    pub fn as_date(&self) -> Option<NaiveDate> {
        match self {
            Value::Date(d) => Some(*d),
            Value::Timestamp(ts) => timestamp_to_datetime(*ts).map(|dt| dt.date_naive()),
            _ => None,
        }
    }

    /// Build a timestamp value, rejecting instants outside the representable calendar.
    pub fn timestamp(seconds: i64) -> Option<Value> {
        timestamp_to_datetime(seconds).map(|_| Value::Timestamp(seconds))
    }

    /// Parse `text` strictly as `kind`. Empty input is not handled here.
    pub fn parse_as(text: &str, kind: ValueKind) -> Option<Value> {
        let t = text.trim();
        match kind {
            ValueKind::Boolean => {
                if t.eq_ignore_ascii_case("true") {
                    Some(Value::Bool(true))
                } else if t.eq_ignore_ascii_case("false") {
                    Some(Value::Bool(false))
                } else {
                    None
                }
            }
            ValueKind::Integer => t.parse::<i64>().ok().map(Value::Int),
            ValueKind::Float => {
                // Rust accepts "inf"/"nan"; only finite decimal notation is a float here.
                if !t.bytes().any(|b| b.is_ascii_digit())
                    || t.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E')
                {
                    return None;
                }
                t.parse::<f64>().ok().filter(|f| f.is_finite()).map(Value::Float)
            }
            ValueKind::Text => Some(Value::Text(text.to_string())),
            ValueKind::Date => parse_iso_date(t).map(Value::Date),
            ValueKind::Timestamp => DateTime::parse_from_rfc3339(t)
                .ok()
                .map(|dt| Value::Timestamp(dt.timestamp())),
        }
    }

    /// Text used when writing the value back to CSV; re-parses to an identical value.
    pub fn to_csv_field(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format!("{f:?}"),
            Value::Text(s) => s.clone(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::Timestamp(ts) => format_timestamp(*ts),
        }
    }

    /// Human-facing rendering: floats at two decimals, ISO dates, empty for null.
    pub fn display(&self) -> String {
        match self {
            Value::Float(f) => format!("{f:.2}"),
            other => other.to_csv_field(),
        }
    }
}

pub fn parse_iso_date(text: &str) -> Option<NaiveDate> {
    let b = text.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    if !b
        .iter()
        .enumerate()
        .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
    {
        return None;
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()
}

fn timestamp_to_datetime(seconds: i64) -> Option<DateTime<Utc>> {
    DateTime::<Utc>::from_timestamp(seconds, 0)
}

pub fn format_timestamp(seconds: i64) -> String {
    timestamp_to_datetime(seconds)
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_default()
}

/// Total order used by sorting, min/max, and comparisons between values of
/// one column. Integers and floats compare numerically; nulls sort first here
/// (callers that need nulls-last handle them explicitly).
pub fn compare_values(a: &Value, b: &Value) -> Ordering {
    use Value::*;
    match (a, b) {
        (Null, Null) => Ordering::Equal,
        (Null, _) => Ordering::Less,
        (_, Null) => Ordering::Greater,
        (Int(x), Int(y)) => x.cmp(y),
        (Int(_) | Float(_), Int(_) | Float(_)) => {
            let (x, y) = (a.as_f64().unwrap_or(0.0), b.as_f64().unwrap_or(0.0));
            x.total_cmp(&y)
        }
        (Bool(x), Bool(y)) => x.cmp(y),
        (Text(x), Text(y)) => x.cmp(y),
        (Date(x), Date(y)) => x.cmp(y),
        (Timestamp(x), Timestamp(y)) => x.cmp(y),
        (Date(_), Timestamp(_)) | (Timestamp(_), Date(_)) => {
            let key = |v: &Value| match v {
                Date(d) => d.and_hms_opt(0, 0, 0).map(|t| t.and_utc().timestamp()).unwrap_or(0),
                Timestamp(t) => *t,
                _ => 0,
            };
            key(a).cmp(&key(b))
        }
        _ => rank(a).cmp(&rank(b)),
    }
}

fn rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Int(_) | Value::Float(_) => 2,
        Value::Text(_) => 3,
        Value::Date(_) | Value::Timestamp(_) => 4,
    }
}

/// Hashable wrapper for grouping and join keys. Floats compare by bit
/// pattern after folding -0.0 onto 0.0.
#[derive(Debug, Clone)]
pub struct KeyValue(pub Value);

impl PartialEq for KeyValue {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Value::Float(a), Value::Float(b)) => norm_bits(*a) == norm_bits(*b),
            (a, b) => a == b,
        }
    }
}

impl Eq for KeyValue {}

impl Hash for KeyValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(&self.0).hash(state);
        match &self.0 {
            Value::Null => {}
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Float(f) => norm_bits(*f).hash(state),
            Value::Text(s) => s.hash(state),
            Value::Date(d) => d.hash(state),
            Value::Timestamp(t) => t.hash(state),
        }
    }
}

fn norm_bits(f: f64) -> u64 {
    if f == 0.0 {
        0
    } else {
        f.to_bits()
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => s.serialize_none(),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Float(f) => s.serialize_f64(*f),
            Value::Text(t) => s.serialize_str(t),
            Value::Date(_) | Value::Timestamp(_) => s.serialize_str(&self.to_csv_field()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    /// JSON scalars map onto null/bool/int/float/text; dates arrive as text and
    /// are coerced against a column kind by the caller.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        Value::from_json(&raw).ok_or_else(|| serde::de::Error::custom("expected a JSON scalar"))
    }
}

impl Value {
    pub fn from_json(raw: &serde_json::Value) -> Option<Value> {
        Some(match raw {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Float(n.as_f64()?),
            },
            serde_json::Value::String(s) => Value::Text(s.clone()),
            _ => return None,
        })
    }

    /// Interpret a loosely typed value (as read from JSON) as `kind`.
    pub fn coerce_to(&self, kind: ValueKind) -> Option<Value> {
        match (self, kind) {
            (Value::Null, _) => Some(Value::Null),
            (Value::Int(i), ValueKind::Float) => Some(Value::Float(*i as f64)),
            (Value::Float(f), ValueKind::Integer) if f.fract() == 0.0 && f.abs() < 9.0e15 => {
                Some(Value::Int(*f as i64))
            }
            (Value::Text(t), ValueKind::Date | ValueKind::Timestamp) => Value::parse_as(t, kind),
            (v, k) if v.kind() == Some(k) => Some(v.clone()),
            _ => None,
        }
    }
}
