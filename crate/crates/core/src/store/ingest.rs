//! CSV and JSON ingestion with schema inference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::{compute_metadata, Column, ColumnRole, Dataset, DatasetMetadata, IngestWarning, Schema};
use super::value::{Value, ValueKind};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IngestError {
    #[error("input has no data rows")]
    EmptyInput,
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("input is not valid UTF-8: {0}")]
    EncodingError(String),
    #[error("delimiter must be a single ASCII character, got {0:?}")]
    InvalidDelimiter(char),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("row {row} column {column}: {value:?} does not parse as hinted kind {kind}")]
    HintMismatch { row: usize, column: String, value: String, kind: ValueKind },
    #[error("column {column}: role {role:?} is not valid for kind {kind}")]
    BadRoleHint { column: String, role: ColumnRole, kind: ValueKind },
}

impl IngestError {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::EmptyInput => "EmptyInput",
            IngestError::RaggedRow { .. } => "RaggedRow",
            IngestError::EncodingError(_) => "EncodingError",
            IngestError::InvalidDelimiter(_) => "InvalidDelimiter",
            IngestError::Csv(_) => "Csv",
            IngestError::Json(_) => "Json",
            IngestError::HintMismatch { .. } => "HintMismatch",
            IngestError::BadRoleHint { .. } => "BadRoleHint",
        }
    }
}

/// Optional per-column override of inferred kind and/or role.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnHint {
    #[serde(default)]
    pub kind: Option<ValueKind>,
    #[serde(default)]
    pub role: Option<ColumnRole>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub delimiter: char,
    pub has_header: bool,
    /// Keyed by column name, matched case-insensitively.
    pub type_hints: BTreeMap<String, ColumnHint>,
    /// Defaults to the dataset name.
    pub source_label: Option<String>,
    /// UTC seconds recorded in metadata; callers supply it so ingestion stays pure.
    pub ingested_at: i64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: ',',
            has_header: true,
            type_hints: BTreeMap::new(),
            source_label: None,
            ingested_at: 0,
        }
    }
}

const PRECEDENCE: [ValueKind; 5] = [
    ValueKind::Boolean,
    ValueKind::Integer,
    ValueKind::Float,
    ValueKind::Date,
    ValueKind::Timestamp,
];

/// Pick the first kind in precedence order that every non-empty sample parses as;
/// text is the fallback. A hint wins outright.
pub fn infer_column<S: AsRef<str>>(samples: &[S], hint: Option<ValueKind>) -> (ValueKind, ColumnRole) {
    let kind = hint.unwrap_or_else(|| {
        let mut present = samples
            .iter()
            .map(AsRef::as_ref)
            .filter(|s| !s.trim().is_empty())
            .peekable();
        if present.peek().is_none() {
            return ValueKind::Text;
        }
        let present: Vec<&str> = present.collect();
        PRECEDENCE
            .into_iter()
            .find(|k| present.iter().all(|s| Value::parse_as(s, *k).is_some()))
            .unwrap_or(ValueKind::Text)
    });
    (kind, ColumnRole::for_kind(kind))
}

pub fn ingest_csv(bytes: &[u8], name: &str, options: &IngestOptions) -> Result<Dataset, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::EncodingError(e.to_string()))?;
    if !options.delimiter.is_ascii() {
        return Err(IngestError::InvalidDelimiter(options.delimiter));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| IngestError::Csv(e.to_string()))?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    let mut records = records.into_iter();
    let header = if options.has_header {
        records.next().ok_or(IngestError::EmptyInput)?
    } else {
        Vec::new()
    };
    let body: Vec<Vec<String>> = records.collect();
    if body.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let arity = if options.has_header { header.len() } else { body[0].len() };
    for (i, row) in body.iter().enumerate() {
        if row.len() != arity {
            return Err(IngestError::RaggedRow { row: i, expected: arity, found: row.len() });
        }
    }
    let names = if options.has_header {
        header
    } else {
        (1..=arity).map(|i| format!("col_{i}")).collect()
    };
    build_dataset(name, names, body, options)
}

/// JSON ingestion: an array of flat objects; keys become columns in first-seen order.
pub fn ingest_json(bytes: &[u8], name: &str, options: &IngestOptions) -> Result<Dataset, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::EncodingError(e.to_string()))?;
    if text.trim().is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| IngestError::Json(e.to_string()))?;
    let items = doc
        .as_array()
        .ok_or_else(|| IngestError::Json("top level must be an array of objects".into()))?;
    if items.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut names: Vec<String> = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| IngestError::Json(format!("element {i} is not an object")))?;
        for key in obj.keys() {
            if !names.contains(key) {
                names.push(key.clone());
            }
        }
    }
    let mut body = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let obj = item.as_object().expect("checked above");
        let mut row = Vec::with_capacity(names.len());
        for key in &names {
            let cell = match obj.get(key) {
                None | Some(serde_json::Value::Null) => String::new(),
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Bool(b)) => b.to_string(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(_) => {
                    return Err(IngestError::Json(format!("element {i} key {key:?} is not a scalar")))
                }
            };
            row.push(cell);
        }
        body.push(row);
    }
    build_dataset(name, names, body, options)
}

fn build_dataset(
    name: &str,
    raw_names: Vec<String>,
    body: Vec<Vec<String>>,
    options: &IngestOptions,
) -> Result<Dataset, IngestError> {
    let (names, warnings) = dedupe_names(raw_names);
    let mut columns = Vec::with_capacity(names.len());
    for (idx, col_name) in names.iter().enumerate() {
        let hint = options
            .type_hints
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(col_name))
            .map(|(_, h)| h.clone())
            .unwrap_or_default();
        let samples: Vec<&str> = body.iter().map(|r| r[idx].as_str()).collect();
        let (kind, mut role) = infer_column(&samples, hint.kind);
        if let Some(r) = hint.role {
            if !r.admits(kind) {
                return Err(IngestError::BadRoleHint { column: col_name.clone(), role: r, kind });
            }
            role = r;
        }
        columns.push(Column { name: col_name.clone(), kind, role });
    }
    // Only the first time column is the primary axis; later ones become dimensions.
    let mut seen_time = false;
    for col in &mut columns {
        if col.role == ColumnRole::Time {
            if seen_time {
                col.role = ColumnRole::Dimension;
            }
            seen_time = true;
        }
    }

    let mut rows = Vec::with_capacity(body.len());
    for (r, raw) in body.into_iter().enumerate() {
        let mut row = Vec::with_capacity(columns.len());
        for (cell, col) in raw.into_iter().zip(&columns) {
            let value = if col.kind == ValueKind::Text {
                Value::Text(cell)
            } else if cell.trim().is_empty() {
                Value::Null
            } else {
                Value::parse_as(&cell, col.kind).ok_or_else(|| IngestError::HintMismatch {
                    row: r,
                    column: col.name.clone(),
                    value: cell.clone(),
                    kind: col.kind,
                })?
            };
            row.push(value);
        }
        rows.push(row);
    }

    let mut dataset = Dataset {
        name: name.to_string(),
        schema: Schema { columns },
        rows,
        metadata: DatasetMetadata::default(),
        warnings,
    };
    let label = options.source_label.clone().unwrap_or_else(|| name.to_string());
    dataset.metadata = compute_metadata(&dataset, &label, options.ingested_at);
    Ok(dataset)
}

/// Case-insensitive uniqueness: later duplicates become `name_2`, `name_3`, ...
fn dedupe_names(raw: Vec<String>) -> (Vec<String>, Vec<IngestWarning>) {
    let mut out: Vec<String> = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    for (i, name) in raw.into_iter().enumerate() {
        let base = if name.trim().is_empty() {
            format!("col_{}", i + 1)
        } else {
            name.trim().to_string()
        };
        let taken = |n: &str, out: &[String]| out.iter().any(|o| o.eq_ignore_ascii_case(n));
        if !taken(&base, &out) {
            out.push(base);
            continue;
        }
        let mut suffix = 2;
        let renamed = loop {
            let candidate = format!("{base}_{suffix}");
            if !taken(&candidate, &out) {
                break candidate;
            }
            suffix += 1;
        };
        warnings.push(IngestWarning {
            column: renamed.clone(),
            message: format!("duplicate header {base:?} renamed to {renamed:?}"),
        });
        out.push(renamed);
    }
    (out, warnings)
}

/// Serialize with a header row; re-ingesting with the same delimiter yields the same rows.
pub fn to_csv(dataset: &Dataset, delimiter: char) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter as u8)
        .from_writer(Vec::new());
    writer
        .write_record(dataset.schema.columns.iter().map(|c| c.name.as_str()))
        .expect("writing to memory");
    for row in &dataset.rows {
        writer
            .write_record(row.iter().map(Value::to_csv_field))
            .expect("writing to memory");
    }
    writer.into_inner().expect("flush to memory")
}
