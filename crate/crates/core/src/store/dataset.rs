use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::value::{format_timestamp, Value, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Dimension,
    Measure,
    Time,
}

impl ColumnRole {
    /// Default role for an inferred kind.
    pub fn for_kind(kind: ValueKind) -> ColumnRole {
        if kind.is_temporal() {
            ColumnRole::Time
        } else if kind.is_numeric() {
            ColumnRole::Measure
        } else {
            ColumnRole::Dimension
        }
    }

    /// Whether a column of `kind` may carry this role.
    pub fn admits(self, kind: ValueKind) -> bool {
        match self {
            ColumnRole::Measure => kind.is_numeric(),
            ColumnRole::Time => kind.is_temporal(),
            ColumnRole::Dimension => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ValueKind,
    pub role: ColumnRole,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
}

impl Schema {
    /// Case-insensitive column lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.index_of(name).map(|i| &self.columns[i])
    }

    /// The primary time axis: the first column with role `time`.
    pub fn primary_time(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.role == ColumnRole::Time)
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub source_label: String,
    /// Inclusive `[min, max]` calendar coverage of the primary time column.
    pub time_coverage: Option<(NaiveDate, NaiveDate)>,
    pub row_count: usize,
    /// UTC seconds.
    pub ingested_at: i64,
}

impl DatasetMetadata {
    pub fn ingested_at_rfc3339(&self) -> String {
        format_timestamp(self.ingested_at)
    }
}

/// Recorded when ingestion had to adjust input, e.g. renaming duplicate headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub column: String,
    pub message: String,
}

/// An immutable in-memory table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub schema: Schema,
    pub rows: Vec<Vec<Value>>,
    pub metadata: DatasetMetadata,
    pub warnings: Vec<IngestWarning>,
}

impl Dataset {
    /// Assemble a dataset from already-typed rows, checking arity and cell kinds.
    pub fn from_rows(
        name: impl Into<String>,
        schema: Schema,
        rows: Vec<Vec<Value>>,
        source_label: impl Into<String>,
        ingested_at: i64,
    ) -> Result<Dataset, String> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.arity() {
                return Err(format!(
                    "row {i} has {} cells, schema has {}",
                    row.len(),
                    schema.arity()
                ));
            }
            for (cell, col) in row.iter().zip(&schema.columns) {
                if let Some(k) = cell.kind() {
                    if k != col.kind {
                        return Err(format!(
                            "row {i} column {} holds {k}, expected {}",
                            col.name, col.kind
                        ));
                    }
                }
            }
        }
        for col in &schema.columns {
            if !col.role.admits(col.kind) {
                return Err(format!("column {} cannot be {:?} with kind {}", col.name, col.role, col.kind));
            }
        }
        let mut ds = Dataset {
            name: name.into(),
            schema,
            rows,
            metadata: DatasetMetadata::default(),
            warnings: Vec::new(),
        };
        ds.metadata = compute_metadata(&ds, &source_label.into(), ingested_at);
        Ok(ds)
    }

    pub fn with_metadata(mut self, source_label: &str, now: i64) -> Dataset {
        self.metadata = compute_metadata(&self, source_label, now);
        self
    }

    pub fn column_values(&self, index: usize) -> impl Iterator<Item = &Value> {
        self.rows.iter().map(move |r| &r[index])
    }
}

/// Row count plus the calendar coverage of the primary time column (nulls ignored).
pub fn compute_metadata(dataset: &Dataset, source_label: &str, now: i64) -> DatasetMetadata {
    let time_coverage = dataset.schema.primary_time().and_then(|idx| {
        dataset
            .column_values(idx)
            .filter_map(Value::as_date)
            .fold(None, |acc: Option<(NaiveDate, NaiveDate)>, d| match acc {
                None => Some((d, d)),
                Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
            })
    });
    DatasetMetadata {
        source_label: source_label.to_string(),
        time_coverage,
        row_count: dataset.rows.len(),
        ingested_at: now,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> Value {
        Value::Date(NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap())
    }

    fn timed(cells: Vec<Value>) -> Dataset {
        let schema = Schema {
            columns: vec![Column { name: "day".into(), kind: ValueKind::Date, role: ColumnRole::Time }],
        };
        Dataset::from_rows("t", schema, cells.into_iter().map(|c| vec![c]).collect(), "src", 0).unwrap()
    }

    #[test]
    fn coverage_is_min_max_of_time_column() {
        let ds = timed(vec![date("2017-06-30"), Value::Null, date("2017-01-03")]);
        let (lo, hi) = ds.metadata.time_coverage.unwrap();
        assert_eq!(lo.to_string(), "2017-01-03");
        assert_eq!(hi.to_string(), "2017-06-30");
        assert_eq!(ds.metadata.row_count, 3);
    }

    #[test]
    fn all_null_time_column_has_no_coverage() {
        let ds = timed(vec![Value::Null, Value::Null]);
        assert_eq!(ds.metadata.time_coverage, None);
    }

    #[test]
    fn no_time_column_has_no_coverage() {
        let schema = Schema {
            columns: vec![Column { name: "n".into(), kind: ValueKind::Integer, role: ColumnRole::Measure }],
        };
        let ds = Dataset::from_rows("t", schema, vec![vec![Value::Int(1)]], "src", 0).unwrap();
        assert_eq!(ds.metadata.time_coverage, None);
    }

    #[test]
    fn from_rows_rejects_kind_mismatch() {
        let schema = Schema {
            columns: vec![Column { name: "n".into(), kind: ValueKind::Integer, role: ColumnRole::Measure }],
        };
        assert!(Dataset::from_rows("t", schema, vec![vec![Value::Text("x".into())]], "s", 0).is_err());
    }
}
