//! Typed in-memory tables: values, schemas, ingestion, and the dataset registry.

mod dataset;
mod ingest;
mod registry;
mod value;

pub use dataset::{compute_metadata, Column, ColumnRole, Dataset, DatasetMetadata, IngestWarning, Schema};
pub use ingest::{infer_column, ingest_csv, ingest_json, to_csv, ColumnHint, IngestError, IngestOptions};
pub use registry::{DatasetLookup, DatasetRegistry, StoreSnapshot};
pub use value::{compare_values, format_timestamp, parse_iso_date, KeyValue, Value, ValueKind};
