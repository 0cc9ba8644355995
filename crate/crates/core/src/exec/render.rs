use serde::Serialize;

use super::ResultTable;
use crate::plan::{ChartKind, OutputFormat, OutputSpec};
use crate::store::{ColumnRole, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("result shape does not fit the requested output: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartX {
    pub name: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSeries {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub x: ChartX,
    pub series: Vec<ChartSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum RenderedAnswer {
    Scalar { name: String, value: Value },
    Table { table: ResultTable, display: Vec<Vec<String>> },
    Chart { chart: ChartSpec },
}

impl RenderedAnswer {
    pub fn chart(&self) -> Option<&ChartSpec> {
        match self {
            RenderedAnswer::Chart { chart } => Some(chart),
            _ => None,
        }
    }
}

pub fn render_output(result: &ResultTable, spec: &OutputSpec) -> Result<RenderedAnswer, RenderError> {
    match spec.format {
        OutputFormat::Scalar => {
            if result.columns.len() != 1 || result.rows.len() != 1 {
                return Err(RenderError::ShapeMismatch(format!(
                    "scalar needs 1x1, result is {}x{}",
                    result.rows.len(),
                    result.columns.len()
                )));
            }
            Ok(RenderedAnswer::Scalar {
                name: result.columns[0].name.clone(),
                value: result.rows[0][0].clone(),
            })
        }
        OutputFormat::Table => Ok(RenderedAnswer::Table {
            table: result.clone(),
            display: result.rows.iter().map(|r| r.iter().map(Value::display).collect()).collect(),
        }),
        OutputFormat::Chart => {
            let x = result
                .columns
                .iter()
                .position(|c| c.role != ColumnRole::Measure)
                .ok_or_else(|| RenderError::ShapeMismatch("chart needs a dimension column".into()))?;
            let series: Vec<ChartSeries> = result
                .columns
                .iter()
                .enumerate()
                .filter(|(i, c)| *i != x && c.role == ColumnRole::Measure && c.kind.is_numeric())
                .map(|(i, c)| ChartSeries {
                    name: c.name.clone(),
                    values: result.rows.iter().map(|r| r[i].as_f64()).collect(),
                })
                .collect();
            if series.is_empty() {
                return Err(RenderError::ShapeMismatch("chart needs a numeric column".into()));
            }
            Ok(RenderedAnswer::Chart {
                chart: ChartSpec {
                    kind: spec.chart_kind.unwrap_or(ChartKind::Bar),
                    x: ChartX {
                        name: result.columns[x].name.clone(),
                        values: result.rows.iter().map(|r| r[x].clone()).collect(),
                    },
                    series,
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{Column, ValueKind};

    fn col(name: &str, kind: ValueKind, role: ColumnRole) -> Column {
        Column { name: name.into(), kind, role }
    }

    #[test]
    fn figure_style_table_display() {
        let rows = [("New York", 84.05), ("Houston", 72.49), ("Chicago", 33.45), ("Los Angeles", 13.19), ("Phoenix", -2.44)];
        let table = ResultTable {
            columns: vec![
                col("location", ValueKind::Text, ColumnRole::Dimension),
                col("avg_price_change", ValueKind::Float, ColumnRole::Measure),
            ],
            rows: rows.iter().map(|(l, v)| vec![Value::Text(l.to_string()), Value::Float(*v)]).collect(),
        };
        let RenderedAnswer::Table { display, .. } = render_output(&table, &OutputSpec::default()).unwrap() else {
            panic!("expected a table");
        };
        assert_eq!(display.len(), 5);
        assert_eq!(display[0], ["New York", "84.05"]);
        assert_eq!(display[4], ["Phoenix", "-2.44"]);
    }

    #[test]
    fn scalar_needs_one_cell() {
        let one = ResultTable {
            columns: vec![col("n", ValueKind::Integer, ColumnRole::Measure)],
            rows: vec![vec![Value::Int(7)]],
        };
        let spec = OutputSpec { format: OutputFormat::Scalar, chart_kind: None };
        assert_eq!(
            render_output(&one, &spec).unwrap(),
            RenderedAnswer::Scalar { name: "n".into(), value: Value::Int(7) }
        );
        let mut two = one.clone();
        two.rows.push(vec![Value::Int(8)]);
        assert!(render_output(&two, &spec).is_err());
    }

    #[test]
    fn chart_without_numeric_column_fails() {
        let t = ResultTable {
            columns: vec![col("country", ValueKind::Text, ColumnRole::Dimension)],
            rows: vec![vec![Value::Text("US".into())]],
        };
        let spec = OutputSpec { format: OutputFormat::Chart, chart_kind: Some(ChartKind::Pie) };
        assert!(matches!(render_output(&t, &spec), Err(RenderError::ShapeMismatch(_))));
    }
}
