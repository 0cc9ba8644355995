use crate::exec::ResultTable;
use crate::store::{ColumnRole, Value};

const MAX_ROWS: usize = 12;

fn show(v: &Value) -> String {
    if v.is_null() {
        "no value".into()
    } else {
        v.display()
    }
}

/// Deterministic prose built only from the result's own names and display values.
pub fn template_narration(result: &ResultTable) -> String {
    if result.rows.is_empty() {
        return "the query returned no rows.".into();
    }
    let dims: Vec<usize> = (0..result.columns.len())
        .filter(|&i| result.columns[i].role != ColumnRole::Measure)
        .collect();
    let measures: Vec<usize> = (0..result.columns.len())
        .filter(|&i| result.columns[i].role == ColumnRole::Measure)
        .collect();

    if dims.is_empty() {
        let row = &result.rows[0];
        let parts: Vec<String> = measures
            .iter()
            .map(|&i| format!("{}: {}", result.columns[i].name, show(&row[i])))
            .collect();
        let mut text = parts.join(", ");
        if result.rows.len() > 1 {
            text.push_str(" (first row shown)");
        }
        text.push('.');
        return text;
    }

    let names = |idx: &[usize]| idx.iter().map(|&i| result.columns[i].name.as_str()).collect::<Vec<_>>().join(", ");
    let head = if measures.is_empty() {
        format!("{} values", names(&dims))
    } else {
        format!("{} by {}", names(&measures), names(&dims))
    };
    let rows: Vec<String> = result
        .rows
        .iter()
        .take(MAX_ROWS)
        .map(|row| {
            let key = dims.iter().map(|&i| show(&row[i])).collect::<Vec<_>>().join(" / ");
            if measures.is_empty() {
                key
            } else if measures.len() == 1 {
                format!("{key}: {}", show(&row[measures[0]]))
            } else {
                let vals: Vec<String> = measures
                    .iter()
                    .map(|&i| format!("{} {}", result.columns[i].name, show(&row[i])))
                    .collect();
                format!("{key}: {}", vals.join(", "))
            }
        })
        .collect();
    let mut text = format!("{head}: {}", rows.join("; "));
    if result.rows.len() > MAX_ROWS {
        text.push_str("; remaining rows omitted");
    }
    text.push('.');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{Column, ValueKind};

    #[test]
    fn grouped_sentence() {
        let t = ResultTable {
            columns: vec![
                Column { name: "location".into(), kind: ValueKind::Text, role: ColumnRole::Dimension },
                Column { name: "avg_change".into(), kind: ValueKind::Float, role: ColumnRole::Measure },
            ],
            rows: vec![
                vec![Value::Text("New York".into()), Value::Float(84.05)],
                vec![Value::Text("Phoenix".into()), Value::Float(-2.44)],
            ],
        };
        assert_eq!(template_narration(&t), "avg_change by location: New York: 84.05; Phoenix: -2.44.");
    }

    #[test]
    fn scalar_sentence() {
        let t = ResultTable {
            columns: vec![Column { name: "total_users".into(), kind: ValueKind::Integer, role: ColumnRole::Measure }],
            rows: vec![vec![Value::Int(1234)]],
        };
        assert_eq!(template_narration(&t), "total_users: 1234.");
    }
}
