//! Aligned-column markdown renderings of eval reports.

use super::{Category, EvalReport, Metrics};

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}%"))
}

fn column_title(r: &EvalReport, all: &[&EvalReport]) -> String {
    let seeds_differ = all.iter().any(|o| o.seed != r.seed);
    if seeds_differ {
        format!("{} (seed {})", r.variant, r.seed)
    } else {
        r.variant.clone()
    }
}

fn aligned(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        format!("| {} |", padded.join(" | "))
    };
    let mut out = line(&header);
    out.push('\n');
    let rule: Vec<String> = width
        .iter()
        .enumerate()
        .map(|(i, w)| if i == 0 { format!(":{}", "-".repeat((*w).max(1) - 1)) } else { format!("{}:", "-".repeat((*w).max(1) - 1)) })
        .collect();
    out.push_str(&format!("| {} |\n", rule.join(" | ")));
    for row in &rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Hallucination rate per category (rows) and configuration (columns).
pub fn markdown_category_table(reports: &[&EvalReport]) -> String {
    let mut header = vec!["Category".to_string()];
    header.extend(reports.iter().map(|r| column_title(r, reports)));
    let mut rows = Vec::new();
    for cat in Category::ALL {
        if !reports.iter().any(|r| r.per_category.contains_key(&cat)) {
            continue;
        }
        let mut row = vec![cat.label().to_string()];
        row.extend(
            reports
                .iter()
                .map(|r| pct(r.per_category.get(&cat).and_then(|m| m.hallucination_rate))),
        );
        rows.push(row);
    }
    let mut row = vec!["Overall".to_string()];
    row.extend(reports.iter().map(|r| pct(r.overall.hallucination_rate)));
    rows.push(row);
    aligned(header, rows)
}

/// The four rates (rows) per configuration (columns).
pub fn markdown_metrics_table(reports: &[&EvalReport]) -> String {
    let mut header = vec!["Metric".to_string()];
    header.extend(reports.iter().map(|r| column_title(r, reports)));
    let pick: [(&str, fn(&Metrics) -> Option<f64>); 4] = [
        ("Hallucination Rate", |m| m.hallucination_rate),
        ("Accuracy", |m| m.accuracy),
        ("Precision", |m| m.precision),
        ("Recall", |m| m.recall),
    ];
    let rows = pick
        .iter()
        .map(|(label, f)| {
            let mut row = vec![label.to_string()];
            row.extend(reports.iter().map(|r| pct(f(&r.overall))));
            row
        })
        .collect();
    aligned(header, rows)
}
