use serde::{Deserialize, Serialize};

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub modality: String,
    pub target: String,
    pub settings: String,
    pub params: usize,
    pub epoch_seconds: f64,
    pub auc: f64,
    #[serde(rename = "c@1")]
    pub c1: Option<f64>,
    #[serde(rename = "c@3")]
    pub c3: Option<f64>,
    #[serde(rename = "c@5")]
    pub c5: Option<f64>,
}

/// Parameter count in millions: two decimals below one million, one
/// decimal above, trailing zeros dropped.
pub fn format_params(n: usize) -> String {
    let m = n as f64 / 1e6;
    if n > 0 && m < 0.005 {
        return "<0.01M".to_string();
    }
    let s = if m < 1.0 { format!("{m:.2}") } else { format!("{m:.1}") };
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    format!("{s}M")
}

fn format_seconds(s: f64) -> String {
    if s < 10.0 {
        format!("{s:.1}s")
    } else {
        format!("{s:.0}s")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Aligned text table, rows in the given order.
pub fn report_table(rows: &[ReportRow]) -> String {
    let header = ["Modality", "Target", "Settings", "Params", "Time", "AUC", "C@1", "C@3", "C@5"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        cells.push(vec![
            r.modality.clone(),
            r.target.clone(),
            r.settings.clone(),
            format_params(r.params),
            format_seconds(r.epoch_seconds),
            format!("{:.3}", r.auc),
            opt(r.c1),
            opt(r.c3),
            opt(r.c5),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, &w))| if c < 3 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
