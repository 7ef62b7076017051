use serde::{Deserialize, Serialize};

use super::{ErrorCategory, ErrorDistribution, ResultsTable, SweepRow};

/// Placeholder for cells without a complete result.
pub const INCOMPLETE: &str = "—";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!(
                "unknown report format {other:?} (expected csv or markdown)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Technique whose pass@1 is the baseline for relative deltas in the
    /// markdown table.
    pub relative_to: Option<String>,
}

/// Relative change from `base` to `value` in percent; `None` when the
/// baseline is zero.
pub fn relative_delta(base: f64, value: f64) -> Option<f64> {
    (base != 0.0).then(|| 100.0 * (value - base) / base)
}

fn ordered_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn fmt1(v: Option<f64>) -> String {
    v.map_or_else(|| INCOMPLETE.to_string(), |v| format!("{v:.1}"))
}

/// Renders the table. Markdown has one row per technique and one column per
/// model, in first-appearance order; CSV has one row per cell.
pub fn emit_report(table: &ResultsTable, format: ReportFormat, options: &ReportOptions) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["technique", "model", "solved", "total", "pass1"])
                .expect("in-memory write");
            for c in &table.cells {
                w.write_record([
                    c.technique.clone(),
                    c.model.clone(),
                    c.solved.to_string(),
                    c.total.to_string(),
                    fmt1(c.pass1()),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
        }
        ReportFormat::Markdown => {
            let techniques = ordered_unique(table.cells.iter().map(|c| c.technique.as_str()));
            let models = ordered_unique(table.cells.iter().map(|c| c.model.as_str()));
            let mut out = format!("| Inference technique | {} |\n", models.join(" | "));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(models.len())));
            for t in &techniques {
                let cells: Vec<String> = models
                    .iter()
                    .map(|m| {
                        let Some(v) = table.cell(t, m).and_then(|c| c.pass1()) else {
                            return INCOMPLETE.to_string();
                        };
                        let base = options
                            .relative_to
                            .as_deref()
                            .filter(|b| b != t)
                            .and_then(|b| table.cell(b, m))
                            .and_then(|c| c.pass1())
                            .and_then(|b| relative_delta(b, v));
                        match base {
                            Some(d) => format!("{v:.1} ({d:+.1}%)"),
                            None => format!("{v:.1}"),
                        }
                    })
                    .collect();
                out.push_str(&format!("| {t} | {} |\n", cells.join(" | ")));
            }
            out
        }
    }
}

/// Markdown table of a parameter sweep.
pub fn sweep_markdown(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("| {param} | pass@1 |\n|---:|---:|\n");
    for r in rows {
        out.push_str(&format!("| {} | {} |\n", r.value, fmt1(r.cell.pass1())));
    }
    out
}

/// Markdown table of error percentages, one row per model.
pub fn error_markdown(dist: &ErrorDistribution) -> String {
    let labels: Vec<&str> = ErrorCategory::ALL.iter().map(|c| c.label()).collect();
    let mut out = format!("| Model | {} | Accepted |\n", labels.join(" | "));
    out.push_str(&format!("|---|{}---:|\n", "---:|".repeat(labels.len())));
    for m in &dist.models {
        let cells: Vec<String> = ErrorCategory::ALL
            .iter()
            .map(|&c| format!("{:.2}", m.percent(c)))
            .collect();
        out.push_str(&format!(
            "| {} | {} | {:.2} |\n",
            m.model,
            cells.join(" | "),
            m.accepted
        ));
    }
    out
}
