use std::io::Write;
use std::path::Path;

use super::dataset::{Category, Difficulty};
use super::score::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl ReportFormat {
    /// `.md` selects markdown, everything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("md") | Some("markdown") => ReportFormat::Markdown,
            _ => ReportFormat::Json,
        }
    }
}

pub fn render_json(reports: &[RunReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into())
}

/// One row per report; columns grouped as overall, search, category, difficulty.
pub fn render_markdown(reports: &[RunReport]) -> String {
    let mut head = vec!["Setting".to_string(), "Acc.".into(), "SR".into()];
    head.extend(Category::ALL.iter().map(|c| c.label().to_string()));
    head.extend(Difficulty::ALL.iter().map(|d| d.label().to_string()));
    let groups = format!(
        "| | Overall | Search | Category{} | Difficulty{} |",
        " |".repeat(Category::ALL.len() - 1),
        " |".repeat(Difficulty::ALL.len() - 1)
    );
    let mut out = String::new();
    out.push_str(&groups);
    out.push('\n');
    out.push_str(&format!("|{}|\n", vec!["---"; head.len()].join("|")));
    out.push_str(&format!("| {} |\n", head.join(" | ")));
    for r in reports {
        let mut row = vec![r.setting.clone(), cell(Some(r.accuracy)), cell(Some(r.sr))];
        row.extend(Category::ALL.iter().map(|c| cell(r.per_category.get(c).copied())));
        row.extend(Difficulty::ALL.iter().map(|d| cell(r.per_difficulty.get(d).copied())));
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

pub fn emit_report(reports: &[RunReport], format: ReportFormat, path: &Path) -> std::io::Result<()> {
    let text = match format {
        ReportFormat::Json => render_json(reports),
        ReportFormat::Markdown => render_markdown(reports),
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::score::{Quadrant, RunReport};
    use std::collections::BTreeMap;

    fn report(setting: &str) -> RunReport {
        RunReport {
            setting: setting.into(),
            total: 4,
            accuracy: 75.0,
            sr: 50.0,
            per_category: BTreeMap::from([(Category::Map, 66.666_666_7)]),
            per_difficulty: BTreeMap::from([(Difficulty::Hard, 100.0)]),
            tool_calls: BTreeMap::new(),
            round_histogram: BTreeMap::new(),
            quadrant: Quadrant::default(),
            unmatched: 0,
        }
    }

    #[test]
    fn json_round_trips_and_is_stable() {
        let reports = vec![report("rag"), report("par")];
        let a = render_json(&reports);
        assert_eq!(a, render_json(&reports));
        let back: Vec<RunReport> = serde_json::from_str(&a).unwrap();
        assert_eq!(back, reports);
    }

    #[test]
    fn markdown_has_one_row_per_setting() {
        let md = render_markdown(&[report("rag"), report("par")]);
        assert!(md.contains("| rag | 75.0 | 50.0 | - | - | 66.7 |"));
        assert_eq!(md.lines().filter(|l| l.starts_with("| par ")).count(), 1);
        assert_eq!(md.lines().count(), 5);
    }

    #[test]
    fn emit_writes_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.md"), dir.path().join("b.md"));
        emit_report(&[report("x")], ReportFormat::from_path(&a), &a).unwrap();
        emit_report(&[report("x")], ReportFormat::from_path(&b), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert!(emit_report(&[], ReportFormat::Json, &dir.path().join("no/such/x.json")).is_err());
    }
}
