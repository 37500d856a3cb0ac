//! Plain-text renderings: class counts per row type, missing-value tables,
//! model performance tables and best-estimator summary lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rtdpa_core::metrics::{best_by, Metric, MetricsReport};
use rtdpa_core::preprocess::MissingReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Align {
    Left,
    Right,
}

/// Column-aligned text table with a rule under the header.
#[derive(Debug, Clone)]
pub struct TextTable {
    headers: Vec<String>,
    align: Vec<Align>,
    rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new<S: AsRef<str>>(headers: &[S], align: &[Align]) -> Self {
        assert_eq!(headers.len(), align.len());
        TextTable {
            headers: headers.iter().map(|h| h.as_ref().to_string()).collect(),
            align: align.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|j| {
                self.rows
                    .iter()
                    .map(|r| r[j].chars().count())
                    .chain([self.headers[j].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(j, c)| match self.align[j] {
                    Align::Left => format!("{c:<w$}", w = widths[j]),
                    Align::Right => format!("{c:>w$}", w = widths[j]),
                })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = String::new();
        out.push_str(&line(&self.headers));
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&rule.join("  "));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

/// `MM:SS.ffff`, with minutes growing past 59 when needed.
pub fn format_running_time(seconds: f64) -> String {
    let ticks = (seconds.max(0.0) * 1e4).round() as u64;
    let minutes = ticks / 600_000;
    let rest = ticks % 600_000;
    format!("{:02}:{:02}.{:04}", minutes, rest / 10_000, rest % 10_000)
}

/// Class counts per row type. The row type is printed on the first line of
/// its group only.
pub fn render_class_counts(
    counts: &BTreeMap<String, BTreeMap<u32, usize>>,
    class_names: &BTreeMap<u32, String>,
) -> String {
    let mut t = TextTable::new(&["Row Type", "Class", "Count"], &[Align::Left, Align::Left, Align::Right]);
    for (row_type, classes) in counts {
        for (i, (code, n)) in classes.iter().enumerate() {
            let name = class_names.get(code).cloned().unwrap_or_else(|| code.to_string());
            let first = if i == 0 { row_type.clone() } else { String::new() };
            t.push(vec![first, name, n.to_string()]);
        }
    }
    t.render()
}

/// Columns with at least one missing value, most missing first.
pub fn render_missing(title: &str, report: &MissingReport) -> String {
    let mut t = TextTable::new(
        &["Variable", "Total Missing", "% Missing"],
        &[Align::Left, Align::Right, Align::Right],
    );
    for e in report.sorted().into_iter().filter(|e| e.total_missing > 0) {
        t.push(vec![e.column.clone(), e.total_missing.to_string(), format!("{:.1}", e.pct_missing)]);
    }
    let mut out = format!("% of Missing Values for {title} ({} rows)\n", report.n_rows);
    if t.rows.is_empty() {
        out.push_str("no missing values\n");
    } else {
        out.push_str(&t.render());
    }
    out
}

pub const PERFORMANCE_COLUMNS: [&str; 9] = [
    "Classifier",
    "Train Accuracy",
    "Test Accuracy",
    "Precision",
    "Recall",
    "F1 Score",
    "ROC AUC",
    "Cohen's Kappa",
    "Running Time",
];

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn render_performance(title: &str, reports: &[MetricsReport]) -> String {
    let mut align = vec![Align::Right; PERFORMANCE_COLUMNS.len()];
    align[0] = Align::Left;
    let mut t = TextTable::new(&PERFORMANCE_COLUMNS, &align);
    for r in reports {
        t.push(vec![
            r.classifier.clone(),
            num(Some(r.train_accuracy)),
            num(Some(r.test_accuracy)),
            num(Some(r.precision)),
            num(Some(r.recall)),
            num(Some(r.f1)),
            num(r.roc_auc),
            num(Some(r.cohens_kappa)),
            r.running_time_seconds.map_or_else(|| "-".into(), format_running_time),
        ]);
    }
    format!("Model Performance for {title}\n{}", t.render())
}

/// One line per metric naming the best report.
pub fn best_estimator_lines(reports: &[MetricsReport]) -> Vec<String> {
    Metric::ALL
        .iter()
        .map(|&m| {
            let label = m.label();
            match best_by(reports, m) {
                Some(i) => {
                    let v = m.of(&reports[i]).expect("best_by only picks reports with a value");
                    let shown = if m == Metric::RunningTime { format_running_time(v) } else { format!("{v}") };
                    format!("Best estimator based on {label}: {} ({label}: {shown})", reports[i].classifier)
                }
                None => format!("Best estimator based on {label}: n/a"),
            }
        })
        .collect()
}

/// Performance tables and summary lines grouped by row type.
pub fn render_reports(reports: &[MetricsReport]) -> String {
    let mut groups: BTreeMap<&str, Vec<MetricsReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.row_type.as_str()).or_default().push(r.clone());
    }
    let mut out = String::new();
    for (i, (row_type, rs)) in groups.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_performance(row_type, rs));
        out.push('\n');
        for l in best_estimator_lines(rs) {
            let _ = writeln!(out, "{l}");
        }
    }
    out
}

pub fn json_lines<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str, test: f64, time: Option<f64>) -> MetricsReport {
        MetricsReport {
            classifier: name.into(),
            row_type: "personal".into(),
            train_accuracy: 1.0,
            test_accuracy: test,
            precision: 0.9892,
            recall: 0.9896,
            f1: 0.9892,
            roc_auc: Some(1.0),
            cohens_kappa: 0.9915,
            running_time_seconds: time,
        }
    }

    #[test]
    fn running_time_format() {
        assert_eq!(format_running_time(0.5796), "00:00.5796");
        assert_eq!(format_running_time(68.9367), "01:08.9367");
        assert_eq!(format_running_time(59.99999), "01:00.0000");
        assert_eq!(format_running_time(468.37), "07:48.3700");
    }

    #[test]
    fn performance_columns_in_order() {
        let text = render_performance("personal", &[report("Decision Tree", 0.9968, Some(0.5796))]);
        let header = text.lines().nth(1).unwrap();
        let mut last = 0;
        for c in PERFORMANCE_COLUMNS {
            let at = header.find(c).unwrap();
            assert!(at >= last);
            last = at;
        }
        assert!(text.contains("00:00.5796"));
        assert!(text.contains("0.9968"));
    }

    #[test]
    fn summary_lines() {
        let reports = [report("A", 0.99, Some(2.0)), report("B", 0.9989270386266095, Some(1.0))];
        let lines = best_estimator_lines(&reports);
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[1], "Best estimator based on Test Accuracy: B (Test Accuracy: 0.9989270386266095)");
        assert_eq!(lines[0], "Best estimator based on Train Accuracy: A (Train Accuracy: 1)");
        assert_eq!(lines[7], "Best estimator based on Running Time: B (Running Time: 00:01.0000)");
        let single = best_estimator_lines(&[report("Only", 0.5, None)]);
        assert!(single[..7].iter().all(|l| l.contains(": Only (")));
        assert!(single[7].ends_with("n/a"));
    }

    #[test]
    fn class_counts_group_rows() {
        let mut counts = BTreeMap::new();
        counts.insert("agriculture".to_string(), BTreeMap::from([(1, 17496), (2, 294)]));
        let names = BTreeMap::from([(1, "Standard".to_string()), (2, "Sub standard".to_string())]);
        let text = render_class_counts(&counts, &names);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[2].starts_with("agriculture  Standard"));
        assert!(lines[2].ends_with("17496"));
        assert!(lines[3].starts_with("             Sub standard"));
    }
}
