//! Table-style report generation: pivots result rows into a
//! (dataset × scenario × clients) grid with one column per training method.

use std::collections::BTreeMap;
use std::time::SystemTime;

use flbench_core::error::{Error, Result};

use crate::experiment::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

const METHOD_COLUMNS: [&str; 6] = ["central", "local", "fedavg", "fedprox", "qfedavg", "fedyogi"];

/// Loads result rows matching a glob pattern. Duplicate
/// (dataset, scenario, clients, method) combinations keep the newest file by
/// modification time; a warning per discarded duplicate goes to stderr.
pub fn load_rows(pattern: &str) -> Result<Vec<ResultRow>> {
    let entries =
        glob::glob(pattern).map_err(|e| Error::Config(format!("bad glob pattern: {e}")))?;
    let mut newest: BTreeMap<(String, String, usize, String), (SystemTime, ResultRow)> =
        BTreeMap::new();
    let mut found = false;
    for entry in entries {
        let path = entry.map_err(|e| Error::Data(e.to_string()))?;
        if !path.is_file() {
            continue;
        }
        found = true;
        let text = std::fs::read_to_string(&path)?;
        let row: ResultRow = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mtime = std::fs::metadata(&path)?.modified()?;
        let key = (
            row.dataset.clone(),
            row.scenario.clone(),
            row.clients,
            row.method.clone(),
        );
        match newest.get(&key) {
            Some((existing, _)) if *existing >= mtime => {
                eprintln!(
                    "warning: duplicate result for {}/{}/K={}/{} — keeping the newer file",
                    key.0, key.1, key.2, key.3
                );
            }
            Some(_) => {
                eprintln!(
                    "warning: duplicate result for {}/{}/K={}/{} — keeping the newer file",
                    key.0, key.1, key.2, key.3
                );
                newest.insert(key, (mtime, row));
            }
            None => {
                newest.insert(key, (mtime, row));
            }
        }
    }
    if !found {
        return Err(Error::Data(format!("no result files match {pattern:?}")));
    }
    Ok(newest.into_values().map(|(_, row)| row).collect())
}

/// Pivots rows into the report grid and renders it.
pub fn render_report(rows: &[ResultRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Data("no result rows to report".into()));
    }
    // (dataset, scenario, clients) -> method -> fbeta
    let mut grid: BTreeMap<(String, String, usize), BTreeMap<String, f64>> = BTreeMap::new();
    for row in rows {
        grid.entry((row.dataset.clone(), row.scenario.clone(), row.clients))
            .or_default()
            .insert(row.method.clone(), row.fbeta);
    }

    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["dataset".into(), "scenario".into(), "clients".into()];
    header.extend(METHOD_COLUMNS.iter().map(|m| m.to_string()));
    lines.push(header);
    for ((dataset, scenario, clients), methods) in &grid {
        let mut line = vec![dataset.clone(), scenario.clone(), clients.to_string()];
        for m in METHOD_COLUMNS {
            line.push(
                methods
                    .get(m)
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_default(),
            );
        }
        lines.push(line);
    }

    Ok(match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            for line in &lines {
                out.push_str(&line.join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Text => {
            let widths: Vec<usize> = (0..lines[0].len())
                .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for line in &lines {
                let rendered: Vec<String> = line
                    .iter()
                    .enumerate()
                    .map(|(c, cell)| format!("{cell:>width$}", width = widths[c]))
                    .collect();
                out.push_str(rendered.join("  ").trim_end());
                out.push('\n');
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scenario: &str, clients: usize, method: &str, fbeta: f64) -> ResultRow {
        ResultRow {
            dataset: "ai4i2020".into(),
            scenario: scenario.into(),
            clients,
            method: method.into(),
            fbeta,
            fairness: 1.9,
            best_round: 7,
            seed: 1,
            config_hash: "h".into(),
        }
    }

    #[test]
    fn pivot_produces_one_row_per_scenario_and_k() {
        let rows = vec![
            row("iid", 5, "fedavg", 0.93),
            row("iid", 5, "fedprox", 0.93),
            row("iid", 10, "fedavg", 0.77),
            row("iid", 10, "fedprox", 0.78),
            row("iid", 15, "fedavg", 0.75),
            row("iid", 15, "fedprox", 0.75),
        ];
        let csv = render_report(&rows, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4); // header + 3 K rows
        assert!(lines[0].starts_with("dataset,scenario,clients,central,local,fedavg"));
        assert!(lines[1].contains("ai4i2020,iid,5,,,0.9300,0.9300,,"));
    }

    #[test]
    fn text_format_aligns_columns() {
        let rows = vec![row("iid", 5, "central", 0.95)];
        let text = render_report(&rows, ReportFormat::Text).unwrap();
        assert!(text.lines().count() == 2);
        assert!(text.contains("central"));
        assert!(text.contains("0.9500"));
    }

    #[test]
    fn empty_rows_error() {
        assert!(render_report(&[], ReportFormat::Csv).is_err());
    }
}
