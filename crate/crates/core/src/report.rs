//! Result tables and their CSV, JSON and SVG renderings.
//!
//! Numbers are rounded to six significant digits when they enter a table,
//! so every rendering is byte-stable and JSON parses back to the same value.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 6;

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn num(v: f64) -> Cell {
        Cell::Num(round_sig(v))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => format_num(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

fn format_num(v: f64) -> String {
    if v.is_finite() && v != 0.0 && (v.abs() >= 1e15 || v.abs() < 1e-4) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Cell {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Cell {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Cell {
        i64::try_from(v).map(Cell::Int).unwrap_or_else(|_| Cell::num(v as f64))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::from(v as u64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Cell {
        Cell::Int(i64::from(v))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    /// `name [unit]`, or the bare name when dimensionless.
    pub fn header(&self) -> String {
        if self.unit == "-" {
            self.name.clone()
        } else {
            format!("{} [{}]", self.name, self.unit)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// `columns` are (name, unit) pairs; use `"-"` for dimensionless values.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Table {
        Table {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Cell in `column` of the first row whose first cell renders as `key`.
    pub fn lookup(&self, key: &str, column: &str) -> Option<&Cell> {
        let c = self.column_index(column)?;
        self.rows.iter().find(|r| r[0].render() == key).map(|r| &r[c])
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<String> = self.columns.iter().map(Column::header).collect();
        w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(|e| Error::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Grouped bars: one group per row of `table`, one bar per value column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chart {
    pub name: String,
    pub title: String,
    pub table: String,
    pub label_column: String,
    pub value_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub metadata: Metadata,
    pub tables: Vec<Table>,
    #[serde(default)]
    pub charts: Vec<Chart>,
}

impl Report {
    pub fn new(experiment: &str, metadata: Metadata) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            metadata,
            tables: Vec::new(),
            charts: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Report> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::config("output.formats", format!("unknown format `{other}`"))),
        }
    }
}

/// Writes the report into `dir` and returns the files written, in order.
pub fn emit_report(report: &Report, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    if report.tables.is_empty() {
        return Err(Error::Empty("report"));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        written.push(path);
        Ok(())
    };
    let stem = &report.experiment;
    if formats.contains(&Format::Csv) {
        for t in &report.tables {
            write(format!("{stem}_{}.csv", t.name), t.to_csv()?)?;
        }
    }
    if formats.contains(&Format::Json) {
        write(format!("{stem}.json"), report.to_json()?)?;
    }
    if formats.contains(&Format::Svg) {
        for c in &report.charts {
            let table = report
                .table(&c.table)
                .ok_or_else(|| Error::Parse(format!("chart {} refers to missing table {}", c.name, c.table)))?;
            write(format!("{stem}_{}.svg", c.name), render_svg(c, table)?)?;
        }
    }
    Ok(written)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(chart: &Chart, table: &Table) -> Result<String> {
    let label_col = table
        .column_index(&chart.label_column)
        .ok_or_else(|| Error::Parse(format!("no column {}", chart.label_column)))?;
    let value_cols = chart
        .value_columns
        .iter()
        .map(|c| table.column_index(c).ok_or_else(|| Error::Parse(format!("no column {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let groups: Vec<(String, Vec<f64>)> = table
        .rows
        .iter()
        .map(|r| {
            let vals = value_cols.iter().map(|&c| r[c].as_f64().unwrap_or(0.0)).collect();
            (r[label_col].render(), vals)
        })
        .collect();
    let max = groups
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    let bar_w = 18.0;
    let gap = 24.0;
    let group_w = bar_w * value_cols.len() as f64 + gap;
    let (left, top, plot_h) = (60.0, 40.0, 240.0);
    let width = left + group_w * groups.len() as f64 + 20.0;
    let legend_y = top + plot_h + 50.0;
    let height = legend_y + 20.0 * value_cols.len() as f64 + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(&chart.title));
    let base = top + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"#,
        width - 20.0
    );
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
        left - 4.0,
        top + 4.0,
        format_num(round_sig(max))
    );
    for (gi, (label, vals)) in groups.iter().enumerate() {
        let gx = left + gap / 2.0 + gi as f64 * group_w;
        for (vi, v) in vals.iter().enumerate() {
            let h = (v.max(0.0) / max) * plot_h;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar_w}" height="{:.1}" fill="{}"/>"#,
                gx + vi as f64 * bar_w,
                base - h,
                h,
                PALETTE[vi % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + bar_w * vals.len() as f64 / 2.0,
            base + 16.0,
            escape(label)
        );
    }
    for (vi, name) in chart.value_columns.iter().enumerate() {
        let y = legend_y + 20.0 * vi as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[vi % PALETTE.len()],
            left + 18.0,
            y,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new(
            "demo",
            Metadata {
                config_hash: "abc".into(),
                tool_version: "0.1.0".into(),
                timestamp_unix: 0,
            },
        );
        let mut t = Table::new("stages", &[("stage", "-"), ("delay", "ms"), ("ops", "-")]);
        t.push(vec!["S1".into(), (1.0 / 3.0).into(), 12u64.into()]);
        t.push(vec!["S2, systolic".into(), 2.5e-9.into(), 0u64.into()]);
        r.tables.push(t);
        r.charts.push(Chart {
            name: "delays".into(),
            title: "Stage <delay>".into(),
            table: "stages".into(),
            label_column: "stage".into(),
            value_columns: vec!["delay".into()],
        });
        r
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333);
        assert_eq!(round_sig(123456789.0), 123457000.0);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn csv_has_units_and_quotes() {
        let csv = sample().tables[0].to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("stage,delay [ms],ops"));
        assert_eq!(lines.next(), Some("S1,0.333333,12"));
        assert_eq!(lines.next(), Some("\"S2, systolic\",2.5e-9,0"));
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back = Report::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn svg_escapes_title() {
        let r = sample();
        let svg = render_svg(&r.charts[0], &r.tables[0]).unwrap();
        assert!(svg.contains("Stage &lt;delay&gt;"));
        assert_eq!(svg.matches("<rect").count(), 2 + 1);
    }

    #[test]
    fn emits_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&sample(), &[Format::Csv, Format::Json, Format::Svg], dir.path()).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["demo_stages.csv", "demo.json", "demo_delays.svg"]);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
