//! Schema files and CSV ingestion.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rtdpa_core::dataset::{validate_schema, Cell, ColumnKind, ColumnRole, ColumnSpec, Dataset};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Declarative description of a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    /// Cell texts read as missing, besides the empty string.
    #[serde(default = "default_missing")]
    pub missing_values: Vec<String>,
    #[serde(default = "default_date_format")]
    pub date_format: String,
    /// Display names for target codes.
    #[serde(default)]
    pub class_names: BTreeMap<u32, String>,
}

fn default_missing() -> Vec<String> {
    vec!["NA".into(), "NaN".into(), "null".into()]
}

fn default_date_format() -> String {
    "%Y-%m-%d".into()
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Schema {
            columns,
            missing_values: default_missing(),
            date_format: default_date_format(),
            class_names: BTreeMap::new(),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> AppResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::parse(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> AppResult<()> {
    std::fs::write(path, bytes).map_err(|e| AppError::write(path, e))
}

pub fn load_schema(path: &Path) -> AppResult<Schema> {
    let schema: Schema = read_json(path)?;
    validate_schema(&schema.columns, false).map_err(|e| AppError::parse(path, e))?;
    Ok(schema)
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

pub fn parse_date(text: &str, format: &str) -> Option<i32> {
    let d = NaiveDate::parse_from_str(text, format).ok()?;
    i32::try_from((d - epoch()).num_days()).ok()
}

pub fn format_date(days: i32, format: &str) -> String {
    (epoch() + chrono::Duration::days(days as i64)).format(format).to_string()
}

fn parse_cell(text: &str, spec: &ColumnSpec, schema: &Schema) -> Result<Cell, String> {
    let t = text.trim();
    if t.is_empty() || schema.missing_values.iter().any(|m| m == t) {
        return Ok(Cell::Missing);
    }
    match spec.kind {
        ColumnKind::Numeric => match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Cell::Number(v)),
            _ => Err(format!("`{t}` is not a finite number")),
        },
        ColumnKind::Date => parse_date(t, &schema.date_format)
            .map(Cell::Date)
            .ok_or_else(|| format!("`{t}` does not match date format `{}`", schema.date_format)),
        ColumnKind::Categorical | ColumnKind::Identifier => Ok(Cell::Text(t.to_string())),
    }
}

/// Parses CSV text with a header row. Columns are matched by name; the
/// dataset keeps schema order.
pub fn parse_csv<R: Read>(reader: R, schema: &Schema, source: &Path) -> AppResult<Dataset> {
    parse_csv_with(reader, schema, source, false)
}

/// As [`parse_csv`], but a target column absent from the header is dropped
/// from the schema instead of being an error.
pub fn parse_csv_unlabeled<R: Read>(reader: R, schema: &Schema, source: &Path) -> AppResult<Dataset> {
    parse_csv_with(reader, schema, source, true)
}

fn parse_csv_with<R: Read>(reader: R, schema: &Schema, source: &Path, target_optional: bool) -> AppResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| AppError::parse(source, e))?.clone();
    if header.is_empty() {
        return Err(AppError::parse(source, "empty file"));
    }
    let mut schema = schema.clone();
    if target_optional {
        schema
            .columns
            .retain(|c| c.role != ColumnRole::Target || header.iter().any(|h| h.trim() == c.name));
    }
    let schema = &schema;
    let mut positions = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let pos = header
            .iter()
            .position(|h| h.trim() == c.name)
            .ok_or_else(|| AppError::parse(source, format!("header is missing column `{}`", c.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| !schema.columns.iter().any(|c| c.name == h.trim())) {
        return Err(AppError::parse(source, format!("column `{extra}` is not in the schema")));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| AppError::parse(source, e))?;
        let line = i + 2;
        let mut row = Vec::with_capacity(schema.columns.len());
        for (spec, &pos) in schema.columns.iter().zip(&positions) {
            let text = record.get(pos).unwrap_or("");
            let cell = parse_cell(text, spec, schema)
                .map_err(|m| AppError::parse(source, format!("line {line}, column `{}`: {m}", spec.name)))?;
            row.push(cell);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(AppError::parse(source, "no data rows"));
    }
    Dataset::new(schema.columns.clone(), rows).map_err(|e| AppError::parse(source, e))
}

pub fn load_csv(path: &Path, schema: &Schema) -> AppResult<Dataset> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_csv(std::io::BufReader::new(file), schema, path)
}

pub fn load_csv_unlabeled(path: &Path, schema: &Schema) -> AppResult<Dataset> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_csv_unlabeled(std::io::BufReader::new(file), schema, path)
}

pub fn cell_text(cell: &Cell, date_format: &str) -> String {
    match cell {
        Cell::Number(v) => format!("{v}"),
        Cell::Text(s) => s.clone(),
        Cell::Date(d) => format_date(*d, date_format),
        Cell::Missing => String::new(),
    }
}

pub fn write_csv<W: Write>(d: &Dataset, date_format: &str, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(d.schema().iter().map(|c| c.name.as_str()))?;
    for row in d.rows() {
        w.write_record(row.iter().map(|c| cell_text(c, date_format)))?;
    }
    w.flush()?;
    Ok(())
}
