//! CSV persistence and synthetic data.
//!
//! Files have a header line of column names and one row per line. Floats are
//! written in shortest round-trip form and always carry a `.` or exponent, so
//! a reload is bit-exact.

mod gen;

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Column, ColumnData, ColumnTable, DataType, Scalar};

pub use gen::{
    adversarial_dataset, generate_lineitem, generate_part, lineitem_schema, part_schema,
    Adversarial, GenSpec, LINEITEM_BASE_ROWS, PART_BASE_ROWS,
};

fn format_scalar(s: &Scalar) -> String {
    match s {
        Scalar::Int(v) => v.to_string(),
        Scalar::Float(v) => format!("{v:?}"),
        Scalar::Text(v) => v.clone(),
    }
}

pub fn save_csv(table: &ColumnTable, path: &Path) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Invariant(format!("csv writer: {other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(table.columns().iter().map(|c| c.name.as_str()))
        .map_err(io)?;
    for row in 0..table.row_count() {
        w.write_record(table.columns().iter().map(|c| format_scalar(&c.data.get(row))))
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_cell(ty: DataType, cell: &str) -> std::result::Result<Scalar, String> {
    match ty {
        DataType::Int64 => cell
            .parse()
            .map(Scalar::Int)
            .map_err(|_| format!("`{cell}` is not an integer")),
        DataType::Float64 => match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Scalar::Float(v)),
            _ => Err(format!("`{cell}` is not a finite float")),
        },
        DataType::Text => Ok(Scalar::Text(cell.to_string())),
    }
}

/// Header names and (line number, record) pairs.
type Records = (Vec<String>, Vec<(u64, csv::StringRecord)>);

fn read_records(path: &Path) -> Result<Records> {
    let load = |line: u64, message: String| Error::Load {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(e) => Error::io(path, e),
            other => load(1, format!("{other:?}")),
        })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| load(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            load(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(load(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        records.push((line, record));
    }
    Ok((header, records))
}

fn table_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "table".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Loads a table whose header must list exactly the columns of `schema`, in
/// order. The table is named after the file stem.
pub fn load_csv(path: &Path, schema: &[(String, DataType)]) -> Result<ColumnTable> {
    let (header, records) = read_records(path)?;
    let expected: Vec<&str> = schema.iter().map(|(n, _)| n.as_str()).collect();
    if header != expected {
        return Err(Error::Schema(format!(
            "{}: header {header:?} does not match schema {expected:?}",
            path.display()
        )));
    }
    let mut data: Vec<ColumnData> = schema.iter().map(|(_, t)| ColumnData::empty(*t)).collect();
    for (line, record) in &records {
        for ((cell, (_, ty)), col) in record.iter().zip(schema).zip(&mut data) {
            let value = parse_cell(*ty, cell).map_err(|message| Error::Load {
                path: path.to_path_buf(),
                line: *line,
                message,
            })?;
            col.push(value)?;
        }
    }
    let columns = schema
        .iter()
        .zip(data)
        .map(|((name, _), d)| Column::new(name.clone(), d))
        .collect();
    ColumnTable::new(table_name(path), columns)
}

/// Loads a table of unknown schema: a column is Int64 if every cell parses
/// as an integer, else Float64 if every cell parses as a finite float, else
/// Text. Columns of an empty file are Text.
pub fn load_csv_inferred(path: &Path) -> Result<ColumnTable> {
    let (header, records) = read_records(path)?;
    let schema: Vec<(String, DataType)> = header
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let cells = || records.iter().map(move |(_, r)| &r[i]);
            let ty = if records.is_empty() {
                DataType::Text
            } else if cells().all(|c| c.parse::<i64>().is_ok()) {
                DataType::Int64
            } else if cells().all(|c| c.parse::<f64>().is_ok_and(f64::is_finite)) {
                DataType::Float64
            } else {
                DataType::Text
            };
            (name.clone(), ty)
        })
        .collect();
    load_csv(path, &schema)
}

/// Loads `<dir>/<name>.csv`, with the generator's schema for `part` and
/// `lineitem` and an inferred one otherwise.
pub fn load_table(dir: &Path, name: &str) -> Result<ColumnTable> {
    let path = dir.join(format!("{name}.csv"));
    match name {
        "part" => load_csv(&path, &part_schema()),
        "lineitem" => load_csv(&path, &lineitem_schema()),
        _ => load_csv_inferred(&path),
    }
}
