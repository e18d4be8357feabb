//! CSV interchange: one point per line, one coordinate per field.

use std::io::{Read, Write};

use cloudprint::PointCloud;

use crate::CliError;

/// Parse a CSV cloud. A first line with any non-numeric field is taken as a
/// header; anywhere else a non-numeric field is an error.
pub fn parse<R: Read>(reader: R) -> Result<PointCloud, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut dim = None;
    let mut count = 0usize;
    for (index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Csv(e.to_string()))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if index == 0 && dim.is_none() && parsed.iter().any(Result::is_err) {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(n) if n != record.len() => {
                return Err(CliError::Csv(format!(
                    "line {line}: expected {n} fields, found {}",
                    record.len()
                )))
            }
            _ => {}
        }
        for (col, value) in parsed.into_iter().enumerate() {
            let v = value.map_err(|_| {
                CliError::Csv(format!(
                    "line {line}, field {}: `{}` is not a number",
                    col + 1,
                    &record[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Csv(format!(
                    "line {line}, field {}: value is not finite",
                    col + 1
                )));
            }
            data.push(v);
        }
        count += 1;
    }
    let dim = dim.ok_or_else(|| CliError::Csv("no data rows".into()))?;
    PointCloud::from_flat(count, dim, data).map_err(CliError::Core)
}

/// Write a cloud with 17 significant digits per value, which round-trips
/// every finite `f64` exactly.
pub fn render<W: Write>(cloud: &PointCloud, writer: W, header: bool) -> Result<(), CliError> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let csv_err = |e: csv::Error| CliError::Csv(e.to_string());
    if header {
        wtr.write_record((0..cloud.dim()).map(|j| format!("x{j}")))
            .map_err(csv_err)?;
    }
    for row in cloud.rows() {
        wtr.write_record(row.iter().map(|v| format!("{v:.16e}")))
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| CliError::Csv(e.to_string()))
}
