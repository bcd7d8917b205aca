use std::fs;
use std::path::Path;

use dlife_core::sampling::{LifetimeSample, Record};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// `time,event`
    Flat,
    /// `n,count,event`
    Grouped,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub format: Format,
    pub sample: LifetimeSample,
}

pub fn read(path: &Path) -> Result<Dataset, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|msg| CliError::Input(format!("{}: {msg}", path.display())))
}

fn field<'a>(record: &'a csv::StringRecord, j: usize, line: u64, name: &str) -> Result<&'a str, String> {
    record
        .get(j)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| format!("row {line}: missing {name}"))
}

fn positive(text: &str, line: u64, name: &str) -> Result<u64, String> {
    match text.parse::<u64>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("row {line}: {name} must be a positive integer, got '{text}'")),
    }
}

fn event(text: &str, line: u64) -> Result<bool, String> {
    match text {
        "1" => Ok(true),
        "0" => Ok(false),
        _ => Err(format!("row {line}: event must be 1 (failure) or 0 (right-censored), got '{text}'")),
    }
}

/// Parse a flat or grouped dataset; the header decides the format. Row
/// numbers in errors count the header as row 1.
pub fn parse(text: &str) -> Result<Dataset, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| format!("row 1: {e}"))?
        .iter()
        .map(str::to_string)
        .collect();
    let format = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["time", "event"] => Format::Flat,
        ["n", "count", "event"] => Format::Grouped,
        _ => {
            return Err(format!(
                "row 1: expected header 'time,event' or 'n,count,event', got '{}'",
                header.join(",")
            ))
        }
    };
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| format!("row {}: {e}", e.position().map_or(0, |p| p.line())))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            return Err(format!("row {line}: expected {} fields, found {}", header.len(), row.len()));
        }
        match format {
            Format::Flat => {
                let value = positive(field(&row, 0, line, "time")?, line, "time")?;
                let failed = event(field(&row, 1, line, "event")?, line)?;
                records.push(if failed { Record::failure(value) } else { Record::censored(value) });
            }
            Format::Grouped => {
                let value = positive(field(&row, 0, line, "n")?, line, "n")?;
                let count = positive(field(&row, 1, line, "count")?, line, "count")?;
                let failed = event(field(&row, 2, line, "event")?, line)?;
                let record = if failed { Record::failure(value) } else { Record::censored(value) };
                records.extend(std::iter::repeat_n(record, count as usize));
            }
        }
    }
    if records.is_empty() {
        return Err("no data rows".to_string());
    }
    let sample = LifetimeSample::new(records).map_err(|e| e.to_string())?;
    Ok(Dataset { format, sample })
}

pub fn to_flat_csv(sample: &LifetimeSample) -> String {
    let mut out = String::from("time,event\n");
    for r in sample.records() {
        out.push_str(&format!("{},{}\n", r.value, u8::from(r.is_failure())));
    }
    out
}
