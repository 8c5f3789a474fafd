//! Canonical JSONL reading and writing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::DatasetError;
use crate::instance::{validate_instance, Instance, NegationPair};
use crate::label::WorldAssumption;

/// Parses one record per non-blank line. Line numbers start at 1.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| classify(i + 1, e))?;
        out.push(record);
    }
    Ok(out)
}

// serde reports bad values (e.g. an unknown label) as data errors; those are
// validation failures rather than malformed JSON
fn classify(line: usize, e: serde_json::Error) -> DatasetError {
    match e.classify() {
        serde_json::error::Category::Data => DatasetError::Validation { line, reason: e.to_string() },
        _ => DatasetError::Parse { line, message: e.to_string() },
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

/// Loads canonical instances. With `assumption` given, each record is also
/// checked against that world assumption.
pub fn load_canonical(path: &Path, assumption: Option<WorldAssumption>) -> Result<Vec<Instance>, DatasetError> {
    let records: Vec<Instance> = read_jsonl(path)?;
    let wa = assumption.unwrap_or(WorldAssumption::Owa);
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let line_numbers: Vec<usize> = BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|(i, _)| i + 1)
        .collect();
    for (inst, line) in records.iter().zip(line_numbers) {
        validate_instance(inst, wa).map_err(|e| DatasetError::Validation { line, reason: e.to_string() })?;
    }
    Ok(records)
}

pub fn load_pairs(path: &Path) -> Result<Vec<NegationPair>, DatasetError> {
    read_jsonl(path)
}
