//! Shared CSV plumbing for the table readers and writers.

use super::{IngestError, SchemaMap};
use std::io::Read;

/// A fully buffered CSV source that can hand back the raw text of any line.
pub(crate) struct Source {
    bytes: Vec<u8>,
    line_starts: Vec<usize>,
}

impl Source {
    pub fn read(mut src: impl Read) -> Result<Self, IngestError> {
        let mut bytes = Vec::new();
        src.read_to_end(&mut bytes)?;
        let mut line_starts = vec![0];
        line_starts.extend(
            bytes
                .iter()
                .enumerate()
                .filter(|(_, b)| **b == b'\n')
                .map(|(i, _)| i + 1),
        );
        Ok(Self { bytes, line_starts })
    }

    pub fn is_blank(&self) -> bool {
        self.bytes.iter().all(u8::is_ascii_whitespace)
    }

    pub fn reader(&self) -> csv::Reader<&[u8]> {
        csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(&self.bytes[..])
    }

    /// Raw text of 1-based line `line`, without its terminator.
    pub fn raw_line(&self, line: u64) -> String {
        let idx = line.saturating_sub(1) as usize;
        let Some(&start) = self.line_starts.get(idx) else {
            return String::new();
        };
        let end = self
            .line_starts
            .get(idx + 1)
            .map(|e| e - 1)
            .unwrap_or(self.bytes.len());
        String::from_utf8_lossy(&self.bytes[start..end])
            .trim_end_matches('\r')
            .to_owned()
    }
}

/// Resolves logical column names to header positions.
pub(crate) fn column_indices<const N: usize>(
    headers: &csv::StringRecord,
    schema: &SchemaMap,
    table: &'static str,
    logical: [&str; N],
) -> Result<[usize; N], IngestError> {
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(logical) {
        let header = schema.resolve(name);
        *slot = headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == header)
            .ok_or_else(|| IngestError::MissingColumn {
                table,
                column: header.to_owned(),
            })?;
    }
    Ok(out)
}

pub(crate) fn is_missing_token(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "N/A" | "NaN" | "nan" | ".")
}

/// Parses an optional real. Missing tokens map to `Ok(None)`.
pub(crate) fn opt_f64(cell: &str, column: &str) -> Result<Option<f64>, String> {
    if is_missing_token(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        Ok(_) => Err(format!("{column}: non-finite value `{cell}`")),
        Err(_) => Err(format!("{column}: cannot parse `{cell}` as a number")),
    }
}

pub(crate) fn opt_int(cell: &str, column: &str) -> Result<Option<i64>, String> {
    if is_missing_token(cell) {
        return Ok(None);
    }
    cell.parse::<i64>()
        .map(Some)
        .map_err(|_| format!("{column}: cannot parse `{cell}` as an integer"))
}

/// 0/1 flag. Anything other than 0 or 1 is an unknown code and reads as missing.
pub(crate) fn opt_flag(cell: &str) -> Option<bool> {
    match cell {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

pub(crate) fn required_id(cell: &str, column: &str) -> Result<String, String> {
    if is_missing_token(cell) {
        Err(format!("{column}: missing identifier"))
    } else {
        Ok(cell.to_owned())
    }
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String, IngestError> {
    let bytes = w
        .into_inner()
        .map_err(|e| IngestError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

pub(crate) fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub(crate) fn fmt_flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}
