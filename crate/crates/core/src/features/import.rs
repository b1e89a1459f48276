//! Delimited feature-table import (Coh-Metrix exports and similar).

use std::collections::HashSet;

use super::{FeatureError, FeatureTable, Provenance, Result};
use crate::bank::ItemBank;

/// Result of an import: the matched rows and the ids that were dropped
/// because the bank has no such item.
#[derive(Debug, Clone, PartialEq)]
pub struct Import {
    pub table: FeatureTable,
    pub unmatched: Vec<String>,
}

/// Cells that count as missing.
const MISSING: &[&str] = &["", "NA", "N/A", "NaN", "nan", "null"];

/// Parses a CSV or TSV table with a header row. The delimiter is a tab when
/// the header line has more tabs than commas.
///
/// Every non-id column must be numeric; missing cells are mean-imputed.
/// Row numbers in errors are 1-based data rows (the header is row 0).
/// With a bank, rows for unknown items are set aside in `unmatched`.
pub fn import_feature_table(source: &[u8], id_column: &str, bank: Option<&ItemBank>) -> Result<Import> {
    let text = std::str::from_utf8(source).map_err(|_| FeatureError::Utf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let header_line = text.lines().next().ok_or(FeatureError::NoHeader)?;
    let delimiter = if header_line.matches('\t').count() > header_line.matches(',').count() {
        b'\t'
    } else {
        b','
    };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| FeatureError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(FeatureError::NoHeader);
    }
    let id_at = header
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| FeatureError::MissingIdColumn(id_column.to_string()))?;
    let value_cols: Vec<usize> = (0..header.len()).filter(|&c| c != id_at).collect();
    let names: Vec<String> = value_cols.iter().map(|&c| header[c].clone()).collect();

    let known: Option<HashSet<&str>> =
        bank.map(|b| b.items().iter().map(|i| i.item_id.as_str()).collect());

    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut unmatched = Vec::new();
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| FeatureError::Csv(e.to_string()))?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if record.len() != header.len() {
            return Err(FeatureError::Ragged {
                row,
                expected: header.len(),
                got: record.len(),
            });
        }
        let id = record[id_at].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(FeatureError::DuplicateId(id));
        }
        let mut parsed = Vec::with_capacity(value_cols.len());
        for &c in &value_cols {
            let raw = record[c].trim();
            if MISSING.contains(&raw) {
                parsed.push(None);
                continue;
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(Some(v)),
                _ => {
                    return Err(FeatureError::NonNumeric {
                        row,
                        column: header[c].clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        if known.as_ref().is_some_and(|k| !k.contains(id.as_str())) {
            unmatched.push(id);
            continue;
        }
        ids.push(id);
        cells.extend(parsed);
    }

    let table = FeatureTable::from_optional(ids, names, Provenance::Imported, cells)?;
    Ok(Import { table, unmatched })
}
