//! Named real-valued predictor columns keyed by item id, plus import of
//! externally computed tables and column-wise assembly.

mod import;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::ItemBank;

pub use import::{import_feature_table, Import};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("feature table is not valid UTF-8")]
    Utf8,
    #[error("feature table has no header row")]
    NoHeader,
    #[error("id column `{0}` not found in header")]
    MissingIdColumn(String),
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row} has {got} cells, header has {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` appears in more than one feature part")]
    Collision(String),
    #[error("item `{0}` is not in the bank")]
    UnknownItem(String),
    #[error("{rows} ids but {cells} cells for {cols} columns")]
    Shape { rows: usize, cols: usize, cells: usize },
    #[error("value in row {row}, column `{column}` is not finite")]
    NonFinite { row: usize, column: String },
    #[error("no column named `{0}`")]
    UnknownColumn(String),
    #[error("{0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Native,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub provenance: Provenance,
    /// Cells that were missing and filled with the column mean.
    pub imputed: usize,
}

/// Item ids × named columns, row-major. Always complete and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    item_ids: Vec<String>,
    columns: Vec<Column>,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(
        item_ids: Vec<String>,
        column_names: Vec<String>,
        provenance: Provenance,
        values: Vec<f64>,
    ) -> Result<Self> {
        let columns = column_names
            .into_iter()
            .map(|name| Column {
                name,
                provenance,
                imputed: 0,
            })
            .collect();
        Self::from_parts(item_ids, columns, values)
    }

    fn from_parts(item_ids: Vec<String>, columns: Vec<Column>, values: Vec<f64>) -> Result<Self> {
        if item_ids.len() * columns.len() != values.len() {
            return Err(FeatureError::Shape {
                rows: item_ids.len(),
                cols: columns.len(),
                cells: values.len(),
            });
        }
        let mut names = HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(FeatureError::DuplicateColumn(c.name.clone()));
            }
        }
        let mut ids = HashSet::new();
        for id in &item_ids {
            if !ids.insert(id.as_str()) {
                return Err(FeatureError::DuplicateId(id.clone()));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: pos / columns.len(),
                column: columns[pos % columns.len()].name.clone(),
            });
        }
        Ok(Self {
            item_ids,
            columns,
            values,
        })
    }

    /// Builds a table from cells that may be missing. Missing cells get the
    /// column mean of the present cells (0 when the whole column is missing)
    /// and are counted in [`Column::imputed`].
    pub fn from_optional(
        item_ids: Vec<String>,
        column_names: Vec<String>,
        provenance: Provenance,
        cells: Vec<Option<f64>>,
    ) -> Result<Self> {
        let ncols = column_names.len();
        if item_ids.len() * ncols != cells.len() {
            return Err(FeatureError::Shape {
                rows: item_ids.len(),
                cols: ncols,
                cells: cells.len(),
            });
        }
        let mut columns: Vec<Column> = column_names
            .into_iter()
            .map(|name| Column {
                name,
                provenance,
                imputed: 0,
            })
            .collect();
        let mut values = vec![0.0; cells.len()];
        for (c, col) in columns.iter_mut().enumerate() {
            let present: Vec<f64> = (0..item_ids.len())
                .filter_map(|r| cells[r * ncols + c])
                .collect();
            let fill = if present.is_empty() {
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            for r in 0..item_ids.len() {
                values[r * ncols + c] = match cells[r * ncols + c] {
                    Some(v) => v,
                    None => {
                        col.imputed += 1;
                        fill
                    }
                };
            }
        }
        Self::from_parts(item_ids, columns, values)
    }

    /// Table with rows and no columns.
    pub fn empty(item_ids: Vec<String>) -> Self {
        Self {
            item_ids,
            columns: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn nrows(&self) -> usize {
        self.item_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.ncols();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.ncols() + c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some((0..self.nrows()).map(|r| self.get(r, c)).collect())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.nrows(), self.ncols(), &self.values)
    }

    /// Names of columns whose values are all equal.
    pub fn zero_variance_columns(&self) -> Vec<&str> {
        (0..self.ncols())
            .filter(|&c| {
                (1..self.nrows()).all(|r| self.get(r, c) == self.get(0, c))
            })
            .map(|c| self.columns[c].name.as_str())
            .collect()
    }

    pub fn imputed_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.imputed > 0)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| FeatureError::UnknownColumn(n.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let columns = idx.iter().map(|&c| self.columns[c].clone()).collect();
        let values = (0..self.nrows())
            .flat_map(|r| idx.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        Self::from_parts(self.item_ids.clone(), columns, values)
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            item_ids: rows.iter().map(|&r| self.item_ids[r].clone()).collect(),
            columns: self.columns.clone(),
            values: rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect(),
        }
    }

    /// Header `item_id,<columns>` then one row per item. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item_id");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_escape(&c.name));
        }
        out.push('\n');
        for r in 0..self.nrows() {
            out.push_str(&csv_escape(&self.item_ids[r]));
            for v in self.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Concatenates parts column-wise in bank row order.
///
/// Parts may cover a subset of the bank; absent rows are mean-imputed per
/// column and counted. Column names must be unique across parts, and every
/// row of every part must be a bank item.
pub fn assemble_features(bank: &ItemBank, parts: &[FeatureTable]) -> Result<FeatureTable> {
    let ids = bank.item_ids();
    let row_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let mut seen = HashSet::new();
    for part in parts {
        for c in &part.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(FeatureError::Collision(c.name.clone()));
            }
        }
        if let Some(id) = part.item_ids.iter().find(|id| !row_of.contains_key(id.as_str())) {
            return Err(FeatureError::UnknownItem(id.clone()));
        }
    }

    let ncols: usize = parts.iter().map(FeatureTable::ncols).sum();
    let mut cells: Vec<Option<f64>> = vec![None; ids.len() * ncols];
    let mut columns = Vec::with_capacity(ncols);
    let mut offset = 0;
    for part in parts {
        for (r, id) in part.item_ids.iter().enumerate() {
            let row = row_of[id.as_str()];
            for c in 0..part.ncols() {
                cells[row * ncols + offset + c] = Some(part.get(r, c));
            }
        }
        columns.extend(part.columns.iter().cloned());
        offset += part.ncols();
    }

    let names = columns.iter().map(|c| c.name.clone()).collect();
    let mut table = FeatureTable::from_optional(ids, names, Provenance::Native, cells)?;
    for (out, src) in table.columns.iter_mut().zip(columns) {
        out.provenance = src.provenance;
        out.imputed += src.imputed;
    }
    Ok(table)
}
