//! JSON-Lines embedding store.
//!
//! One manifest line
//! `{"manifest":{"models":{"<name>":{"dim":768,"max_tokens":512,"pooling":"mean"}}}}`
//! followed by one record per line
//! `{"item_id":"..","variant":"full","model":"..","dim":768,"vector":[..]}`.
//! Floats are written in shortest round-trip form, so a saved store reloads
//! bit-exactly. Records are written sorted by (model, variant, item id).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EmbedError, EmbeddingVariant, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    LastToken,
}

/// What a model produces and how the extractor was asked to run it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    /// Truncation budget handed to the extractor, in tokens.
    pub max_tokens: usize,
    #[serde(default)]
    pub pooling: Pooling,
}

/// Specs for the models used in the experiments.
pub fn known_model(name: &str) -> Option<ModelSpec> {
    let (dim, max_tokens) = match name {
        "bert-base" | "bert-base-cased" => (768, 512),
        "modernbert-base" => (768, 512),
        "llama-3.1-8b" => (4096, 512),
        _ => return None,
    };
    Some(ModelSpec {
        dim,
        max_tokens,
        pooling: Pooling::Mean,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub model: String,
    pub variant: EmbeddingVariant,
    pub item_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub item_id: String,
    pub variant: EmbeddingVariant,
    pub model: String,
    pub dim: usize,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    fn key(&self) -> RecordKey {
        RecordKey {
            model: self.model.clone(),
            variant: self.variant.clone(),
            item_id: self.item_id.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    manifest: Manifest,
}

#[derive(Default, Serialize, Deserialize)]
struct Manifest {
    models: BTreeMap<String, ModelSpec>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    models: BTreeMap<String, ModelSpec>,
    records: BTreeMap<RecordKey, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a model. Re-declaring with the same spec is a no-op.
    pub fn declare_model(&mut self, name: &str, spec: ModelSpec) -> Result<()> {
        match self.models.get(name) {
            Some(existing) if *existing != spec => Err(EmbedError::ManifestConflict {
                model: name.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.models.insert(name.to_string(), spec);
                Ok(())
            }
        }
    }

    pub fn model(&self, name: &str) -> Option<ModelSpec> {
        self.models.get(name).copied()
    }

    pub fn models(&self) -> impl Iterator<Item = (&str, &ModelSpec)> {
        self.models.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Adds a record for a declared model. The vector length must equal the
    /// declared dim and the key must be new.
    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<()> {
        let spec = self
            .models
            .get(&record.model)
            .ok_or_else(|| EmbedError::UndeclaredModel(record.model.clone()))?;
        if record.dim != spec.dim || record.vector.len() != spec.dim {
            return Err(EmbedError::DimMismatch {
                model: record.model.clone(),
                expected: spec.dim,
                got: if record.dim != spec.dim { record.dim } else { record.vector.len() },
            });
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite {
                item_id: record.item_id,
            });
        }
        let key = record.key();
        if self.records.contains_key(&key) {
            return Err(EmbedError::DuplicateKey {
                item_id: key.item_id,
                variant: key.variant.key(),
                model: key.model,
            });
        }
        self.records.insert(key, record.vector);
        Ok(())
    }

    pub fn get(&self, item_id: &str, variant: &EmbeddingVariant, model: &str) -> Option<&[f64]> {
        self.records
            .get(&RecordKey {
                model: model.to_string(),
                variant: variant.clone(),
                item_id: item_id.to_string(),
            })
            .map(Vec::as_slice)
    }

    pub fn contains(&self, item_id: &str, variant: &EmbeddingVariant, model: &str) -> bool {
        self.get(item_id, variant, model).is_some()
    }

    pub fn records(&self) -> impl Iterator<Item = EmbeddingRecord> + '_ {
        self.records.iter().map(|(k, v)| EmbeddingRecord {
            item_id: k.item_id.clone(),
            variant: k.variant.clone(),
            model: k.model.clone(),
            dim: v.len(),
            vector: v.clone(),
        })
    }

    pub fn to_jsonl(&self) -> String {
        let manifest = ManifestLine {
            manifest: Manifest {
                models: self.models.clone(),
            },
        };
        let mut out = serde_json::to_string(&manifest).expect("manifest serializes");
        out.push('\n');
        for record in self.records() {
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses a store. Exactly one manifest line is expected; it may appear
    /// anywhere. Blank lines are skipped. Line numbers in errors are 1-based.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut manifest: Option<Manifest> = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| EmbedError::Store {
                line: line_no,
                message,
            };
            let value: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if value.get("manifest").is_some() {
                if manifest.is_some() {
                    return Err(err("second manifest line".into()));
                }
                let m: ManifestLine = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                manifest = Some(m.manifest);
            } else {
                let r: EmbeddingRecord = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                records.push((line_no, r));
            }
        }
        let mut store = Self::new();
        let manifest = manifest.ok_or(EmbedError::Store {
            line: 0,
            message: "no manifest line".into(),
        })?;
        for (name, spec) in manifest.models {
            store.declare_model(&name, spec)?;
        }
        for (line, r) in records {
            store.insert(r).map_err(|e| EmbedError::Store {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EmbedError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| EmbedError::Io(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, self.to_jsonl()).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }
}
