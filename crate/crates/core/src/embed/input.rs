use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{EmbedError, EmbeddingStore, FetchRequest, Result};
use crate::bank::{Item, ItemBank, Passage};
use crate::features::{FeatureTable, Provenance};

pub const CORRECT_TAG: &str = "[correct answer]";
pub const WRONG_TAG: &str = "[wrong answer]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OptionTarget {
    Correct,
    /// 0-based index into the item's wrong options.
    Wrong(usize),
}

/// Which parts of an item go into the embedded text.
///
/// The string form (`full`, `no_passage`, `option_only/correct`,
/// `option_only/wrong/<i>`) is part of every store key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmbeddingVariant {
    /// Question, tagged correct and wrong options, then the passage.
    Full,
    /// Question and tagged options.
    NoPassage,
    /// Question and one tagged option.
    OptionOnly(OptionTarget),
}

impl EmbeddingVariant {
    pub fn key(&self) -> String {
        match self {
            EmbeddingVariant::Full => "full".into(),
            EmbeddingVariant::NoPassage => "no_passage".into(),
            EmbeddingVariant::OptionOnly(OptionTarget::Correct) => "option_only/correct".into(),
            EmbeddingVariant::OptionOnly(OptionTarget::Wrong(i)) => format!("option_only/wrong/{i}"),
        }
    }
}

impl fmt::Display for EmbeddingVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for EmbeddingVariant {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "no_passage" => Ok(Self::NoPassage),
            "option_only/correct" => Ok(Self::OptionOnly(OptionTarget::Correct)),
            _ => s
                .strip_prefix("option_only/wrong/")
                .and_then(|i| i.parse::<usize>().ok().filter(|n| n.to_string() == i))
                .map(|i| Self::OptionOnly(OptionTarget::Wrong(i)))
                .ok_or_else(|| EmbedError::UnknownVariant(s.to_string())),
        }
    }
}

impl Serialize for EmbeddingVariant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for EmbeddingVariant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The text sent to the embedding model: question, `[correct answer]` and
/// the correct option, `[wrong answer]` and each wrong option in stored
/// order, then the passage (full variant only), joined by single spaces.
/// The option-only variant keeps just the targeted option.
pub fn build_embedding_input(item: &Item, passage: &Passage, variant: &EmbeddingVariant) -> Result<String> {
    fn tagged_all<'a>(parts: &mut Vec<&'a str>, item: &'a Item) {
        parts.push(CORRECT_TAG);
        parts.push(item.correct_option.trim());
        for w in &item.wrong_options {
            parts.push(WRONG_TAG);
            parts.push(w.trim());
        }
    }
    let mut parts: Vec<&str> = vec![item.question_text.trim()];
    match variant {
        EmbeddingVariant::Full => {
            tagged_all(&mut parts, item);
            parts.push(passage.text.trim());
        }
        EmbeddingVariant::NoPassage => tagged_all(&mut parts, item),
        EmbeddingVariant::OptionOnly(OptionTarget::Correct) => {
            parts.push(CORRECT_TAG);
            parts.push(item.correct_option.trim());
        }
        EmbeddingVariant::OptionOnly(OptionTarget::Wrong(i)) => {
            let w = item.wrong_options.get(*i).ok_or_else(|| EmbedError::NoSuchOption {
                item_id: item.item_id.clone(),
                index: *i,
            })?;
            parts.push(WRONG_TAG);
            parts.push(w.trim());
        }
    }
    Ok(parts.join(" "))
}

/// Fetch requests for one variant of every bank item.
pub fn embedding_inputs(bank: &ItemBank, variant: &EmbeddingVariant) -> Result<Vec<FetchRequest>> {
    bank.items()
        .iter()
        .map(|item| {
            Ok(FetchRequest {
                item_id: item.item_id.clone(),
                variant: variant.clone(),
                text: build_embedding_input(item, bank.passage_of(item), variant)?,
            })
        })
        .collect()
}

/// Option-only requests for the correct option and every wrong option of
/// every item, as needed by [`similarity_features`].
pub fn option_inputs(bank: &ItemBank) -> Vec<FetchRequest> {
    let mut out = Vec::new();
    for item in bank.items() {
        let passage = bank.passage_of(item);
        let targets = std::iter::once(OptionTarget::Correct)
            .chain((0..item.wrong_options.len()).map(OptionTarget::Wrong));
        for t in targets {
            let variant = EmbeddingVariant::OptionOnly(t);
            let text = build_embedding_input(item, passage, &variant).expect("targets are in range");
            out.push(FetchRequest {
                item_id: item.item_id.clone(),
                variant,
                text,
            });
        }
    }
    out
}

/// `u . v / (|u| |v|)`, clamped to [-1, 1].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(EmbedError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine similarity between the correct option's embedding and each wrong
/// option's, in stored distractor order.
pub fn distractor_similarity_features(item: &Item, store: &EmbeddingStore, model: &str) -> Result<Vec<f64>> {
    let lookup = |t: OptionTarget| {
        let variant = EmbeddingVariant::OptionOnly(t);
        store
            .get(&item.item_id, &variant, model)
            .ok_or_else(|| EmbedError::MissingOption {
                model: model.to_string(),
                item_id: item.item_id.clone(),
                option: variant.key(),
            })
    };
    let correct = lookup(OptionTarget::Correct)?;
    (0..item.wrong_options.len())
        .map(|i| cosine_similarity(correct, lookup(OptionTarget::Wrong(i))?))
        .collect()
}

/// Columns `cos_sim_wrong_1..K` with K the largest distractor count in the
/// bank. Items with fewer distractors get the column mean in the missing
/// slots (counted as imputed).
pub fn similarity_features(bank: &ItemBank, store: &EmbeddingStore, model: &str) -> Result<FeatureTable> {
    let k = bank.max_wrong_options();
    let mut cells = Vec::with_capacity(bank.len() * k);
    for item in bank.items() {
        let sims = distractor_similarity_features(item, store, model)?;
        cells.extend((0..k).map(|j| sims.get(j).copied()));
    }
    let names = (1..=k).map(|j| format!("cos_sim_wrong_{j}")).collect();
    Ok(FeatureTable::from_optional(bank.item_ids(), names, Provenance::Native, cells)
        .expect("similarities are finite"))
}

/// One column per embedding dimension, named `<model>_e<i>`, in bank order.
pub fn embeddings_to_features(
    store: &EmbeddingStore,
    bank: &ItemBank,
    model: &str,
    variant: &EmbeddingVariant,
) -> Result<FeatureTable> {
    let missing: Vec<String> = bank
        .items()
        .iter()
        .filter(|i| !store.contains(&i.item_id, variant, model))
        .map(|i| i.item_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EmbedError::MissingRecords {
            model: model.to_string(),
            variant: variant.key(),
            item_ids: missing,
        });
    }
    let dim = store
        .model(model)
        .map(|s| s.dim)
        .ok_or_else(|| EmbedError::UndeclaredModel(model.to_string()))?;
    let mut values = Vec::with_capacity(bank.len() * dim);
    for item in bank.items() {
        values.extend_from_slice(store.get(&item.item_id, variant, model).expect("checked above"));
    }
    let names = (0..dim).map(|i| format!("{model}_e{i}")).collect();
    Ok(FeatureTable::new(bank.item_ids(), names, Provenance::Imported, values).expect("store vectors are finite"))
}
