//! Item bank: passages, multiple-choice items bound to them, and the
//! respondent context and observed p-value of each item.
//!
//! Two on-disk layouts are accepted. The JSON layout is one document
//!
//! ```json
//! {"passages": [{"passage_id", "text", "has_highlight"}],
//!  "items": [{"item_id", "passage_id", "question_text", "correct_option",
//!             "wrong_options": [...], "item_order", "ques_text_ref",
//!             "ques_text_highlight", "state", "grade", "year", "p_value"}]}
//! ```
//!
//! and the CSV layout is a `passages.csv` / `items.csv` pair with the same
//! column names, where the `wrong_options` cell holds a JSON array of strings.

mod annotations;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotations::{context_features, test_features, GradeEncoding};
pub use parse::{parse_item_bank, BankSource};

/// Lowest and highest grade accepted in a bank.
pub const GRADE_RANGE: std::ops::RangeInclusive<u8> = 3..=8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Passage,
    Item,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Passage => "passage",
            RecordKind::Item => "item",
        })
    }
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("input is not valid UTF-8")]
    Utf8,
    #[error("malformed bank document: {0}")]
    Document(String),
    #[error("{kind} record {index}, field `{field}`: {message}")]
    Field {
        kind: RecordKind,
        index: usize,
        field: String,
        message: String,
    },
    #[error("duplicate {kind} id `{id}` at record {index}")]
    DuplicateId {
        kind: RecordKind,
        id: String,
        index: usize,
    },
    #[error("item record {index} (`{item_id}`) references missing passage `{passage_id}`")]
    DanglingPassage {
        index: usize,
        item_id: String,
        passage_id: String,
    },
    #[error("cannot read bank: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BankError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub text: String,
    /// Bold, italic or underlined text appears in the passage.
    pub has_highlight: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Context {
    pub state: String,
    pub grade: u8,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub item_id: String,
    pub passage_id: String,
    pub question_text: String,
    pub correct_option: String,
    pub wrong_options: Vec<String>,
    /// 1-based position of the item after its passage.
    pub item_order: u32,
    /// The question quotes sentences or paragraphs from the passage.
    pub ques_text_ref: bool,
    /// The question contains bold or underlined text.
    pub ques_text_highlight: bool,
    pub context: Context,
    /// Share of respondents answering correctly, strictly inside (0, 1).
    pub p_value: f64,
}

/// Validated, immutable collection of passages and items.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemBank {
    passages: Vec<Passage>,
    items: Vec<Item>,
    passage_index: HashMap<String, usize>,
}

impl ItemBank {
    /// Checks every invariant and builds the bank. Errors name the first
    /// offending record by its position in the input.
    pub fn new(passages: Vec<Passage>, items: Vec<Item>) -> Result<Self> {
        let mut passage_index = HashMap::with_capacity(passages.len());
        for (index, p) in passages.iter().enumerate() {
            validate_passage(index, p)?;
            if passage_index.insert(p.passage_id.clone(), index).is_some() {
                return Err(BankError::DuplicateId {
                    kind: RecordKind::Passage,
                    id: p.passage_id.clone(),
                    index,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for (index, item) in items.iter().enumerate() {
            validate_item(index, item)?;
            if !seen.insert(item.item_id.as_str()) {
                return Err(BankError::DuplicateId {
                    kind: RecordKind::Item,
                    id: item.item_id.clone(),
                    index,
                });
            }
            if !passage_index.contains_key(&item.passage_id) {
                return Err(BankError::DanglingPassage {
                    index,
                    item_id: item.item_id.clone(),
                    passage_id: item.passage_id.clone(),
                });
            }
        }
        Ok(Self {
            passages,
            items,
            passage_index,
        })
    }

    /// Reads a `.json` bank file, or a directory holding `passages.csv` and
    /// `items.csv`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_dir() {
            let passages = std::fs::read(path.join("passages.csv"))?;
            let items = std::fs::read(path.join("items.csv"))?;
            parse_item_bank(BankSource::CsvPair {
                passages: &passages,
                items: &items,
            })
        } else {
            let bytes = std::fs::read(path)?;
            parse_item_bank(BankSource::Json(&bytes))
        }
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.passage_index.get(passage_id).map(|&i| &self.passages[i])
    }

    /// The passage an item belongs to. Always present in a valid bank.
    pub fn passage_of(&self, item: &Item) -> &Passage {
        self.passage(&item.passage_id)
            .expect("bank invariant: item passages resolve")
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.item_id.clone()).collect()
    }

    /// Largest number of wrong options on any item.
    pub fn max_wrong_options(&self) -> usize {
        self.items.iter().map(|i| i.wrong_options.len()).max().unwrap_or(0)
    }

    /// Keeps items matching `keep` and the passages they reference.
    pub fn filter(&self, keep: impl Fn(&Item) -> bool) -> Result<Self> {
        let items: Vec<Item> = self.items.iter().filter(|i| keep(i)).cloned().collect();
        let used: BTreeSet<&str> = items.iter().map(|i| i.passage_id.as_str()).collect();
        let passages = self
            .passages
            .iter()
            .filter(|p| used.contains(p.passage_id.as_str()))
            .cloned()
            .collect();
        Self::new(passages, items)
    }
}

fn field_error(kind: RecordKind, index: usize, field: &str, message: impl Into<String>) -> BankError {
    BankError::Field {
        kind,
        index,
        field: field.to_string(),
        message: message.into(),
    }
}

fn validate_passage(index: usize, p: &Passage) -> Result<()> {
    let kind = RecordKind::Passage;
    if p.passage_id.trim().is_empty() {
        return Err(field_error(kind, index, "passage_id", "must be non-empty"));
    }
    if p.text.trim().is_empty() {
        return Err(field_error(kind, index, "text", "must be non-empty"));
    }
    Ok(())
}

fn validate_item(index: usize, item: &Item) -> Result<()> {
    let kind = RecordKind::Item;
    let non_empty = [
        ("item_id", &item.item_id),
        ("passage_id", &item.passage_id),
        ("question_text", &item.question_text),
        ("correct_option", &item.correct_option),
        ("state", &item.context.state),
    ];
    for (field, value) in non_empty {
        if value.trim().is_empty() {
            return Err(field_error(kind, index, field, "must be non-empty"));
        }
    }
    if item.wrong_options.is_empty() {
        return Err(field_error(kind, index, "wrong_options", "needs at least one option"));
    }
    if let Some(pos) = item.wrong_options.iter().position(|o| o.trim().is_empty()) {
        return Err(field_error(
            kind,
            index,
            "wrong_options",
            format!("option {pos} is empty"),
        ));
    }
    if item.item_order == 0 {
        return Err(field_error(kind, index, "item_order", "must be a positive integer"));
    }
    if !GRADE_RANGE.contains(&item.context.grade) {
        return Err(field_error(
            kind,
            index,
            "grade",
            format!(
                "{} is outside {}..={}",
                item.context.grade,
                GRADE_RANGE.start(),
                GRADE_RANGE.end()
            ),
        ));
    }
    if !(item.p_value > 0.0 && item.p_value < 1.0) {
        return Err(field_error(
            kind,
            index,
            "p_value",
            format!("{} is outside the open interval (0, 1)", item.p_value),
        ));
    }
    Ok(())
}
