//! Connective incidence per 1000 words.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Deserialize;

use super::segment::segment;
use super::{Metrics, Result, TextError, TextUnits};

const BUILTIN: &str = include_str!("../../data/connectives.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    All,
    Causal,
    Logical,
    Adversative,
    Temporal,
    Additive,
    Positive,
    Negative,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::All,
        Category::Causal,
        Category::Logical,
        Category::Adversative,
        Category::Temporal,
        Category::Additive,
        Category::Positive,
        Category::Negative,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Category::All => "CNCAll",
            Category::Causal => "CNCCaus",
            Category::Logical => "CNCLogic",
            Category::Adversative => "CNCADC",
            Category::Temporal => "CNCTemp",
            Category::Additive => "CNCAdd",
            Category::Positive => "CNCPos",
            Category::Negative => "CNCNeg",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Category::All => "all",
            Category::Causal => "causal",
            Category::Logical => "logical",
            Category::Adversative => "adversative",
            Category::Temporal => "temporal",
            Category::Additive => "additive",
            Category::Positive => "positive",
            Category::Negative => "negative",
        }
    }
}

#[derive(Deserialize)]
struct LexiconFile {
    #[serde(default)]
    version: Option<String>,
    causal: Vec<String>,
    logical: Vec<String>,
    adversative: Vec<String>,
    temporal: Vec<String>,
    additive: Vec<String>,
    positive: Vec<String>,
    negative: Vec<String>,
}

/// Connective words and phrases per category, each stored as its word
/// tokens. `All` is the union of the other seven.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectiveLexicon {
    pub version: String,
    entries: BTreeMap<Category, BTreeSet<Vec<String>>>,
}

impl ConnectiveLexicon {
    /// The lexicon shipped in `data/connectives.json`.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN.as_bytes()).expect("bundled lexicon is valid")
    }

    /// Parses `{"causal": [...], "logical": [...], ...}`. Entries must be
    /// lowercase and every category non-empty.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: LexiconFile =
            serde_json::from_slice(bytes).map_err(|e| TextError::Lexicon(e.to_string()))?;
        let lists = [
            (Category::Causal, file.causal),
            (Category::Logical, file.logical),
            (Category::Adversative, file.adversative),
            (Category::Temporal, file.temporal),
            (Category::Additive, file.additive),
            (Category::Positive, file.positive),
            (Category::Negative, file.negative),
        ];
        let mut entries = BTreeMap::new();
        let mut all = BTreeSet::new();
        for (cat, words) in lists {
            if words.is_empty() {
                return Err(TextError::Lexicon(format!("category `{}` is empty", cat.key())));
            }
            let mut set = BTreeSet::new();
            for w in words {
                if w != w.to_lowercase() {
                    return Err(TextError::Lexicon(format!("entry `{w}` is not lowercase")));
                }
                let tokens = tokenize(&w);
                if tokens.is_empty() {
                    return Err(TextError::Lexicon(format!("entry `{w}` has no words")));
                }
                all.insert(tokens.clone());
                set.insert(tokens);
            }
            entries.insert(cat, set);
        }
        entries.insert(Category::All, all);
        Ok(Self {
            version: file.version.unwrap_or_default(),
            entries,
        })
    }

    pub fn entries(&self, category: Category) -> &BTreeSet<Vec<String>> {
        &self.entries[&category]
    }

    /// Number of distinct entries across all categories.
    pub fn len(&self) -> usize {
        self.entries[&Category::All].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn tokenize(phrase: &str) -> Vec<String> {
    segment(phrase)
        .map(|u| u.words().map(|w| w.lower()).collect())
        .unwrap_or_default()
}

/// Non-overlapping matches of `entries` in `tokens`, scanning left to right
/// and taking the longest entry at each position.
fn count_matches(tokens: &[String], entries: &BTreeSet<Vec<String>>, max_len: usize) -> usize {
    let set: HashSet<&[String]> = entries.iter().map(Vec::as_slice).collect();
    let mut count = 0;
    let mut i = 0;
    while i < tokens.len() {
        let longest = (1..=max_len.min(tokens.len() - i))
            .rev()
            .find(|&n| set.contains(&tokens[i..i + n]));
        match longest {
            Some(n) => {
                count += 1;
                i += n;
            }
            None => i += 1,
        }
    }
    count
}

/// `1000 * matches / words` for every category, in [`Category::ALL`] order.
/// Matches never cross sentence boundaries.
pub fn connective_incidence(units: &TextUnits, lexicon: &ConnectiveLexicon) -> Metrics {
    let sentences: Vec<Vec<String>> = units
        .sentences()
        .map(|s| s.words.iter().map(|w| w.lower()).collect())
        .collect();
    let words = units.word_count() as f64;
    Category::ALL
        .iter()
        .map(|&cat| {
            let entries = lexicon.entries(cat);
            let max_len = entries.iter().map(Vec::len).max().unwrap_or(1);
            let hits: usize = sentences.iter().map(|s| count_matches(s, entries, max_len)).sum();
            (cat.column(), 1000.0 * hits as f64 / words)
        })
        .collect()
}
