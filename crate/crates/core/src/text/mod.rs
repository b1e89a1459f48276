//! Native linguistic metrics computed from passage text: descriptive counts,
//! Flesch-Kincaid readability, type-token ratios and connective incidence.
//!
//! Other text indices (cohesion, word frequency, syntax) come in through
//! [`crate::features::import_feature_table`].

mod connectives;
mod metrics;
pub mod segment;

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::bank::ItemBank;
use crate::features::{FeatureTable, Provenance};

pub use connectives::{connective_incidence, Category, ConnectiveLexicon};
pub use metrics::{
    descriptive_metrics, flesch_kincaid, lexical_diversity, LexicalDiversity, Metrics, Readability,
    DESCRIPTIVE_COLUMNS,
};
pub use segment::{segment, TextUnits};

const FUNCTION_WORDS: &str = include_str!("../../data/function_words.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("text contains no words")]
    NoWords,
    #[error("passage `{passage_id}`: {source}")]
    Passage {
        passage_id: String,
        #[source]
        source: Box<TextError>,
    },
    #[error("question text of item `{item_id}`: {source}")]
    Question {
        item_id: String,
        #[source]
        source: Box<TextError>,
    },
    #[error("connective lexicon: {0}")]
    Lexicon(String),
}

pub type Result<T> = std::result::Result<T, TextError>;

/// The bundled function-word stoplist used for `LDTTRc`.
pub fn default_stoplist() -> HashSet<String> {
    parse_stoplist(FUNCTION_WORDS)
}

/// One lowercase word per line; `#` starts a comment line.
pub fn parse_stoplist(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct TextOptions {
    pub lexicon: ConnectiveLexicon,
    pub stoplist: HashSet<String>,
    /// Also compute every metric on each item's question text, as columns
    /// prefixed `Q_`.
    pub include_question_text: bool,
}

impl Default for TextOptions {
    fn default() -> Self {
        Self {
            lexicon: ConnectiveLexicon::builtin(),
            stoplist: default_stoplist(),
            include_question_text: false,
        }
    }
}

/// Column names produced by [`text_metrics`], in order.
pub fn metric_columns() -> Vec<&'static str> {
    let mut cols: Vec<&'static str> = DESCRIPTIVE_COLUMNS.to_vec();
    cols.extend(["FK", "RDFRE", "RDFKGL", "LDTTRa", "LDTTRc"]);
    cols.extend(Category::ALL.iter().map(|c| c.column()));
    cols
}

/// Every native metric for one text. `LDTTRc` is `None` when all words are
/// function words.
pub fn text_metrics(text: &str, options: &TextOptions) -> Result<Vec<(&'static str, Option<f64>)>> {
    let units = segment(text)?;
    let mut out: Vec<(&'static str, Option<f64>)> =
        descriptive_metrics(&units).into_iter().map(|(n, v)| (n, Some(v))).collect();
    out.extend(flesch_kincaid(&units).metrics().into_iter().map(|(n, v)| (n, Some(v))));
    let lex = lexical_diversity(&units, &options.stoplist);
    out.push(("LDTTRa", Some(lex.ldttra)));
    out.push(("LDTTRc", lex.ldttrc));
    out.extend(
        connective_incidence(&units, &options.lexicon)
            .into_iter()
            .map(|(n, v)| (n, Some(v))),
    );
    Ok(out)
}

/// Passage metrics broadcast to each item on the passage, optionally
/// followed by question-text metrics. Passages are processed in parallel
/// and rows come out in bank order. Undefined values are mean-imputed.
pub fn text_features(bank: &ItemBank, options: &TextOptions) -> Result<FeatureTable> {
    let per_passage: Vec<Vec<(&'static str, Option<f64>)>> = bank
        .passages()
        .par_iter()
        .map(|p| {
            text_metrics(&p.text, options).map_err(|e| TextError::Passage {
                passage_id: p.passage_id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let index: std::collections::HashMap<&str, usize> = bank
        .passages()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.passage_id.as_str(), i))
        .collect();

    let per_question: Option<Vec<Vec<(&'static str, Option<f64>)>>> = if options.include_question_text {
        Some(
            bank.items()
                .par_iter()
                .map(|it| {
                    text_metrics(&it.question_text, options).map_err(|e| TextError::Question {
                        item_id: it.item_id.clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let mut names: Vec<String> = metric_columns().iter().map(|s| s.to_string()).collect();
    if per_question.is_some() {
        names.extend(metric_columns().iter().map(|s| format!("Q_{s}")));
    }
    let mut cells = Vec::with_capacity(bank.len() * names.len());
    for (r, item) in bank.items().iter().enumerate() {
        cells.extend(per_passage[index[item.passage_id.as_str()]].iter().map(|(_, v)| *v));
        if let Some(q) = &per_question {
            cells.extend(q[r].iter().map(|(_, v)| *v));
        }
    }
    Ok(FeatureTable::from_optional(bank.item_ids(), names, Provenance::Native, cells)
        .expect("metric columns are well-formed"))
}
