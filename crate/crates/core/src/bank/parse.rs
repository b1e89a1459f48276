use std::collections::HashMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BankError, Context, Item, ItemBank, Passage, RecordKind, Result};

/// Encoded bank contents.
#[derive(Debug, Clone, Copy)]
pub enum BankSource<'a> {
    Json(&'a [u8]),
    CsvPair { passages: &'a [u8], items: &'a [u8] },
}

#[derive(Serialize, Deserialize)]
struct PassageRecord {
    passage_id: String,
    text: String,
    has_highlight: bool,
}

#[derive(Serialize, Deserialize)]
struct ItemRecord {
    item_id: String,
    passage_id: String,
    question_text: String,
    correct_option: String,
    wrong_options: Vec<String>,
    item_order: u32,
    ques_text_ref: bool,
    ques_text_highlight: bool,
    state: String,
    grade: u8,
    year: i32,
    p_value: f64,
}

impl From<PassageRecord> for Passage {
    fn from(r: PassageRecord) -> Self {
        Passage {
            passage_id: r.passage_id,
            text: r.text,
            has_highlight: r.has_highlight,
        }
    }
}

impl From<ItemRecord> for Item {
    fn from(r: ItemRecord) -> Self {
        Item {
            item_id: r.item_id,
            passage_id: r.passage_id,
            question_text: r.question_text,
            correct_option: r.correct_option,
            wrong_options: r.wrong_options,
            item_order: r.item_order,
            ques_text_ref: r.ques_text_ref,
            ques_text_highlight: r.ques_text_highlight,
            context: Context {
                state: r.state,
                grade: r.grade,
                year: r.year,
            },
            p_value: r.p_value,
        }
    }
}

impl From<&Item> for ItemRecord {
    fn from(i: &Item) -> Self {
        ItemRecord {
            item_id: i.item_id.clone(),
            passage_id: i.passage_id.clone(),
            question_text: i.question_text.clone(),
            correct_option: i.correct_option.clone(),
            wrong_options: i.wrong_options.clone(),
            item_order: i.item_order,
            ques_text_ref: i.ques_text_ref,
            ques_text_highlight: i.ques_text_highlight,
            state: i.context.state.clone(),
            grade: i.context.grade,
            year: i.context.year,
            p_value: i.p_value,
        }
    }
}

/// Parses and validates a bank. Record order is preserved.
pub fn parse_item_bank(source: BankSource<'_>) -> Result<ItemBank> {
    match source {
        BankSource::Json(bytes) => parse_json(bytes),
        BankSource::CsvPair { passages, items } => parse_csv_pair(passages, items),
    }
}

fn parse_json(bytes: &[u8]) -> Result<ItemBank> {
    let text = std::str::from_utf8(bytes).map_err(|_| BankError::Utf8)?;
    let doc: Value = serde_json::from_str(text).map_err(|e| BankError::Document(e.to_string()))?;
    let Value::Object(mut top) = doc else {
        return Err(BankError::Document("top level must be an object".into()));
    };
    let mut take = |key: &str| match top.remove(key) {
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(BankError::Document(format!("`{key}` must be an array"))),
        None => Err(BankError::Document(format!("missing `{key}` array"))),
    };
    let raw_passages = take("passages")?;
    let raw_items = take("items")?;

    let passages = raw_passages
        .into_iter()
        .enumerate()
        .map(|(i, v)| record::<PassageRecord>(RecordKind::Passage, i, v).map(Passage::from))
        .collect::<Result<Vec<_>>>()?;
    let items = raw_items
        .into_iter()
        .enumerate()
        .map(|(i, v)| record::<ItemRecord>(RecordKind::Item, i, v).map(Item::from))
        .collect::<Result<Vec<_>>>()?;
    ItemBank::new(passages, items)
}

fn record<T: DeserializeOwned>(kind: RecordKind, index: usize, value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let field = if path == "." {
            // missing fields are reported at the record root
            message
                .split('`')
                .nth(1)
                .map_or_else(|| "<record>".to_string(), str::to_string)
        } else {
            path
        };
        BankError::Field {
            kind,
            index,
            field,
            message,
        }
    })
}

/// Header-indexed view of one CSV record.
struct Row<'a> {
    kind: RecordKind,
    index: usize,
    columns: &'a HashMap<String, usize>,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> BankError {
        BankError::Field {
            kind: self.kind,
            index: self.index,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn str(&self, field: &str) -> Result<String> {
        let at = *self
            .columns
            .get(field)
            .ok_or_else(|| self.err(field, "column missing from header"))?;
        self.record
            .get(at)
            .map(str::to_string)
            .ok_or_else(|| self.err(field, "cell missing"))
    }

    fn parse<T: std::str::FromStr>(&self, field: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(field)?;
        raw.trim()
            .parse()
            .map_err(|e| self.err(field, format!("`{raw}`: {e}")))
    }

    fn bool(&self, field: &str) -> Result<bool> {
        let raw = self.str(field)?;
        match raw.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "y" => Ok(true),
            "0" | "false" | "no" | "n" => Ok(false),
            _ => Err(self.err(field, format!("`{raw}` is not a boolean"))),
        }
    }
}

fn csv_rows(bytes: &[u8], kind: RecordKind) -> Result<(HashMap<String, usize>, Vec<csv::StringRecord>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| BankError::Utf8)?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let columns = reader
        .headers()
        .map_err(|e| BankError::Document(format!("{kind} header: {e}")))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| BankError::Document(format!("{kind} rows: {e}")))?;
    Ok((columns, records))
}

fn parse_csv_pair(passages: &[u8], items: &[u8]) -> Result<ItemBank> {
    let (pcols, prows) = csv_rows(passages, RecordKind::Passage)?;
    let passages = prows
        .iter()
        .enumerate()
        .map(|(index, record)| {
            let row = Row {
                kind: RecordKind::Passage,
                index,
                columns: &pcols,
                record,
            };
            Ok(Passage {
                passage_id: row.str("passage_id")?,
                text: row.str("text")?,
                has_highlight: row.bool("has_highlight")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (icols, irows) = csv_rows(items, RecordKind::Item)?;
    let items = irows
        .iter()
        .enumerate()
        .map(|(index, record)| {
            let row = Row {
                kind: RecordKind::Item,
                index,
                columns: &icols,
                record,
            };
            let wrong_raw = row.str("wrong_options")?;
            let wrong_options: Vec<String> = serde_json::from_str(&wrong_raw)
                .map_err(|e| row.err("wrong_options", format!("expected a JSON array of strings: {e}")))?;
            Ok(Item {
                item_id: row.str("item_id")?,
                passage_id: row.str("passage_id")?,
                question_text: row.str("question_text")?,
                correct_option: row.str("correct_option")?,
                wrong_options,
                item_order: row.parse("item_order")?,
                ques_text_ref: row.bool("ques_text_ref")?,
                ques_text_highlight: row.bool("ques_text_highlight")?,
                context: Context {
                    state: row.str("state")?,
                    grade: row.parse("grade")?,
                    year: row.parse("year")?,
                },
                p_value: row.parse("p_value")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ItemBank::new(passages, items)
}

#[derive(Serialize)]
struct Document {
    passages: Vec<PassageRecord>,
    items: Vec<ItemRecord>,
}

impl ItemBank {
    /// Pretty-printed JSON in the documented layout.
    pub fn to_json(&self) -> String {
        let doc = Document {
            passages: self
                .passages
                .iter()
                .map(|p| PassageRecord {
                    passage_id: p.passage_id.clone(),
                    text: p.text.clone(),
                    has_highlight: p.has_highlight,
                })
                .collect(),
            items: self.items.iter().map(ItemRecord::from).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("bank serializes")
    }

    /// `(passages.csv, items.csv)` contents.
    pub fn to_csv_pair(&self) -> (String, String) {
        let mut pw = csv::Writer::from_writer(Vec::new());
        pw.write_record(["passage_id", "text", "has_highlight"]).expect("in-memory write");
        for p in &self.passages {
            pw.write_record([&p.passage_id, &p.text, &p.has_highlight.to_string()])
                .expect("in-memory write");
        }
        let mut iw = csv::Writer::from_writer(Vec::new());
        iw.write_record([
            "item_id",
            "passage_id",
            "question_text",
            "correct_option",
            "wrong_options",
            "item_order",
            "ques_text_ref",
            "ques_text_highlight",
            "state",
            "grade",
            "year",
            "p_value",
        ])
        .expect("in-memory write");
        for i in &self.items {
            iw.write_record([
                i.item_id.clone(),
                i.passage_id.clone(),
                i.question_text.clone(),
                i.correct_option.clone(),
                serde_json::to_string(&i.wrong_options).expect("strings serialize"),
                i.item_order.to_string(),
                i.ques_text_ref.to_string(),
                i.ques_text_highlight.to_string(),
                i.context.state.clone(),
                i.context.grade.to_string(),
                i.context.year.to_string(),
                i.p_value.to_string(),
            ])
            .expect("in-memory write");
        }
        let finish = |w: csv::Writer<Vec<u8>>| String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        (finish(pw), finish(iw))
    }

    /// Writes `passages.csv` and `items.csv` into `dir`.
    pub fn write_csv_pair(&self, dir: &std::path::Path) -> Result<()> {
        let (p, i) = self.to_csv_pair();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("passages.csv"), p)?;
        std::fs::write(dir.join("items.csv"), i)?;
        Ok(())
    }
}
