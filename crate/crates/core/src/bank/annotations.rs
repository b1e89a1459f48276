//! Respondent-context and test-design columns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ItemBank;
use crate::features::{FeatureTable, Provenance};

/// How grade enters the context columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradeEncoding {
    /// A single integer column `grade`.
    #[default]
    Numeric,
    /// One `grade_<g>` indicator per grade present in the bank.
    OneHot,
    Both,
}

/// Context columns, in this order: `state_<S>` for each state (sorted),
/// `year_<Y>` for each year (ascending), then `grade` and/or `grade_<g>`.
///
/// Only values present in the bank get a column, so a single-state bank
/// yields one constant `state_<S>` column; it is reported by
/// [`FeatureTable::zero_variance_columns`].
pub fn context_features(bank: &ItemBank, grade: GradeEncoding) -> FeatureTable {
    let items = bank.items();
    let states: BTreeSet<&str> = items.iter().map(|i| i.context.state.as_str()).collect();
    let years: BTreeSet<i32> = items.iter().map(|i| i.context.year).collect();
    let grades: BTreeSet<u8> = items.iter().map(|i| i.context.grade).collect();
    let numeric = matches!(grade, GradeEncoding::Numeric | GradeEncoding::Both);
    let one_hot = matches!(grade, GradeEncoding::OneHot | GradeEncoding::Both);

    let mut names: Vec<String> = states.iter().map(|s| format!("state_{s}")).collect();
    names.extend(years.iter().map(|y| format!("year_{y}")));
    if numeric {
        names.push("grade".into());
    }
    if one_hot {
        names.extend(grades.iter().map(|g| format!("grade_{g}")));
    }

    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    let mut values = Vec::with_capacity(items.len() * names.len());
    for item in items {
        let ctx = &item.context;
        values.extend(states.iter().map(|s| indicator(*s == ctx.state)));
        values.extend(years.iter().map(|y| indicator(*y == ctx.year)));
        if numeric {
            values.push(f64::from(ctx.grade));
        }
        if one_hot {
            values.extend(grades.iter().map(|g| indicator(*g == ctx.grade)));
        }
    }
    FeatureTable::new(bank.item_ids(), names, Provenance::Native, values)
        .expect("context columns are well-formed")
}

pub const TEST_FEATURE_COLUMNS: [&str; 4] = [
    "item_order",
    "pass_highlight_yn",
    "ques_text_ref_yn",
    "ques_text_highlight_yn",
];

/// Test-design columns: item order and the three 0/1 annotation indicators.
/// The passage highlight flag is broadcast to every item on the passage.
pub fn test_features(bank: &ItemBank) -> FeatureTable {
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    let values = bank
        .items()
        .iter()
        .flat_map(|item| {
            [
                f64::from(item.item_order),
                indicator(bank.passage_of(item).has_highlight),
                indicator(item.ques_text_ref),
                indicator(item.ques_text_highlight),
            ]
        })
        .collect();
    FeatureTable::new(
        bank.item_ids(),
        TEST_FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        Provenance::Native,
        values,
    )
    .expect("test columns are well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::tests::{item, passage};
    use crate::bank::Item;

    fn with_ctx(id: &str, state: &str, grade: u8, year: i32) -> Item {
        let mut it = item(id, "p");
        it.context.state = state.into();
        it.context.grade = grade;
        it.context.year = year;
        it
    }

    #[test]
    fn one_hot_state_and_year() {
        let bank = ItemBank::new(
            vec![passage("p")],
            vec![with_ctx("a", "NY", 3, 2018), with_ctx("b", "TX", 5, 2019)],
        )
        .unwrap();
        let t = context_features(&bank, GradeEncoding::Numeric);
        assert_eq!(t.column_names(), vec!["state_NY", "state_TX", "year_2018", "year_2019", "grade"]);
        assert_eq!(t.row(0), &[1.0, 0.0, 1.0, 0.0, 3.0]);
        assert_eq!(t.row(1), &[0.0, 1.0, 0.0, 1.0, 5.0]);
        let both = context_features(&bank, GradeEncoding::Both);
        assert_eq!(both.column_names()[4..], ["grade", "grade_3", "grade_5"]);
        assert_eq!(both.row(1)[4..], [5.0, 0.0, 1.0]);
    }

    #[test]
    fn single_state_is_constant() {
        let bank = ItemBank::new(
            vec![passage("p")],
            vec![with_ctx("a", "NY", 3, 2018), with_ctx("b", "NY", 8, 2018)],
        )
        .unwrap();
        let t = context_features(&bank, GradeEncoding::OneHot);
        assert_eq!(t.zero_variance_columns(), vec!["state_NY", "year_2018"]);
        // only the grade columns differ between the two rows
        let differing: Vec<&str> = (0..t.ncols())
            .filter(|&c| t.get(0, c) != t.get(1, c))
            .map(|c| t.columns()[c].name.as_str())
            .collect();
        assert_eq!(differing, vec!["grade_3", "grade_8"]);
    }

    #[test]
    fn test_feature_indicators() {
        let mut hl = passage("h");
        hl.has_highlight = true;
        let mut a = item("a", "p");
        a.item_order = 4;
        a.ques_text_ref = true;
        a.ques_text_highlight = true;
        let b = item("b", "p");
        let c = item("c", "h");
        let d = item("d", "h");
        let bank = ItemBank::new(vec![passage("p"), hl], vec![a, b, c, d]).unwrap();
        let t = test_features(&bank);
        assert_eq!(t.column_names(), TEST_FEATURE_COLUMNS);
        assert_eq!(t.row(0), &[4.0, 0.0, 1.0, 1.0]);
        assert_eq!(t.row(1), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.row(2)[1], 1.0);
        assert_eq!(t.row(3)[1], 1.0);
    }
}
