use std::collections::HashSet;

use super::TextUnits;

/// Named metric values in a fixed column order.
pub type Metrics = Vec<(&'static str, f64)>;

/// Population mean and standard deviation. Empty input gives (0, 0).
pub(crate) fn mean_sd(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const DESCRIPTIVE_COLUMNS: [&str; 11] = [
    "PassageWordCount",
    "DESPC",
    "DESSC",
    "DESPL",
    "DESPLd",
    "DESSL",
    "DESSLd",
    "DESWLsy",
    "DESWLsyd",
    "DESWLlt",
    "DESWLltd",
];

/// Counts, and means with population standard deviations of paragraph
/// length (sentences), sentence length (words) and word length (syllables,
/// letters).
pub fn descriptive_metrics(units: &TextUnits) -> Metrics {
    let (pl, pld) = mean_sd(units.paragraphs.iter().map(|p| p.len() as f64));
    let (sl, sld) = mean_sd(units.sentences().map(|s| s.words.len() as f64));
    let (sy, syd) = mean_sd(units.words().map(|w| w.syllables as f64));
    let (lt, ltd) = mean_sd(units.words().map(|w| w.letters as f64));
    let values = [
        units.word_count() as f64,
        units.paragraph_count() as f64,
        units.sentence_count() as f64,
        pl,
        pld,
        sl,
        sld,
        sy,
        syd,
        lt,
        ltd,
    ];
    DESCRIPTIVE_COLUMNS.into_iter().zip(values).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readability {
    /// Same value as `rdfkgl`.
    pub fk: f64,
    pub rdfre: f64,
    pub rdfkgl: f64,
}

impl Readability {
    pub fn metrics(&self) -> Metrics {
        vec![("FK", self.fk), ("RDFRE", self.rdfre), ("RDFKGL", self.rdfkgl)]
    }
}

/// Flesch reading ease and Flesch-Kincaid grade level.
pub fn flesch_kincaid(units: &TextUnits) -> Readability {
    let words = units.word_count() as f64;
    let wps = words / units.sentence_count() as f64;
    let spw = units.syllable_count() as f64 / words;
    let rdfkgl = 0.39 * wps + 11.8 * spw - 15.59;
    let rdfre = 206.835 - 1.015 * wps - 84.6 * spw;
    Readability {
        fk: rdfkgl,
        rdfre,
        rdfkgl,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalDiversity {
    pub ldttra: f64,
    /// `None` when every token is on the stoplist.
    pub ldttrc: Option<f64>,
}

/// Type-token ratios over lowercased word forms: all words, and words not on
/// the function-word stoplist.
pub fn lexical_diversity(units: &TextUnits, stoplist: &HashSet<String>) -> LexicalDiversity {
    let tokens: Vec<String> = units.words().map(|w| w.lower()).collect();
    let ratio = |toks: &[&String]| {
        let types: HashSet<&&String> = toks.iter().collect();
        types.len() as f64 / toks.len() as f64
    };
    let all: Vec<&String> = tokens.iter().collect();
    let content: Vec<&String> = tokens.iter().filter(|t| !stoplist.contains(*t)).collect();
    LexicalDiversity {
        ldttra: ratio(&all),
        ldttrc: (!content.is_empty()).then(|| ratio(&content)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::segment;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn get(m: &Metrics, name: &str) -> f64 {
        m.iter().find(|(n, _)| *n == name).unwrap().1
    }

    #[test]
    fn cat_descriptives() {
        let m = descriptive_metrics(&segment("The cat sat on the mat.").unwrap());
        assert_eq!(get(&m, "DESPC"), 1.0);
        assert_eq!(get(&m, "DESSC"), 1.0);
        assert_eq!(get(&m, "DESSL"), 6.0);
        assert_eq!(get(&m, "DESWLsy"), 1.0);
        // 3+3+3+2+3+3 letters
        assert_relative_eq!(get(&m, "DESWLlt"), 17.0 / 6.0, epsilon = 1e-15);
        assert_eq!(get(&m, "DESSLd"), 0.0);
        assert_eq!(get(&m, "DESPLd"), 0.0);
    }

    #[test]
    fn repeated_sentence() {
        let m = descriptive_metrics(&segment("The dog ran. The dog ran.").unwrap());
        assert_eq!(get(&m, "DESPL"), 2.0);
        assert_eq!(get(&m, "DESSLd"), 0.0);
        assert_eq!(get(&m, "PassageWordCount"), 6.0);
    }

    #[test]
    fn population_sd() {
        // sentence lengths 1 and 3
        let m = descriptive_metrics(&segment("Go. We go home.").unwrap());
        assert_eq!(get(&m, "DESSL"), 2.0);
        assert_eq!(get(&m, "DESSLd"), 1.0);
    }

    #[test]
    fn cat_readability() {
        let r = flesch_kincaid(&segment("The cat sat on the mat.").unwrap());
        assert_relative_eq!(r.rdfkgl, 0.39 * 6.0 + 11.8 - 15.59, epsilon = 1e-12);
        assert_relative_eq!(r.rdfkgl, -1.45, epsilon = 1e-12);
        assert_relative_eq!(r.rdfre, 116.145, epsilon = 1e-12);
        assert_eq!(r.fk, r.rdfkgl);
    }

    #[test]
    fn grade_level_formula() {
        // 10 words per sentence, 15 syllables per 10 words
        let text = "Table table table table table cat cat cat cat cat.";
        let u = segment(text).unwrap();
        assert_eq!((u.word_count(), u.syllable_count()), (10, 15));
        assert_relative_eq!(flesch_kincaid(&u).rdfkgl, 6.01, epsilon = 1e-12);
    }

    #[test]
    fn type_token_ratios() {
        let stop: HashSet<String> = ["the".to_string()].into();
        let l = lexical_diversity(&segment("a a a a").unwrap(), &stop);
        assert_eq!(l.ldttra, 0.25);
        let l = lexical_diversity(&segment("One two three four five.").unwrap(), &stop);
        assert_eq!(l.ldttra, 1.0);
        let l = lexical_diversity(&segment("the cat the dog").unwrap(), &stop);
        assert_eq!(l.ldttra, 0.75);
        assert_eq!(l.ldttrc, Some(1.0));
        let l = lexical_diversity(&segment("The the THE").unwrap(), &stop);
        assert_eq!(l.ldttrc, None);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        let word = prop::sample::select(vec![
            "cat", "table", "the", "reading", "Dr", "because", "beautiful", "go", "well-known", "it's", "3.5",
        ]);
        let sentence = (prop::collection::vec(word, 1..8), prop::sample::select(vec![".", "!", "?"]))
            .prop_map(|(w, end)| format!("{}{}", w.join(" "), end));
        let paragraph = prop::collection::vec(sentence, 1..4).prop_map(|s| s.join(" "));
        prop::collection::vec(paragraph, 1..4).prop_map(|p| p.join("\n\n"))
    }

    proptest! {
        #[test]
        fn means_match_flattened_recount(text in arb_text()) {
            let u = segment(&text).unwrap();
            let m = descriptive_metrics(&u);
            let words: Vec<&crate::text::segment::Word> = u.words().collect();
            let sents: Vec<usize> = u.sentences().map(|s| s.words.len()).collect();
            prop_assert_eq!(get(&m, "PassageWordCount") as usize, sents.iter().sum::<usize>());
            prop_assert_eq!(words.len(), sents.iter().sum::<usize>());
            let n = words.len() as f64;
            let sy = words.iter().map(|w| w.syllables as f64).sum::<f64>() / n;
            let lt = words.iter().map(|w| w.letters as f64).sum::<f64>() / n;
            prop_assert!((get(&m, "DESWLsy") - sy).abs() < 1e-12);
            prop_assert!((get(&m, "DESWLlt") - lt).abs() < 1e-12);
            let sl = sents.iter().sum::<usize>() as f64 / sents.len() as f64;
            prop_assert!((get(&m, "DESSL") - sl).abs() < 1e-12);
            prop_assert!(words.iter().all(|w| w.letters >= 1 && w.syllables >= 1));
        }

        #[test]
        fn duplication_keeps_ratios(text in arb_text()) {
            let once = segment(&text).unwrap();
            let twice = segment(&format!("{text}\n\n{text}")).unwrap();
            let (a, b) = (descriptive_metrics(&once), descriptive_metrics(&twice));
            for ((name, x), (_, y)) in a.iter().zip(&b) {
                if matches!(*name, "PassageWordCount" | "DESPC" | "DESSC") {
                    prop_assert_eq!(2.0 * x, *y);
                } else {
                    prop_assert!((x - y).abs() < 1e-9, "{} {} {}", name, x, y);
                }
            }
            let (ra, rb) = (flesch_kincaid(&once), flesch_kincaid(&twice));
            prop_assert!((ra.rdfre - rb.rdfre).abs() < 1e-9);
            prop_assert!((ra.rdfkgl - rb.rdfkgl).abs() < 1e-9);
        }

        #[test]
        fn ttr_in_unit_interval(text in arb_text()) {
            let l = lexical_diversity(&segment(&text).unwrap(), &HashSet::new());
            prop_assert!(l.ldttra > 0.0 && l.ldttra <= 1.0);
        }

        #[test]
        fn reading_ease_falls_with_syllables(n in 2usize..20, k in 0usize..19) {
            // same sentence length, one more two-syllable word
            let k = k.min(n - 1);
            let text = |long: usize| {
                let words: Vec<&str> = (0..n).map(|i| if i < long { "table" } else { "cat" }).collect();
                format!("{}.", words.join(" "))
            };
            let a = flesch_kincaid(&segment(&text(k)).unwrap());
            let b = flesch_kincaid(&segment(&text(k + 1)).unwrap());
            prop_assert!(b.rdfre < a.rdfre);
            prop_assert!(b.rdfkgl > a.rdfkgl);
        }
    }

}
