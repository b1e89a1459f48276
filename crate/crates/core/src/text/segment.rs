//! Rule-based segmentation into paragraphs, sentences and words.
//!
//! * Paragraphs are separated by one or more blank lines.
//! * A sentence ends at `.`, `!` or `?`, except a `.` directly followed by a
//!   letter or digit (`3.5`, `e.g`) or one closing a guarded abbreviation
//!   (`Dr.`, `Mrs.`, ...).
//! * A word is a run of letters and digits, optionally joined by internal
//!   apostrophes or hyphens (`don't`, `well-known`); digits may also be
//!   joined by `.` or `,` (`3.5`, `1,000`).
//! * Syllables are groups of consecutive vowels (`aeiouy`) with a trailing
//!   silent `e` dropped, except after a consonant in a final `le`; every word
//!   has at least one. Hyphenated words sum their parts.

use super::{Result, TextError};

/// Lowercased abbreviations that do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "jan", "feb", "mar", "apr",
    "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "no", "gen", "gov", "capt", "lt", "col",
    "sgt", "rev", "ave", "blvd", "e.g", "i.e",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub text: String,
    pub letters: usize,
    pub syllables: usize,
}

impl Word {
    pub fn new(text: &str) -> Self {
        Self {
            text: text.to_string(),
            letters: text.chars().filter(|c| c.is_alphanumeric()).count(),
            syllables: syllables(text),
        }
    }

    pub fn lower(&self) -> String {
        self.text.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub words: Vec<Word>,
}

/// A segmented text. Every paragraph has at least one sentence and every
/// sentence at least one word.
#[derive(Debug, Clone, PartialEq)]
pub struct TextUnits {
    pub paragraphs: Vec<Vec<Sentence>>,
}

impl TextUnits {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flatten()
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.sentences().flat_map(|s| s.words.iter())
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.paragraphs.iter().map(Vec::len).sum()
    }

    pub fn word_count(&self) -> usize {
        self.sentences().map(|s| s.words.len()).sum()
    }

    pub fn syllable_count(&self) -> usize {
        self.words().map(|w| w.syllables).sum()
    }
}

pub fn segment(text: &str) -> Result<TextUnits> {
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut paragraphs = Vec::new();
    let mut current = String::new();
    for line in text.split('\n') {
        if line.trim().is_empty() {
            push_paragraph(&mut paragraphs, &current);
            current.clear();
        } else {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(line);
        }
    }
    push_paragraph(&mut paragraphs, &current);
    if paragraphs.is_empty() {
        return Err(TextError::NoWords);
    }
    Ok(TextUnits { paragraphs })
}

fn push_paragraph(out: &mut Vec<Vec<Sentence>>, text: &str) {
    let sentences = split_sentences(text);
    if !sentences.is_empty() {
        out.push(sentences);
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}' | '\u{2011}')
}

fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut words: Vec<Word> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric()
                    || (is_joiner(chars[i])
                        && i + 1 < chars.len()
                        && chars[i + 1].is_alphanumeric()
                        && chars[i - 1].is_alphanumeric())
                    || (matches!(chars[i], '.' | ',')
                        && i + 1 < chars.len()
                        && chars[i + 1].is_ascii_digit()
                        && chars[i - 1].is_ascii_digit()))
            {
                i += 1;
            }
            let token: String = chars[start..i].iter().collect();
            words.push(Word::new(&token));
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            let glued = c == '.' && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            let guarded = c == '.' && glued_abbreviation(&chars, i, words.last());
            if !glued && !guarded && !words.is_empty() {
                sentences.push(Sentence {
                    words: std::mem::take(&mut words),
                });
            }
        }
        i += 1;
    }
    if !words.is_empty() {
        sentences.push(Sentence { words });
    }
    sentences
}

/// Whether the `.` at `dot` closes an abbreviation in the guard list.
fn glued_abbreviation(chars: &[char], dot: usize, last: Option<&Word>) -> bool {
    let Some(last) = last else { return false };
    // the word must end right before the dot
    let end = dot;
    let len = last.text.chars().count();
    if end < len || chars[end - len..end].iter().collect::<String>() != last.text {
        return false;
    }
    let lower = last.lower();
    // "e.g." and "i.e.": the previous token is joined through dots
    let dotted = if end >= len + 2 && chars[end - len - 1] == '.' {
        let prev: String = chars[end - len - 2..end - len - 1].iter().collect();
        format!("{}.{}", prev.to_lowercase(), lower)
    } else {
        String::new()
    };
    ABBREVIATIONS.contains(&lower.as_str()) || ABBREVIATIONS.contains(&dotted.as_str())
}

/// Vowel-group syllable count; see the module docs.
pub fn syllables(word: &str) -> usize {
    word.split(|c| is_joiner(c) && c != '\'' && c != '\u{2019}')
        .filter(|p| p.chars().any(char::is_alphanumeric))
        .map(part_syllables)
        .sum::<usize>()
        .max(1)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn part_syllables(part: &str) -> usize {
    let letters: Vec<char> = part
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let mut groups = 0usize;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    if n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(t: &TextUnits) -> Vec<usize> {
        t.paragraphs.iter().map(Vec::len).collect()
    }

    #[test]
    fn cat_sentence() {
        let t = segment("The cat sat on the mat.").unwrap();
        assert_eq!(shape(&t), vec![1]);
        assert_eq!(t.word_count(), 6);
        assert_eq!(t.syllable_count(), 6);
        assert_eq!(t.words().map(|w| w.letters).sum::<usize>(), 17);
    }

    #[test]
    fn paragraphs_and_terminators() {
        let t = segment("A b. C d!\n\nE f?").unwrap();
        assert_eq!(shape(&t), vec![2, 1]);
        let t = segment("One line\nstill same paragraph.\n \n\n\nNext.").unwrap();
        assert_eq!(shape(&t), vec![1, 1]);
    }

    #[test]
    fn abbreviation_guard() {
        let t = segment("Dr. Smith left.").unwrap();
        assert_eq!(t.sentence_count(), 1);
        assert_eq!(t.word_count(), 3);
        let t = segment("Bring fruit, e.g. apples. Then go.").unwrap();
        assert_eq!(t.sentence_count(), 2);
        let t = segment("It cost 3.5 dollars. Wow!").unwrap();
        assert_eq!(t.sentence_count(), 2);
        assert_eq!(t.sentences().next().unwrap().words.len(), 4);
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert_eq!(segment("... !!! \n\n ?"), Err(TextError::NoWords));
        assert_eq!(segment(""), Err(TextError::NoWords));
        // stray terminators do not make empty sentences
        assert_eq!(segment("Hi!!! ... Bye?!").unwrap().sentence_count(), 2);
    }

    #[test]
    fn word_joiners() {
        let t = segment("Don't use well-known rock-'n'-roll -dashes- here").unwrap();
        let words: Vec<&str> = t.words().map(|w| w.text.as_str()).collect();
        assert_eq!(words, vec!["Don't", "use", "well-known", "rock", "n", "roll", "dashes", "here"]);
        assert_eq!(t.words().next().unwrap().letters, 4);
    }

    #[test]
    fn syllable_rules() {
        let cases = [
            ("the", 1),
            ("cake", 1),
            ("table", 2),
            ("little", 2),
            ("whale", 1),
            ("reading", 2),
            ("beautiful", 3),
            ("rhythm", 1),
            ("yes", 1),
            ("queue", 1),
            ("apple", 2),
            ("be", 1),
            ("well-known", 2),
            ("2018", 1),
            ("don't", 1),
            ("cat's", 1),
            ("Comprehension", 4),
        ];
        for (w, n) in cases {
            assert_eq!(syllables(w), n, "{w}");
        }
    }
}
