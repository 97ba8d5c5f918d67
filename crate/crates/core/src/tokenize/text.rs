//! Word tokenization, sentence splitting and syllable counting.
//!
//! These heuristics are deliberately frozen: the readability metrics built
//! on top of them are only reproducible if the counting rules never move.

use std::ops::Range;

use super::{TokenLevel, TokenSequence};

/// Lowercases, then splits on maximal runs of Unicode letters, digits and
/// apostrophes. Runs containing no letter or digit (stray apostrophes) are
/// discarded along with all other punctuation.
pub fn word_tokenize(text: &str) -> TokenSequence {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lowered.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else if !current.is_empty() {
            push_word(&mut tokens, std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        push_word(&mut tokens, current);
    }
    TokenSequence {
        tokens,
        level: TokenLevel::Word,
    }
}

fn push_word(tokens: &mut Vec<String>, word: String) {
    if word.chars().any(|c| c.is_alphanumeric()) {
        tokens.push(word);
    }
}

/// Abbreviations whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "rev", "gen", "sen", "rep", "hon", "vs",
    "etc", "al", "eg", "ie", "cf", "ca", "fig", "figs", "eq", "eqs", "sec", "secs", "no", "nos",
    "vol", "vols", "inc", "ltd", "co", "corp", "dept", "univ", "est", "approx", "resp",
];

/// Splits into sentence byte spans. A boundary is a `.`, `!` or `?`
/// followed by whitespace or end of text; a `.` is suppressed when the
/// word before it is a known abbreviation, or when it looks like a dotted
/// acronym (single letter preceded by another period). Non-empty text
/// yields at least one sentence.
pub fn split_sentences(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;

    for i in 0..n {
        let (pos, c) = chars[i];
        if start.is_none() && !c.is_whitespace() {
            start = Some(pos);
        }
        let terminator = matches!(c, '.' | '!' | '?');
        if !terminator || start.is_none() {
            continue;
        }
        let at_end = i + 1 == n;
        let before_space = !at_end && chars[i + 1].1.is_whitespace();
        if !(at_end || before_space) {
            continue;
        }
        if c == '.' && period_is_guarded(&chars, i) {
            continue;
        }
        let end = pos + c.len_utf8();
        spans.push(start.take().unwrap()..end);
    }

    // trailing text without a terminator still counts as a sentence
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push(s..end);
        }
    }
    spans
}

fn period_is_guarded(chars: &[(usize, char)], dot: usize) -> bool {
    let mut j = dot;
    while j > 0 && chars[j - 1].1.is_alphabetic() {
        j -= 1;
    }
    let word: String = chars[j..dot].iter().map(|&(_, c)| c).collect();
    if word.is_empty() {
        return false;
    }
    let lowered = word.to_lowercase();
    if ABBREVIATIONS.contains(&lowered.as_str()) {
        return true;
    }
    // dotted acronym like "U.S." (single letter right after a period)
    word.chars().count() == 1 && j > 0 && chars[j - 1].1 == '.'
}

/// Heuristic syllable count: maximal vowel groups (`aeiouy`), minus one
/// for a terminal silent `e` (where an `e` ending a consonant + `le`
/// cluster is not silent) with a floor of 1.
pub fn count_syllables(word: &str) -> u32 {
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');

    let mut groups = 0u32;
    let mut in_group = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }

    let n = chars.len();
    if groups > 1 && chars.last() == Some(&'e') {
        let consonant_le =
            n >= 3 && chars[n - 2] == 'l' && !is_vowel(chars[n - 3]) && chars[n - 3] != 'l';
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}
