//! Tokenization and n-gram extraction.
//!
//! Two token levels feed the feature builders: lowercased word tokens and
//! byte-level subword tokens produced by a merge table in the format
//! published with the GPT-2 model. Sentence and syllable counting for the
//! readability metrics also lives here.

mod bpe;
mod text;

pub use bpe::{byte_shim_table, MergeTable};
pub use text::{count_syllables, split_sentences, word_tokenize};

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse vocabulary file {path}: {source}")]
    VocabJson {
        path: String,
        source: serde_json::Error,
    },
    #[error("malformed merge line {line}: {content:?}")]
    MalformedMergeLine { line: usize, content: String },
    #[error("merge line {line} references unknown symbol {symbol:?}")]
    UnknownMergeSymbol { line: usize, symbol: String },
    #[error("duplicate merge pair at line {line}")]
    DuplicateMergePair { line: usize },
    #[error("duplicate vocabulary id {id}")]
    DuplicateVocabId { id: u32 },
    #[error("n-gram level mismatch: spec wants {expected:?}, tokens are {got:?}")]
    LevelMismatch { expected: TokenLevel, got: TokenLevel },
    #[error("cannot decode token character {ch:?}: not in the byte map")]
    DecodeUnknownChar { ch: char },
}

/// Which tokenizer produced a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenLevel {
    Word,
    Subword,
}

impl std::fmt::Display for TokenLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TokenLevel::Word => write!(f, "word"),
            TokenLevel::Subword => write!(f, "token"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub level: TokenLevel,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Which n-gram orders to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NgramOrders {
    Unigram,
    UnigramBigram,
}

impl NgramOrders {
    pub fn includes_bigrams(self) -> bool {
        matches!(self, NgramOrders::UnigramBigram)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct NgramSpec {
    pub orders: NgramOrders,
    pub level: TokenLevel,
}

/// Exact n-gram occurrence counts. Bigram keys are the two tokens joined
/// by a single space (tokens themselves never contain a raw space).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NgramMultiset {
    pub counts: HashMap<String, u32>,
}

impl NgramMultiset {
    pub fn get(&self, key: &str) -> u32 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }
}

/// Visit every n-gram of `tokens` in left-to-right order: all unigrams
/// first-to-last interleaved with the bigram ending at each position.
pub fn for_each_ngram<F: FnMut(&str)>(tokens: &[String], orders: NgramOrders, mut f: F) {
    for (i, tok) in tokens.iter().enumerate() {
        f(tok);
        if orders.includes_bigrams() && i + 1 < tokens.len() {
            let bigram = format!("{} {}", tok, tokens[i + 1]);
            f(&bigram);
        }
    }
}

pub fn extract_ngrams(
    tokens: &TokenSequence,
    spec: &NgramSpec,
) -> Result<NgramMultiset, TokenizeError> {
    if tokens.level != spec.level {
        return Err(TokenizeError::LevelMismatch {
            expected: spec.level,
            got: tokens.level,
        });
    }
    let mut counts: HashMap<String, u32> = HashMap::new();
    for_each_ngram(&tokens.tokens, spec.orders, |key| {
        if let Some(c) = counts.get_mut(key) {
            *c += 1;
        } else {
            counts.insert(key.to_string(), 1);
        }
    });
    Ok(NgramMultiset { counts })
}
