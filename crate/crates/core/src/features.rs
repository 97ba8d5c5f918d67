//! The thirteen prompt feature vectorizations: twelve n-gram weightings
//! (unigrams or unigrams+bigrams, word or token level, TF / TF-IDF /
//! Presence) plus one readability-and-diversity vector (Flesch Reading
//! Ease, Gunning Fog, SMOG, Yule's K).
//!
//! Vocabularies, document frequencies and readability standardization
//! statistics are fitted on the training split only by default, so test
//! metrics stay leakage-free; `FitScope::AllSplits` switches to
//! whole-dataset fitting.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BenchmarkDataset, SplitAssignment};
use crate::exec;
use crate::tokenize::{
    count_syllables, for_each_ngram, split_sentences, word_tokenize, MergeTable, NgramOrders,
    NgramSpec, TokenLevel, TokenSequence, TokenizeError,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("effective vocabulary is empty (no tokens in fitting prompts)")]
    EmptyVocabulary,
    #[error("split references id {id} not present in the dataset")]
    SplitIdUnknown { id: String },
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Tf,
    TfIdf,
    Presence,
}

/// One of the thirteen feature vectorizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSpec {
    Ngram {
        orders: NgramOrders,
        level: TokenLevel,
        weighting: Weighting,
    },
    Readability,
}

impl FeatureSpec {
    /// Short machine label, stable across runs (used as CSV column names).
    pub fn label(&self) -> String {
        match self {
            FeatureSpec::Ngram {
                orders,
                level,
                weighting,
            } => {
                let o = match orders {
                    NgramOrders::Unigram => "1gram",
                    NgramOrders::UnigramBigram => "12gram",
                };
                let w = match weighting {
                    Weighting::Tf => "tf",
                    Weighting::TfIdf => "tfidf",
                    Weighting::Presence => "presence",
                };
                format!("{o}-{level}-{w}")
            }
            FeatureSpec::Readability => "readability".to_string(),
        }
    }

    pub fn ngram_spec(&self) -> Option<NgramSpec> {
        match self {
            FeatureSpec::Ngram { orders, level, .. } => Some(NgramSpec {
                orders: *orders,
                level: *level,
            }),
            FeatureSpec::Readability => None,
        }
    }
}

impl std::fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureSpec::Ngram {
                orders,
                level,
                weighting,
            } => {
                let o = match orders {
                    NgramOrders::Unigram => "1-grams",
                    NgramOrders::UnigramBigram => "1+2-grams",
                };
                let w = match weighting {
                    Weighting::Tf => "TF",
                    Weighting::TfIdf => "TF-IDF",
                    Weighting::Presence => "Presence",
                };
                write!(f, "{o} {w}, {level}-level")
            }
            FeatureSpec::Readability => write!(f, "readability and diversity metrics"),
        }
    }
}

/// The thirteen specs in their canonical order: the n-gram cross product
/// (orders outermost, then level, then weighting), readability last.
pub fn feature_catalog() -> Vec<FeatureSpec> {
    let mut catalog = Vec::with_capacity(13);
    for orders in [NgramOrders::Unigram, NgramOrders::UnigramBigram] {
        for level in [TokenLevel::Word, TokenLevel::Subword] {
            for weighting in [Weighting::Tf, Weighting::TfIdf, Weighting::Presence] {
                catalog.push(FeatureSpec::Ngram {
                    orders,
                    level,
                    weighting,
                });
            }
        }
    }
    catalog.push(FeatureSpec::Readability);
    catalog
}

/// N-gram key -> column bijection plus per-column document frequencies
/// from the fitting prompts.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    keys: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn column(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn key(&self, column: u32) -> &str {
        &self.keys[column as usize]
    }

    pub fn df(&self, column: u32) -> u32 {
        self.df[column as usize]
    }

    /// Smoothed idf, `ln((1 + n_docs) / (1 + df)) + 1`.
    pub fn idf(&self, column: u32) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[column as usize] as f64)).ln() + 1.0
    }
}

/// Sorted sparse (column, value) pairs; values are non-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    pub fn new(mut pairs: Vec<(u32, f64)>, dim: usize) -> Self {
        pairs.retain(|&(_, v)| v != 0.0);
        pairs.sort_unstable_by_key(|&(i, _)| i);
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(pairs.iter().all(|&(i, _)| (i as usize) < dim));
        Self {
            indices: pairs.iter().map(|&(i, _)| i).collect(),
            values: pairs.iter().map(|&(_, v)| v).collect(),
            dim,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, column: u32) -> f64 {
        match self.indices.binary_search(&column) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Rows of one feature spec over one split, aligned with instance ids.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub spec: FeatureSpec,
    pub ids: Vec<String>,
    pub rows: Vec<SparseVector>,
    pub dim: usize,
}

/// Which prompts fit the vocabulary, df counts and readability
/// standardization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitScope {
    #[serde(rename = "train")]
    TrainOnly,
    #[serde(rename = "all")]
    AllSplits,
}

impl std::fmt::Display for FitScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitScope::TrainOnly => write!(f, "train"),
            FitScope::AllSplits => write!(f, "all"),
        }
    }
}

/// Per-column readability standardization (train mean/std; zero-variance
/// columns are zeroed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: [f64; 4],
    pub stds: [f64; 4],
}

impl Standardizer {
    fn fit(rows: &[[f64; 4]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut means = [0.0; 4];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = [0.0; 4];
        for row in rows {
            for ((v, m), x) in vars.iter_mut().zip(&means).zip(row) {
                *v += (x - m) * (x - m);
            }
        }
        let mut stds = [0.0; 4];
        for ((s, v), m) in stds.iter_mut().zip(&vars).zip(&means) {
            let std = (v / n).sqrt();
            // a column that is constant up to rounding is constant
            *s = if std > 1e-9 * (1.0 + m.abs()) { std } else { 0.0 };
        }
        Self { means, stds }
    }

    pub fn apply(&self, raw: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            if self.stds[i] > 0.0 {
                out[i] = (raw[i] - self.means[i]) / self.stds[i];
            }
        }
        out
    }
}

/// Fits a vocabulary over the n-grams occurring in at least one fitting
/// prompt; columns are assigned in first-occurrence order and df counts
/// each prompt once per distinct n-gram.
pub fn fit_vocabulary(
    prompts: &[&str],
    spec: &NgramSpec,
    table: &MergeTable,
) -> Result<Vocabulary, FeatureError> {
    let token_seqs: Vec<TokenSequence> =
        exec::map_slice(prompts, |p| tokenize_for(spec.level, p, table));
    fit_vocabulary_tokens(token_seqs.iter(), spec.orders)
}

pub fn fit_vocabulary_tokens<'a, I>(
    token_seqs: I,
    orders: NgramOrders,
) -> Result<Vocabulary, FeatureError>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut keys: Vec<String> = Vec::new();
    let mut df: Vec<u32> = Vec::new();
    let mut seen_in_doc: Vec<u64> = Vec::new(); // doc stamp per column
    let mut n_docs = 0usize;
    for (doc, seq) in token_seqs.into_iter().enumerate() {
        n_docs = doc + 1;
        let stamp = doc as u64 + 1;
        for_each_ngram(&seq.tokens, orders, |key| {
            let col = if let Some(&col) = index.get(key) {
                col
            } else {
                let col = keys.len() as u32;
                index.insert(key.to_string(), col);
                keys.push(key.to_string());
                df.push(0);
                seen_in_doc.push(0);
                col
            };
            let c = col as usize;
            if seen_in_doc[c] != stamp {
                seen_in_doc[c] = stamp;
                df[c] += 1;
            }
        });
    }
    if keys.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    Ok(Vocabulary {
        index,
        keys,
        df,
        n_docs,
    })
}

pub fn tokenize_for(level: TokenLevel, text: &str, table: &MergeTable) -> TokenSequence {
    match level {
        TokenLevel::Word => word_tokenize(text),
        TokenLevel::Subword => table.encode(text),
    }
}

/// Vectorizes one prompt against a fitted vocabulary. Unseen n-grams are
/// dropped; TF-IDF rows are scaled to unit Euclidean norm (zero rows stay
/// zero).
pub fn vectorize(
    prompt: &str,
    vocab: &Vocabulary,
    spec: &NgramSpec,
    weighting: Weighting,
    table: &MergeTable,
) -> SparseVector {
    let tokens = tokenize_for(spec.level, prompt, table);
    vectorize_tokens(&tokens, vocab, spec.orders, weighting)
}

pub fn vectorize_tokens(
    tokens: &TokenSequence,
    vocab: &Vocabulary,
    orders: NgramOrders,
    weighting: Weighting,
) -> SparseVector {
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for_each_ngram(&tokens.tokens, orders, |key| {
        if let Some(col) = vocab.column(key) {
            *counts.entry(col).or_insert(0.0) += 1.0;
        }
    });
    let mut pairs: Vec<(u32, f64)> = match weighting {
        Weighting::Tf => counts.into_iter().collect(),
        Weighting::Presence => counts.into_keys().map(|c| (c, 1.0)).collect(),
        Weighting::TfIdf => counts
            .into_iter()
            .map(|(c, n)| (c, n * vocab.idf(c)))
            .collect(),
    };
    // sort before any reduction: map iteration order must not leak into
    // float results
    pairs.sort_unstable_by_key(|&(c, _)| c);
    if weighting == Weighting::TfIdf {
        let norm = pairs.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut pairs {
                *v /= norm;
            }
        }
    }
    SparseVector::new(pairs, vocab.dim())
}

/// Raw readability-and-diversity 4-vector (FRE, Fog, SMOG, Yule's K);
/// all zeros for a prompt with no words.
pub fn readability_vector(prompt: &str) -> [f64; 4] {
    let words = word_tokenize(prompt);
    let w = words.len() as f64;
    if words.is_empty() {
        return [0.0; 4];
    }
    let s = split_sentences(prompt).len().max(1) as f64;

    let mut syllables = 0u64;
    let mut complex_words = 0u64;
    for token in &words.tokens {
        let count = count_syllables(token);
        syllables += count as u64;
        if count >= 3 {
            complex_words += 1;
        }
    }
    let y = syllables as f64;
    let c = complex_words as f64;

    let fre = 206.835 - 1.015 * (w / s) - 84.6 * (y / w);
    let fog = 0.4 * (w / s + 100.0 * c / w);
    let smog = 1.0430 * (c * 30.0 / s).sqrt() + 3.1291;

    // Yule's K over the word-token frequency spectrum
    let mut type_counts: HashMap<&str, u64> = HashMap::new();
    for token in &words.tokens {
        *type_counts.entry(token).or_insert(0) += 1;
    }
    let sum_i2_vi: f64 = {
        let mut spectrum: HashMap<u64, u64> = HashMap::new();
        for &count in type_counts.values() {
            *spectrum.entry(count).or_insert(0) += 1;
        }
        spectrum
            .iter()
            .map(|(&i, &vi)| (i * i * vi) as f64)
            .sum()
    };
    let yule_k = 1e4 * (sum_i2_vi - w) / (w * w);

    [fre, fog, smog, yule_k]
}

/// Train/validation/test matrices of one spec sharing one vocabulary (or
/// one readability standardizer).
#[derive(Debug, Clone)]
pub struct SplitMatrices {
    pub train: FeatureMatrix,
    pub validation: FeatureMatrix,
    pub test: FeatureMatrix,
    pub vocab: Option<Vocabulary>,
    pub standardizer: Option<Standardizer>,
}

/// Tokenizes a dataset's prompts once per level so all thirteen specs can
/// be built without re-tokenizing. Immutable after construction.
pub struct MatrixBuilder<'a> {
    dataset: &'a BenchmarkDataset,
    splits: &'a SplitAssignment,
    scope: FitScope,
    split_positions: [Vec<usize>; 3],
    word_tokens: Vec<TokenSequence>,
    subword_tokens: Vec<TokenSequence>,
}

impl<'a> MatrixBuilder<'a> {
    pub fn new(
        dataset: &'a BenchmarkDataset,
        splits: &'a SplitAssignment,
        table: &MergeTable,
        scope: FitScope,
    ) -> Result<Self, FeatureError> {
        let resolve = |ids: &[String]| -> Result<Vec<usize>, FeatureError> {
            ids.iter()
                .map(|id| {
                    dataset
                        .position(id)
                        .ok_or_else(|| FeatureError::SplitIdUnknown { id: id.clone() })
                })
                .collect()
        };
        let split_positions = [
            resolve(&splits.train)?,
            resolve(&splits.validation)?,
            resolve(&splits.test)?,
        ];
        let word_tokens = exec::map_slice(&dataset.instances, |inst| word_tokenize(&inst.prompt));
        let subword_tokens =
            exec::map_slice(&dataset.instances, |inst| table.encode(&inst.prompt));
        Ok(Self {
            dataset,
            splits,
            scope,
            split_positions,
            word_tokens,
            subword_tokens,
        })
    }

    fn tokens(&self, level: TokenLevel) -> &[TokenSequence] {
        match level {
            TokenLevel::Word => &self.word_tokens,
            TokenLevel::Subword => &self.subword_tokens,
        }
    }

    fn fitting_positions(&self) -> Vec<usize> {
        match self.scope {
            FitScope::TrainOnly => self.split_positions[0].clone(),
            FitScope::AllSplits => {
                let mut all: Vec<usize> =
                    self.split_positions.iter().flatten().copied().collect();
                all.sort_unstable();
                all
            }
        }
    }

    pub fn build(&self, spec: &FeatureSpec) -> Result<SplitMatrices, FeatureError> {
        let split_ids = [
            &self.splits.train,
            &self.splits.validation,
            &self.splits.test,
        ];
        match spec {
            FeatureSpec::Ngram {
                orders,
                level,
                weighting,
            } => {
                let tokens = self.tokens(*level);
                let vocab = fit_vocabulary_tokens(
                    self.fitting_positions().iter().map(|&p| &tokens[p]),
                    *orders,
                )?;
                let mut matrices = Vec::with_capacity(3);
                for (slot, positions) in self.split_positions.iter().enumerate() {
                    let rows = exec::map_slice(positions, |&p| {
                        vectorize_tokens(&tokens[p], &vocab, *orders, *weighting)
                    });
                    matrices.push(FeatureMatrix {
                        spec: *spec,
                        ids: split_ids[slot].clone(),
                        rows,
                        dim: vocab.dim(),
                    });
                }
                let mut it = matrices.into_iter();
                Ok(SplitMatrices {
                    train: it.next().unwrap(),
                    validation: it.next().unwrap(),
                    test: it.next().unwrap(),
                    vocab: Some(vocab),
                    standardizer: None,
                })
            }
            FeatureSpec::Readability => {
                let raw: Vec<[f64; 4]> = exec::map_slice(&self.dataset.instances, |inst| {
                    readability_vector(&inst.prompt)
                });
                let fit_rows: Vec<[f64; 4]> = self
                    .fitting_positions()
                    .iter()
                    .map(|&p| raw[p])
                    .collect();
                let standardizer = Standardizer::fit(&fit_rows);
                let mut matrices = Vec::with_capacity(3);
                for (slot, positions) in self.split_positions.iter().enumerate() {
                    let rows: Vec<SparseVector> = positions
                        .iter()
                        .map(|&p| {
                            let z = standardizer.apply(&raw[p]);
                            SparseVector::new(
                                z.iter()
                                    .enumerate()
                                    .map(|(i, &v)| (i as u32, v))
                                    .collect(),
                                4,
                            )
                        })
                        .collect();
                    matrices.push(FeatureMatrix {
                        spec: *spec,
                        ids: split_ids[slot].clone(),
                        rows,
                        dim: 4,
                    });
                }
                let mut it = matrices.into_iter();
                Ok(SplitMatrices {
                    train: it.next().unwrap(),
                    validation: it.next().unwrap(),
                    test: it.next().unwrap(),
                    vocab: None,
                    standardizer: Some(standardizer),
                })
            }
        }
    }
}

/// Convenience wrapper building one spec's matrices in a single call.
pub fn build_feature_matrix(
    dataset: &BenchmarkDataset,
    splits: &SplitAssignment,
    spec: &FeatureSpec,
    table: &MergeTable,
    scope: FitScope,
) -> Result<SplitMatrices, FeatureError> {
    MatrixBuilder::new(dataset, splits, table, scope)?.build(spec)
}

/// Writes a matrix as `row,col,value` triplets (rows are 0-based split
/// positions).
pub fn export_matrix_triplets(matrix: &FeatureMatrix, path: &Path) -> Result<(), FeatureError> {
    let to_err = |e: std::io::Error| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    writer.write_record(["row", "col", "value"]).map_err(io_csv(path))?;
    for (row, vector) in matrix.rows.iter().enumerate() {
        for (col, value) in vector.iter() {
            writer
                .write_record([row.to_string(), col.to_string(), value.to_string()])
                .map_err(io_csv(path))?;
        }
    }
    writer.flush().map_err(to_err)
}

/// Writes the `column,key,df` vocabulary sidecar.
pub fn export_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<(), FeatureError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    writer.write_record(["column", "key", "df"]).map_err(io_csv(path))?;
    for col in 0..vocab.dim() as u32 {
        writer
            .write_record([col.to_string(), vocab.key(col).to_string(), vocab.df(col).to_string()])
            .map_err(io_csv(path))?;
    }
    writer.flush().map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn io_csv(path: &Path) -> impl Fn(csv::Error) -> FeatureError + '_ {
    move |e| FeatureError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{make_splits, BenchmarkDataset, Instance};

    fn word_spec(orders: NgramOrders) -> NgramSpec {
        NgramSpec {
            orders,
            level: TokenLevel::Word,
        }
    }

    #[test]
    fn catalog_has_thirteen_specs_in_order() {
        let catalog = feature_catalog();
        assert_eq!(catalog.len(), 13);
        assert_eq!(
            catalog[0],
            FeatureSpec::Ngram {
                orders: NgramOrders::Unigram,
                level: TokenLevel::Word,
                weighting: Weighting::Tf
            }
        );
        assert_eq!(catalog[12], FeatureSpec::Readability);
        let labels: std::collections::HashSet<String> =
            catalog.iter().map(|s| s.label()).collect();
        assert_eq!(labels.len(), 13, "labels are distinct");
    }

    #[test]
    fn vocabulary_df_counts() {
        let table = MergeTable::byte_level();
        let vocab =
            fit_vocabulary(&["a b", "b c"], &word_spec(NgramOrders::Unigram), &table).unwrap();
        assert_eq!(vocab.dim(), 3);
        assert_eq!(vocab.df(vocab.column("a").unwrap()), 1);
        assert_eq!(vocab.df(vocab.column("b").unwrap()), 2);
        assert_eq!(vocab.df(vocab.column("c").unwrap()), 1);

        let with_bigrams = fit_vocabulary(
            &["a b", "b c"],
            &word_spec(NgramOrders::UnigramBigram),
            &table,
        )
        .unwrap();
        assert_eq!(with_bigrams.dim(), 5);
        assert_eq!(with_bigrams.df(with_bigrams.column("a b").unwrap()), 1);
        assert_eq!(with_bigrams.df(with_bigrams.column("b c").unwrap()), 1);
    }

    #[test]
    fn df_is_document_level_not_occurrence_level() {
        let table = MergeTable::byte_level();
        let vocab =
            fit_vocabulary(&["a a a", "b"], &word_spec(NgramOrders::Unigram), &table).unwrap();
        assert_eq!(vocab.df(vocab.column("a").unwrap()), 1);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let table = MergeTable::byte_level();
        let err = fit_vocabulary(&["...", "!!"], &word_spec(NgramOrders::Unigram), &table)
            .unwrap_err();
        assert!(matches!(err, FeatureError::EmptyVocabulary));
    }

    #[test]
    fn tf_and_presence_weightings() {
        let table = MergeTable::byte_level();
        let spec = word_spec(NgramOrders::Unigram);
        let vocab = fit_vocabulary(&["a b c"], &spec, &table).unwrap();
        let tf = vectorize("a a b", &vocab, &spec, Weighting::Tf, &table);
        assert_eq!(tf.get(vocab.column("a").unwrap()), 2.0);
        assert_eq!(tf.get(vocab.column("b").unwrap()), 1.0);
        assert_eq!(tf.nnz(), 2);
        let presence = vectorize("a a b", &vocab, &spec, Weighting::Presence, &table);
        assert_eq!(presence.get(vocab.column("a").unwrap()), 1.0);
        assert_eq!(presence.nnz(), 2);
    }

    // idf(t) = ln((1 + n_docs) / (1 + df)) + 1, rows unit-normalized:
    // oracle values recomputed from the formula below.
    #[test]
    fn tfidf_matches_formula_oracle() {
        let table = MergeTable::byte_level();
        let spec = word_spec(NgramOrders::Unigram);
        // n_docs = 2, df(a) = 1, df(b) = 2
        let vocab = fit_vocabulary(&["a b", "b c"], &spec, &table).unwrap();
        let v = vectorize("a a b", &vocab, &spec, Weighting::TfIdf, &table);

        let idf_a = (3.0f64 / 2.0).ln() + 1.0;
        let idf_b = (3.0f64 / 3.0).ln() + 1.0;
        assert!((idf_a - 1.405465).abs() < 1e-6);
        assert!((idf_b - 1.0).abs() < 1e-12);
        let pre = [2.0 * idf_a, 1.0 * idf_b];
        let norm = (pre[0] * pre[0] + pre[1] * pre[1]).sqrt();

        let got_a = v.get(vocab.column("a").unwrap());
        let got_b = v.get(vocab.column("b").unwrap());
        assert!((got_a - pre[0] / norm).abs() < 1e-12);
        assert!((got_b - pre[1] / norm).abs() < 1e-12);
        assert!((got_a - 0.942127).abs() < 1e-4);
        assert!((got_b - 0.335182).abs() < 1e-4);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_ngrams_dropped() {
        let table = MergeTable::byte_level();
        let spec = word_spec(NgramOrders::Unigram);
        let vocab = fit_vocabulary(&["a b"], &spec, &table).unwrap();
        let v = vectorize("z q a", &vocab, &spec, Weighting::Tf, &table);
        assert_eq!(v.nnz(), 1);
        let all_unseen = vectorize("z q", &vocab, &spec, Weighting::TfIdf, &table);
        assert_eq!(all_unseen.nnz(), 0);
        assert_eq!(all_unseen.norm(), 0.0);
    }

    #[test]
    fn readability_fre_from_counted_inputs() {
        // one sentence, 10 single-syllable words plus syllable padding is
        // hard to stage exactly, so check the formula on a prompt whose
        // counts we can enumerate: "the cat sat on the mat" = 6 words,
        // 1 sentence, 6 syllables, 0 complex words.
        let [fre, fog, smog, _] = readability_vector("the cat sat on the mat");
        let expect_fre = 206.835 - 1.015 * 6.0 - 84.6 * 1.0;
        assert!((fre - expect_fre).abs() < 1e-9);
        assert!((fog - 0.4 * 6.0).abs() < 1e-9);
        assert!((smog - 3.1291).abs() < 1e-12);
    }

    #[test]
    fn yule_k_hand_arithmetic() {
        // tokens [a, a, b]: N=3, V1=1, V2=1, sum i^2 Vi = 5
        let [_, _, _, yule] = readability_vector("a a b");
        assert!((yule - 1e4 * (5.0 - 3.0) / 9.0).abs() < 1e-9);
        assert!((yule - 2222.222).abs() < 1e-3);
    }

    #[test]
    fn empty_prompt_readability_is_zero() {
        assert_eq!(readability_vector(""), [0.0; 4]);
        assert_eq!(readability_vector("?!"), [0.0; 4]);
    }

    fn demo_dataset(n: usize) -> BenchmarkDataset {
        let fillers = ["lor", "mak", "tib", "ren", "sha", "vol"];
        BenchmarkDataset::new(
            "demo".into(),
            vec!["yes".into(), "no".into()],
            (0..n)
                .map(|i| Instance {
                    id: format!("i{i}"),
                    prompt: format!(
                        "{} {} question {}",
                        fillers[i % fillers.len()],
                        fillers[(i * 7 + 1) % fillers.len()],
                        i
                    ),
                    gold: i % 2,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn matrices_share_dimension_and_align_with_split_ids() {
        let ds = demo_dataset(20);
        let splits = make_splits(&ds, [0.6, 0.2, 0.2], 1, true).unwrap();
        let table = MergeTable::byte_level();
        let spec = FeatureSpec::Ngram {
            orders: NgramOrders::UnigramBigram,
            level: TokenLevel::Word,
            weighting: Weighting::Tf,
        };
        let m = build_feature_matrix(&ds, &splits, &spec, &table, FitScope::TrainOnly).unwrap();
        assert_eq!(m.train.dim, m.validation.dim);
        assert_eq!(m.train.dim, m.test.dim);
        assert_eq!(m.train.ids, splits.train);
        assert_eq!(m.test.ids, splits.test);
        assert_eq!(m.train.rows.len(), splits.train.len());
    }

    #[test]
    fn tf_train_rows_sum_to_ngram_counts() {
        let ds = demo_dataset(12);
        let splits = make_splits(&ds, [0.5, 0.25, 0.25], 2, false).unwrap();
        let table = MergeTable::byte_level();
        let spec = FeatureSpec::Ngram {
            orders: NgramOrders::Unigram,
            level: TokenLevel::Word,
            weighting: Weighting::Tf,
        };
        let m = build_feature_matrix(&ds, &splits, &spec, &table, FitScope::TrainOnly).unwrap();
        for (id, row) in m.train.ids.iter().zip(&m.train.rows) {
            let tokens = word_tokenize(&ds.instance(id).unwrap().prompt);
            assert_eq!(row.sum(), tokens.len() as f64);
        }
    }

    #[test]
    fn unseen_only_validation_prompt_gives_zero_row() {
        let ds = BenchmarkDataset::new(
            "unseen".into(),
            vec!["a".into(), "b".into()],
            vec![
                Instance { id: "t0".into(), prompt: "lor mak tib".into(), gold: 0 },
                Instance { id: "t1".into(), prompt: "mak ren lor".into(), gold: 1 },
                Instance { id: "v0".into(), prompt: "zulq warp nex".into(), gold: 0 },
                Instance { id: "e0".into(), prompt: "lor tib".into(), gold: 1 },
            ],
        )
        .unwrap();
        let splits = crate::corpus::SplitAssignment {
            train: vec!["t0".into(), "t1".into()],
            validation: vec!["v0".into()],
            test: vec!["e0".into()],
            seed: 0,
            ratios: [0.5, 0.25, 0.25],
            stratified: false,
        };
        let table = MergeTable::byte_level();
        let spec = FeatureSpec::Ngram {
            orders: NgramOrders::UnigramBigram,
            level: TokenLevel::Word,
            weighting: Weighting::Tf,
        };
        let m = build_feature_matrix(&ds, &splits, &spec, &table, FitScope::TrainOnly).unwrap();
        assert_eq!(m.validation.rows[0].nnz(), 0);
        assert!(m.test.rows[0].nnz() > 0);
    }

    #[test]
    fn readability_train_columns_standardized() {
        let ds = demo_dataset(30);
        let splits = make_splits(&ds, [0.6, 0.2, 0.2], 3, true).unwrap();
        let table = MergeTable::byte_level();
        let m = build_feature_matrix(
            &ds,
            &splits,
            &FeatureSpec::Readability,
            &table,
            FitScope::TrainOnly,
        )
        .unwrap();
        let n = m.train.rows.len() as f64;
        for col in 0..4u32 {
            let values: Vec<f64> = m.train.rows.iter().map(|r| r.get(col)).collect();
            let mean: f64 = values.iter().sum::<f64>() / n;
            let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = m.standardizer.as_ref().unwrap().stds[col as usize];
            if std > 0.0 {
                assert!(mean.abs() < 1e-9, "col {col} mean {mean}");
                assert!((var - 1.0).abs() < 1e-9, "col {col} var {var}");
            } else {
                assert!(values.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn validation_and_test_do_not_influence_fitting() {
        let ds = demo_dataset(20);
        let splits = make_splits(&ds, [0.6, 0.2, 0.2], 4, true).unwrap();
        let table = MergeTable::byte_level();

        // replace every test prompt with noise, keep ids and golds
        let mut noisy = ds.instances.clone();
        let test_ids: std::collections::HashSet<&String> = splits.test.iter().collect();
        for inst in &mut noisy {
            if test_ids.contains(&inst.id) {
                inst.prompt = format!("xq{} zz yy ww", inst.id);
            }
        }
        let noisy_ds =
            BenchmarkDataset::new(ds.name.clone(), ds.label_space.clone(), noisy).unwrap();

        for spec in feature_catalog() {
            let a = build_feature_matrix(&ds, &splits, &spec, &table, FitScope::TrainOnly)
                .unwrap();
            let b = build_feature_matrix(&noisy_ds, &splits, &spec, &table, FitScope::TrainOnly)
                .unwrap();
            assert_eq!(a.train.rows, b.train.rows, "{}", spec.label());
            assert_eq!(a.validation.rows, b.validation.rows, "{}", spec.label());
        }
    }

    #[test]
    fn all_splits_scope_changes_df() {
        let ds = demo_dataset(20);
        let splits = make_splits(&ds, [0.6, 0.2, 0.2], 4, true).unwrap();
        let table = MergeTable::byte_level();
        let spec = FeatureSpec::Ngram {
            orders: NgramOrders::Unigram,
            level: TokenLevel::Word,
            weighting: Weighting::Tf,
        };
        let train_only =
            build_feature_matrix(&ds, &splits, &spec, &table, FitScope::TrainOnly).unwrap();
        let all =
            build_feature_matrix(&ds, &splits, &spec, &table, FitScope::AllSplits).unwrap();
        assert_eq!(train_only.vocab.as_ref().unwrap().n_docs(), 12);
        assert_eq!(all.vocab.as_ref().unwrap().n_docs(), 20);
        assert!(all.vocab.as_ref().unwrap().dim() >= train_only.vocab.as_ref().unwrap().dim());
    }

    #[test]
    fn export_triplets_and_sidecar() {
        let ds = demo_dataset(8);
        let splits = make_splits(&ds, [0.5, 0.25, 0.25], 5, false).unwrap();
        let table = MergeTable::byte_level();
        let spec = FeatureSpec::Ngram {
            orders: NgramOrders::Unigram,
            level: TokenLevel::Word,
            weighting: Weighting::Tf,
        };
        let m = build_feature_matrix(&ds, &splits, &spec, &table, FitScope::TrainOnly).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let triplets = dir.path().join("train.csv");
        let sidecar = dir.path().join("vocab.csv");
        export_matrix_triplets(&m.train, &triplets).unwrap();
        export_vocabulary(m.vocab.as_ref().unwrap(), &sidecar).unwrap();

        let text = std::fs::read_to_string(&triplets).unwrap();
        let nnz: usize = m.train.rows.iter().map(|r| r.nnz()).sum();
        assert_eq!(text.lines().count(), nnz + 1);
        let side = std::fs::read_to_string(&sidecar).unwrap();
        assert_eq!(side.lines().count(), m.vocab.as_ref().unwrap().dim() + 1);
        assert!(side.lines().nth(1).unwrap().starts_with("0,"));
    }
}
