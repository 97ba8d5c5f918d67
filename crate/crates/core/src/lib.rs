//! Shortcut-auditing toolkit for multiple-choice benchmarks.
//!
//! The pipeline: load a benchmark dataset and (optionally) instance-level
//! LLM results, split it, build thirteen n-gram / readability feature
//! vectorizations of the prompts, fit regularized multinomial logistic
//! classifiers over a small penalty grid, pick the best configuration by
//! validation accuracy, and report chance-corrected test agreement
//! (Cohen's kappa). Test instances are then stratified by whether the best
//! classifier predicted them, and LLM results are compared across the two
//! strata with per-family one-sided paired t-tests under a
//! Benjamini-Hochberg correction.
//!
//! A synthetic generator with planted cues of known reliability serves as
//! the analytic oracle for the whole pipeline.

pub mod audit;
pub mod corpus;
pub mod exec;
pub mod features;
pub mod metrics;
pub mod report;
pub mod solver;
pub mod stats;
pub mod synth;
pub mod tokenize;
