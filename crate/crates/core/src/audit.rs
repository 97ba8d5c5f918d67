//! Per-dataset audit pipeline: evaluate the 13 feature specs x 3 penalty
//! grid, select the best cell by validation accuracy, stratify the test
//! split by the best classifier's correctness, and score LLM results on
//! the two strata.
//!
//! Grid cells are independent jobs (parallel under the `parallel`
//! feature); results are merged by cell index so output never depends on
//! evaluation order. Cell failures are recorded in place and skip
//! selection instead of aborting the audit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BenchmarkDataset, CorpusError, LlmResultSet, SplitAssignment};
use crate::exec;
use crate::features::{feature_catalog, FeatureSpec, FitScope, MatrixBuilder};
use crate::metrics::{accuracy, cohen_kappa, kappa_from_accuracy, ChanceMode, MetricsError};
use crate::solver::{fit, predict_rows, ModelWeights, PenaltyConfig, SolverParams};
use crate::tokenize::MergeTable;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("feature preparation failed: {0}")]
    Features(#[from] crate::features::FeatureError),
    #[error("training split contains fewer than 2 classes")]
    TrainSingleClass,
    #[error("validation and test splits must be non-empty")]
    DegenerateSplits,
    #[error("every grid cell failed; first error: {first}")]
    AllCellsFailed { first: String },
    #[error("penalty grid is empty")]
    EmptyPenaltyGrid,
}

/// Everything the per-dataset pipeline needs to be reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratified_splits: bool,
    pub chance_mode: ChanceMode,
    pub fit_scope: FitScope,
    pub penalties: Vec<PenaltyConfig>,
    pub solver: SolverParams,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            ratios: [0.6, 0.2, 0.2],
            seed: 42,
            stratified_splits: true,
            chance_mode: ChanceMode::Uniform,
            fit_scope: FitScope::TrainOnly,
            penalties: default_penalty_grid(),
            solver: SolverParams::default(),
        }
    }
}

/// The default penalty grid; the order doubles as the selection
/// tie-break order.
pub fn default_penalty_grid() -> Vec<PenaltyConfig> {
    vec![
        PenaltyConfig::l2(1.0),
        PenaltyConfig::l1(1.0),
        PenaltyConfig::l1(10.0),
    ]
}

/// Scores of one fitted grid cell, with stored predictions so every
/// reported number can be recomputed.
#[derive(Debug, Clone)]
pub struct CellScores {
    pub val_accuracy: f64,
    pub val_kappa: Option<f64>,
    pub test_accuracy: f64,
    pub test_kappa: Option<f64>,
    pub val_predictions: Vec<usize>,
    pub test_predictions: Vec<usize>,
    pub model: ModelWeights,
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub spec_index: usize,
    pub spec: FeatureSpec,
    pub penalty_index: usize,
    pub penalty: PenaltyConfig,
    pub outcome: Result<CellScores, String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
}

impl GridResult {
    pub fn cell(&self, spec_index: usize, penalty_index: usize) -> &GridCell {
        self.cells
            .iter()
            .find(|c| c.spec_index == spec_index && c.penalty_index == penalty_index)
            .expect("cell exists")
    }
}

/// The winning configuration by validation accuracy; ties break by
/// catalog order then penalty order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestConfig {
    pub spec_index: usize,
    pub spec: FeatureSpec,
    pub penalty_index: usize,
    pub penalty: PenaltyConfig,
    pub val_accuracy: f64,
    pub val_kappa: Option<f64>,
    pub test_accuracy: f64,
    pub test_kappa: Option<f64>,
    /// Test kappa above 0.2, the smallest detectable-agreement level.
    pub kept: bool,
}

/// Test instances partitioned by the best classifier's correctness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stratification {
    pub s_plus: Vec<String>,
    pub s_minus: Vec<String>,
}

/// One model's agreement on the two test strata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetScoreRow {
    pub model: String,
    pub family: String,
    pub dataset: String,
    pub n_records: usize,
    pub overall_accuracy: Option<f64>,
    pub overall_kappa: Option<f64>,
    pub n_plus: usize,
    pub n_minus: usize,
    pub kappa_plus: Option<f64>,
    pub kappa_minus: Option<f64>,
    pub difference: Option<f64>,
}

fn split_golds(dataset: &BenchmarkDataset, ids: &[String]) -> Vec<usize> {
    ids.iter()
        .map(|id| dataset.instance(id).expect("split id resolves").gold)
        .collect()
}

/// Evaluates every (feature spec, penalty) pair: build matrices, fit on
/// train, score validation and test. Deterministic given the splits.
pub fn run_grid(
    dataset: &BenchmarkDataset,
    splits: &SplitAssignment,
    table: &MergeTable,
    config: &AuditConfig,
) -> Result<GridResult, AuditError> {
    if config.penalties.is_empty() {
        return Err(AuditError::EmptyPenaltyGrid);
    }
    if splits.validation.is_empty() || splits.test.is_empty() {
        return Err(AuditError::DegenerateSplits);
    }
    let train_golds = split_golds(dataset, &splits.train);
    let val_golds = split_golds(dataset, &splits.validation);
    let test_golds = split_golds(dataset, &splits.test);
    {
        let mut seen = vec![false; dataset.k()];
        for &g in &train_golds {
            seen[g] = true;
        }
        if seen.iter().filter(|&&s| s).count() < 2 {
            return Err(AuditError::TrainSingleClass);
        }
    }

    let builder = MatrixBuilder::new(dataset, splits, table, config.fit_scope)?;
    let catalog = feature_catalog();
    let k = dataset.k();

    let per_spec: Vec<Vec<GridCell>> = exec::map_range(catalog.len(), |spec_index| {
        let spec = catalog[spec_index];
        let matrices = builder.build(&spec);
        config
            .penalties
            .iter()
            .enumerate()
            .map(|(penalty_index, penalty)| {
                let outcome = matrices
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|m| {
                        score_cell(
                            m,
                            &train_golds,
                            &val_golds,
                            &test_golds,
                            k,
                            penalty,
                            config,
                        )
                        .map_err(|e| e.to_string())
                    });
                GridCell {
                    spec_index,
                    spec,
                    penalty_index,
                    penalty: *penalty,
                    outcome,
                }
            })
            .collect()
    });

    Ok(GridResult {
        cells: per_spec.into_iter().flatten().collect(),
    })
}

fn score_cell(
    matrices: &crate::features::SplitMatrices,
    train_golds: &[usize],
    val_golds: &[usize],
    test_golds: &[usize],
    k: usize,
    penalty: &PenaltyConfig,
    config: &AuditConfig,
) -> Result<CellScores, Box<dyn std::error::Error>> {
    let model = fit(&matrices.train.rows, train_golds, k, penalty, &config.solver)?;
    let val_predictions = predict_rows(&model, &matrices.validation.rows)?;
    let test_predictions = predict_rows(&model, &matrices.test.rows)?;
    let val_accuracy = accuracy(&val_predictions, val_golds)?;
    let test_accuracy = accuracy(&test_predictions, test_golds)?;
    let val_kappa = cohen_kappa(&val_predictions, val_golds, k, config.chance_mode)?;
    let test_kappa = cohen_kappa(&test_predictions, test_golds, k, config.chance_mode)?;
    Ok(CellScores {
        val_accuracy,
        val_kappa,
        test_accuracy,
        test_kappa,
        val_predictions,
        test_predictions,
        model,
    })
}

/// Argmax of validation accuracy over the successful cells; the kept flag
/// applies the test-kappa > 0.2 rule.
pub fn select_best(grid: &GridResult) -> Result<BestConfig, AuditError> {
    let mut best: Option<&GridCell> = None;
    let mut first_error: Option<&String> = None;
    for cell in &grid.cells {
        match &cell.outcome {
            Ok(scores) => {
                let better = match best {
                    None => true,
                    Some(current) => {
                        let current_scores = current.outcome.as_ref().unwrap();
                        scores.val_accuracy > current_scores.val_accuracy
                            || (scores.val_accuracy == current_scores.val_accuracy
                                && (cell.spec_index, cell.penalty_index)
                                    < (current.spec_index, current.penalty_index))
                    }
                };
                if better {
                    best = Some(cell);
                }
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    let Some(cell) = best else {
        return Err(AuditError::AllCellsFailed {
            first: first_error.cloned().unwrap_or_else(|| "empty grid".into()),
        });
    };
    let scores = cell.outcome.as_ref().unwrap();
    Ok(BestConfig {
        spec_index: cell.spec_index,
        spec: cell.spec,
        penalty_index: cell.penalty_index,
        penalty: cell.penalty,
        val_accuracy: scores.val_accuracy,
        val_kappa: scores.val_kappa,
        test_accuracy: scores.test_accuracy,
        test_kappa: scores.test_kappa,
        kept: scores.test_kappa.is_some_and(|kappa| kappa > 0.2),
    })
}

/// Splits the test ids by whether the best cell predicted them correctly.
pub fn stratify_test(
    grid: &GridResult,
    best: &BestConfig,
    dataset: &BenchmarkDataset,
    splits: &SplitAssignment,
) -> Stratification {
    let cell = grid.cell(best.spec_index, best.penalty_index);
    let scores = cell.outcome.as_ref().expect("best cell succeeded");
    let mut s_plus = Vec::new();
    let mut s_minus = Vec::new();
    for (id, &pred) in splits.test.iter().zip(&scores.test_predictions) {
        let gold = dataset.instance(id).expect("test id resolves").gold;
        if pred == gold {
            s_plus.push(id.clone());
        } else {
            s_minus.push(id.clone());
        }
    }
    Stratification { s_plus, s_minus }
}

/// Uniform-chance kappa of each model on S_plus and S_minus. Correctness
/// records pin the chance model to 1/k; models with no records on a
/// subset get a not-a-value entry with the sizes still reported.
pub fn llm_subset_scores(
    results: &LlmResultSet,
    dataset: &BenchmarkDataset,
    stratification: &Stratification,
    k: usize,
) -> Result<Vec<SubsetScoreRow>, AuditError> {
    let joined = results.join(dataset)?;
    // (covered count, accuracy, uniform kappa) over the ids a model has
    // records for
    let score_of = |records: &std::collections::BTreeMap<&str, bool>,
                    ids: &[String]|
     -> (usize, Option<f64>, Option<f64>) {
        let hits: Vec<bool> = ids
            .iter()
            .filter_map(|id| records.get(id.as_str()).copied())
            .collect();
        if hits.is_empty() {
            return (0, None, None);
        }
        let acc = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
        (hits.len(), Some(acc), Some(kappa_from_accuracy(acc, k)))
    };

    let mut rows = Vec::new();
    for (model, records) in &joined {
        let (n_plus, _, kappa_plus) = score_of(records, &stratification.s_plus);
        let (n_minus, _, kappa_minus) = score_of(records, &stratification.s_minus);
        let mut all_test_ids = stratification.s_plus.clone();
        all_test_ids.extend(stratification.s_minus.iter().cloned());
        let (n_records, overall_accuracy, overall_kappa) = score_of(records, &all_test_ids);
        rows.push(SubsetScoreRow {
            model: model.to_string(),
            family: results.family_of(model).unwrap_or("unknown").to_string(),
            dataset: dataset.name.clone(),
            n_records,
            overall_accuracy,
            overall_kappa,
            n_plus,
            n_minus,
            kappa_plus,
            kappa_minus,
            difference: match (kappa_plus, kappa_minus) {
                (Some(p), Some(m)) => Some(p - m),
                _ => None,
            },
        });
    }
    Ok(rows)
}

/// Full per-dataset audit: splits, grid, selection, stratification.
#[derive(Debug, Clone)]
pub struct DatasetAudit {
    pub dataset_name: String,
    pub k: usize,
    pub splits: SplitAssignment,
    pub grid: GridResult,
    pub best: BestConfig,
    pub stratification: Stratification,
}

pub fn audit_dataset(
    dataset: &BenchmarkDataset,
    table: &MergeTable,
    config: &AuditConfig,
) -> Result<DatasetAudit, AuditError> {
    let splits = crate::corpus::make_splits(
        dataset,
        config.ratios,
        config.seed,
        config.stratified_splits,
    )?;
    let grid = run_grid(dataset, &splits, table, config)?;
    let best = select_best(&grid)?;
    let stratification = stratify_test(&grid, &best, dataset, &splits);
    Ok(DatasetAudit {
        dataset_name: dataset.name.clone(),
        k: dataset.k(),
        splits,
        grid,
        best,
        stratification,
    })
}
