//! Report assembly and file emission for audit runs.
//!
//! One structured report per dataset plus flat delimited tables for
//! plotting: the per-cell grid, the dataset x feature-spec heatmap of
//! test kappas, per-(model, dataset) scatter rows, per-subset box rows,
//! and the family test table. Outputs are pure functions of the inputs
//! and flags; repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{
    audit_dataset, llm_subset_scores, AuditConfig, AuditError, DatasetAudit, SubsetScoreRow,
};
use crate::corpus::{
    load_dataset, load_llm_results, save_dataset, save_llm_results, BenchmarkDataset,
    CorpusError, FileFormat, LlmResultSet,
};
use crate::exec;
use crate::features::feature_catalog;
use crate::solver::SolverParams;
use crate::stats::{family_analysis, FamilyTable, PairUnit, StatsError, SubsetObservation};
use crate::synth::{
    expected_kappa, generate, simulate_llm, SimPolicy, SynthConfig, SynthError,
};
use crate::tokenize::{MergeTable, TokenizeError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("duplicate dataset name {name}")]
    DuplicateDatasetName { name: String },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse report {path}: {message}")]
    BadReport { path: String, message: String },
    #[error("no report files found in {dir}")]
    NoReports { dir: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Full configuration of an audit run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_paths: Vec<PathBuf>,
    pub llm_result_paths: Vec<PathBuf>,
    pub bpe_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub audit: AuditConfig,
    pub pair_unit: PairUnit,
}

impl RunConfig {
    pub fn new(out_dir: &Path) -> Self {
        Self {
            dataset_paths: Vec::new(),
            llm_result_paths: Vec::new(),
            bpe_dir: None,
            out_dir: out_dir.to_path_buf(),
            audit: AuditConfig::default(),
            pair_unit: PairUnit::PerModelDataset,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub ratios: [f64; 3],
    pub stratified_splits: bool,
    pub chance_mode: String,
    pub fit_scope: String,
    pub penalties: Vec<String>,
    pub solver: SolverParams,
    pub bpe_source: String,
    pub pair_unit: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCellReport {
    pub spec: String,
    pub penalty: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub val_accuracy: Option<f64>,
    pub val_kappa: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_kappa: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestReport {
    pub spec: String,
    pub spec_description: String,
    pub penalty: String,
    pub val_accuracy: f64,
    pub val_kappa: Option<f64>,
    pub test_accuracy: f64,
    pub test_kappa: Option<f64>,
    pub kept: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitsReport {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratificationReport {
    pub n_plus: usize,
    pub n_minus: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmSection {
    pub coverage: BTreeMap<String, f64>,
    pub subset_scores: Vec<SubsetScoreRow>,
}

/// The per-dataset structured report; every number here is recomputable
/// from the dataset file, the seed, and the serialized models/id lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset: String,
    pub tool_version: String,
    pub seed: u64,
    pub k: usize,
    pub n_instances: usize,
    pub config: ConfigEcho,
    pub splits: SplitsReport,
    pub grid: Vec<GridCellReport>,
    pub best: BestReport,
    pub test_kappa: Option<f64>,
    pub kept: bool,
    pub stratification: StratificationReport,
    pub llm: Option<LlmSection>,
    pub family_table: Option<FamilyTable>,
}

/// Flat record of one fitted model (sparse weights) for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub spec: String,
    pub penalty: String,
    pub k: usize,
    pub dim: usize,
    /// Recipe for refitting the vocabulary this model indexes into.
    pub vocab_ref: String,
    pub intercepts: Vec<f64>,
    /// Nonzero entries as (class, feature, value).
    pub weights: Vec<(usize, usize, f64)>,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
}

#[derive(Debug)]
pub struct RunSummary {
    pub dataset_names: Vec<String>,
    pub report_paths: Vec<PathBuf>,
    pub llm_results_given: bool,
    pub family_table: Option<FamilyTable>,
}

impl RunSummary {
    /// 0 on success, 3 when LLM results were supplied but no family was
    /// testable. Validation failures surface as errors (exit 2).
    pub fn exit_code(&self) -> i32 {
        if self.llm_results_given
            && self
                .family_table
                .as_ref()
                .is_none_or(|t| t.testable_count() == 0)
        {
            3
        } else {
            0
        }
    }
}

fn bpe_source(config: &RunConfig) -> String {
    match &config.bpe_dir {
        Some(dir) => dir.display().to_string(),
        None => "builtin byte-level (no merges)".to_string(),
    }
}

fn load_table(config: &RunConfig) -> Result<MergeTable, ReportError> {
    Ok(match &config.bpe_dir {
        Some(dir) => MergeTable::load_dir(dir)?,
        None => MergeTable::byte_level(),
    })
}

/// Audits every dataset, scores LLM results on the stratified test
/// subsets, runs the family analysis across datasets, and writes the
/// report and table files.
pub fn run_audit(config: &RunConfig) -> Result<RunSummary, ReportError> {
    let datasets: Vec<BenchmarkDataset> = config
        .dataset_paths
        .iter()
        .map(|p| load_dataset(p, FileFormat::from_path(p)))
        .collect::<Result<_, _>>()?;
    {
        let mut names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(dup) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ReportError::DuplicateDatasetName {
                name: dup[0].to_string(),
            });
        }
    }

    let llm_results_given = !config.llm_result_paths.is_empty();
    let results = if llm_results_given {
        let sets: Vec<LlmResultSet> = config
            .llm_result_paths
            .iter()
            .map(|p| load_llm_results(p))
            .collect::<Result<_, _>>()?;
        let merged = LlmResultSet::merge(sets)?;
        let refs: Vec<&BenchmarkDataset> = datasets.iter().collect();
        merged.validate_against(&refs)?;
        Some(merged)
    } else {
        None
    };

    let table = load_table(config)?;
    let audits: Vec<Result<DatasetAudit, AuditError>> =
        exec::map_slice(&datasets, |dataset| {
            audit_dataset(dataset, &table, &config.audit)
        });
    let mut dataset_audits = Vec::with_capacity(audits.len());
    for audit in audits {
        dataset_audits.push(audit?);
    }

    let mut all_rows: Vec<SubsetScoreRow> = Vec::new();
    let mut per_dataset_rows: Vec<Vec<SubsetScoreRow>> = Vec::new();
    if let Some(results) = &results {
        for (dataset, audit) in datasets.iter().zip(&dataset_audits) {
            let rows =
                llm_subset_scores(results, dataset, &audit.stratification, dataset.k())?;
            all_rows.extend(rows.iter().cloned());
            per_dataset_rows.push(rows);
        }
    }

    let family_table = if results.is_some() {
        let observations: Vec<SubsetObservation> = all_rows
            .iter()
            .map(|r| SubsetObservation {
                family: r.family.clone(),
                model: r.model.clone(),
                dataset: r.dataset.clone(),
                difference: r.difference,
            })
            .collect();
        Some(family_analysis(&observations, config.pair_unit)?)
    } else {
        None
    };

    std::fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;
    let mut report_paths = Vec::new();
    let mut reports = Vec::new();
    for (i, (dataset, audit)) in datasets.iter().zip(&dataset_audits).enumerate() {
        let llm = results.as_ref().map(|r| LlmSection {
            coverage: r.coverage(dataset).unwrap_or_default(),
            subset_scores: per_dataset_rows.get(i).cloned().unwrap_or_default(),
        });
        let report = assemble_report(dataset, audit, config, llm, family_table.clone());
        let path = config.out_dir.join(format!("{}.report.json", dataset.name));
        write_json(&path, &report)?;
        write_id_list(
            &config.out_dir.join(format!("{}.s_plus.txt", dataset.name)),
            &audit.stratification.s_plus,
        )?;
        write_id_list(
            &config.out_dir.join(format!("{}.s_minus.txt", dataset.name)),
            &audit.stratification.s_minus,
        )?;
        write_json(
            &config.out_dir.join(format!("{}.models.json", dataset.name)),
            &model_records(audit, config),
        )?;
        report_paths.push(path);
        reports.push(report);
    }

    write_grid_csv(&config.out_dir.join("grid.csv"), &reports)?;
    write_heatmap_csv(&config.out_dir.join("heatmap.csv"), &dataset_audits)?;
    if results.is_some() {
        write_scatter_csv(&config.out_dir.join("scatter.csv"), &dataset_audits, &all_rows)?;
        write_box_csv(&config.out_dir.join("box.csv"), &all_rows)?;
    }
    if let Some(table) = &family_table {
        write_families_csv(&config.out_dir.join("families.csv"), table)?;
    }

    Ok(RunSummary {
        dataset_names: datasets.iter().map(|d| d.name.clone()).collect(),
        report_paths,
        llm_results_given,
        family_table,
    })
}

fn assemble_report(
    dataset: &BenchmarkDataset,
    audit: &DatasetAudit,
    config: &RunConfig,
    llm: Option<LlmSection>,
    family_table: Option<FamilyTable>,
) -> AuditReport {
    let grid = audit
        .grid
        .cells
        .iter()
        .map(|cell| match &cell.outcome {
            Ok(s) => GridCellReport {
                spec: cell.spec.label(),
                penalty: cell.penalty.label(),
                ok: true,
                error: None,
                val_accuracy: Some(s.val_accuracy),
                val_kappa: s.val_kappa,
                test_accuracy: Some(s.test_accuracy),
                test_kappa: s.test_kappa,
            },
            Err(e) => GridCellReport {
                spec: cell.spec.label(),
                penalty: cell.penalty.label(),
                ok: false,
                error: Some(e.clone()),
                val_accuracy: None,
                val_kappa: None,
                test_accuracy: None,
                test_kappa: None,
            },
        })
        .collect();

    AuditReport {
        dataset: dataset.name.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.audit.seed,
        k: dataset.k(),
        n_instances: dataset.len(),
        config: ConfigEcho {
            ratios: config.audit.ratios,
            stratified_splits: config.audit.stratified_splits,
            chance_mode: config.audit.chance_mode.to_string(),
            fit_scope: config.audit.fit_scope.to_string(),
            penalties: config.audit.penalties.iter().map(|p| p.label()).collect(),
            solver: config.audit.solver,
            bpe_source: bpe_source(config),
            pair_unit: config.pair_unit.to_string(),
        },
        splits: SplitsReport {
            seed: audit.splits.seed,
            train: audit.splits.train.clone(),
            validation: audit.splits.validation.clone(),
            test: audit.splits.test.clone(),
        },
        grid,
        best: BestReport {
            spec: audit.best.spec.label(),
            spec_description: audit.best.spec.to_string(),
            penalty: audit.best.penalty.label(),
            val_accuracy: audit.best.val_accuracy,
            val_kappa: audit.best.val_kappa,
            test_accuracy: audit.best.test_accuracy,
            test_kappa: audit.best.test_kappa,
            kept: audit.best.kept,
        },
        test_kappa: audit.best.test_kappa,
        kept: audit.best.kept,
        stratification: StratificationReport {
            n_plus: audit.stratification.s_plus.len(),
            n_minus: audit.stratification.s_minus.len(),
        },
        llm,
        family_table,
    }
}

fn model_records(audit: &DatasetAudit, config: &RunConfig) -> Vec<ModelRecord> {
    audit
        .grid
        .cells
        .iter()
        .filter_map(|cell| {
            let scores = cell.outcome.as_ref().ok()?;
            let model = &scores.model;
            Some(ModelRecord {
                spec: cell.spec.label(),
                penalty: cell.penalty.label(),
                k: model.k,
                dim: model.dim,
                vocab_ref: format!(
                    "refit:{}:seed={}:spec={}",
                    config.audit.fit_scope, config.audit.seed, cell.spec.label()
                ),
                intercepts: (0..model.k).map(|c| model.intercept(c)).collect(),
                weights: model.nonzero_weights().collect(),
                iterations: model.meta.iterations,
                final_objective: model.meta.final_objective,
                converged: model.meta.converged,
            })
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let json = serde_json::to_string_pretty(value).expect("reports serialize");
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(json.as_bytes()).map_err(io_err(path))?;
    file.write_all(b"\n").map_err(io_err(path))
}

fn write_id_list(path: &Path, ids: &[String]) -> Result<(), ReportError> {
    let mut out = String::new();
    for id in ids {
        out.push_str(id);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn write_grid_csv(path: &Path, reports: &[AuditReport]) -> Result<(), ReportError> {
    let mut out = String::from("dataset,spec,penalty,ok,val_accuracy,val_kappa,test_accuracy,test_kappa\n");
    for report in reports {
        for cell in &report.grid {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                report.dataset,
                cell.spec,
                cell.penalty,
                cell.ok,
                fmt_opt(cell.val_accuracy),
                fmt_opt(cell.val_kappa),
                fmt_opt(cell.test_accuracy),
                fmt_opt(cell.test_kappa),
            ));
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// One row per dataset, one test-kappa column per feature spec: for each
/// spec the penalty with the best validation accuracy is shown.
fn write_heatmap_csv(path: &Path, audits: &[DatasetAudit]) -> Result<(), ReportError> {
    let catalog = feature_catalog();
    let mut out = String::from("dataset");
    for spec in &catalog {
        out.push(',');
        out.push_str(&spec.label());
    }
    out.push('\n');
    for audit in audits {
        out.push_str(&audit.dataset_name);
        for spec_index in 0..catalog.len() {
            let best_cell = audit
                .grid
                .cells
                .iter()
                .filter(|c| c.spec_index == spec_index)
                .filter_map(|c| c.outcome.as_ref().ok().map(|s| (c, s)))
                .max_by(|(ca, sa), (cb, sb)| {
                    sa.val_accuracy
                        .partial_cmp(&sb.val_accuracy)
                        .unwrap()
                        .then(cb.penalty_index.cmp(&ca.penalty_index))
                });
            out.push(',');
            if let Some((_, scores)) = best_cell {
                out.push_str(&fmt_opt(scores.test_kappa));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_scatter_csv(
    path: &Path,
    audits: &[DatasetAudit],
    rows: &[SubsetScoreRow],
) -> Result<(), ReportError> {
    let best_kappa: BTreeMap<&str, Option<f64>> = audits
        .iter()
        .map(|a| (a.dataset_name.as_str(), a.best.test_kappa))
        .collect();
    let mut out = String::from(
        "model,family,dataset,n_records,overall_accuracy,overall_kappa,difference,best_classifier_kappa\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.model,
            row.family,
            row.dataset,
            row.n_records,
            fmt_opt(row.overall_accuracy),
            fmt_opt(row.overall_kappa),
            fmt_opt(row.difference),
            fmt_opt(best_kappa.get(row.dataset.as_str()).copied().flatten()),
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_box_csv(path: &Path, rows: &[SubsetScoreRow]) -> Result<(), ReportError> {
    let mut out = String::from("model,family,dataset,subset,n,kappa\n");
    for row in rows {
        if let Some(kappa) = row.kappa_plus {
            out.push_str(&format!(
                "{},{},{},s_plus,{},{}\n",
                row.model, row.family, row.dataset, row.n_plus, kappa
            ));
        }
        if let Some(kappa) = row.kappa_minus {
            out.push_str(&format!(
                "{},{},{},s_minus,{},{}\n",
                row.model, row.family, row.dataset, row.n_minus, kappa
            ));
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_families_csv(path: &Path, table: &FamilyTable) -> Result<(), ReportError> {
    let mut out = String::from("family,p_value,p_adjusted,n_models,n_pairs,testable\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.family,
            fmt_opt(row.p_raw),
            fmt_opt(row.p_adjusted),
            row.n_models,
            row.n_pairs,
            row.testable(),
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Landis-Koch style agreement band for a test kappa.
pub fn agreement_band(kappa: f64) -> &'static str {
    if kappa > 0.6 {
        "moderate-strong agreement"
    } else if kappa > 0.4 {
        "moderate agreement"
    } else if kappa > 0.2 {
        "small but detectable agreement"
    } else {
        "no detectable agreement"
    }
}

/// Reads every `*.report.json` under `dir` and renders the human
/// summary: best config and kept/discarded status per dataset, then the
/// family table sorted by raw p.
pub fn render_summary(dir: &Path) -> Result<String, ReportError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".report.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ReportError::NoReports {
            dir: dir.display().to_string(),
        });
    }

    let mut reports = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let report: AuditReport =
            serde_json::from_str(&text).map_err(|e| ReportError::BadReport {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        reports.push(report);
    }

    let mut out = String::new();
    for report in &reports {
        out.push_str(&format!(
            "dataset {} (k={}, n={})\n",
            report.dataset, report.k, report.n_instances
        ));
        out.push_str(&format!(
            "  best classifier: {} + {} (validation accuracy {:.4})\n",
            report.best.spec_description, report.best.penalty, report.best.val_accuracy
        ));
        match report.test_kappa {
            Some(kappa) => {
                let status = if report.kept { "kept" } else { "discarded" };
                out.push_str(&format!(
                    "  test kappa {:.4} -> {} ({})\n",
                    kappa,
                    status,
                    agreement_band(kappa)
                ));
            }
            None => out.push_str("  test kappa undefined\n"),
        }
        out.push_str(&format!(
            "  stratification: |S+| = {}, |S-| = {}\n",
            report.stratification.n_plus, report.stratification.n_minus
        ));
        match &report.llm {
            Some(section) => out.push_str(&format!(
                "  LLM results: {} models, {} subset rows\n",
                section.coverage.len(),
                section.subset_scores.len()
            )),
            None => out.push_str("  LLM results: absent\n"),
        }
        out.push('\n');
    }

    // the family table is an all-datasets artifact; every report in the
    // run embeds the same one
    match reports.iter().find_map(|r| r.family_table.as_ref()) {
        Some(table) => {
            out.push_str(&format!(
                "family table ({} testable families, unit {:?}, sorted by raw p):\n",
                table.testable_count(),
                table.unit
            ));
            out.push_str(&format!(
                "  {:<16} {:>10} {:>12} {:>8} {:>7}\n",
                "family", "p", "adjusted p", "models", "pairs"
            ));
            for row in &table.rows {
                out.push_str(&format!(
                    "  {:<16} {:>10} {:>12} {:>8} {:>7}\n",
                    row.family,
                    row.p_raw.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into()),
                    row.p_adjusted
                        .map(|p| format!("{p:.6}"))
                        .unwrap_or_else(|| "-".into()),
                    row.n_models,
                    row.n_pairs,
                ));
            }
        }
        None => out.push_str("family table: absent (no LLM results supplied)\n"),
    }
    Ok(out)
}

/// Parameters of the synthetic-generation command.
#[derive(Debug, Clone)]
pub struct SynthCommand {
    pub config: SynthConfig,
    /// (model count, follow probability, background probability)
    pub cue_follower: Option<(usize, f64, f64)>,
    /// (model count, accuracy)
    pub capability: Option<(usize, f64)>,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct SynthOutcome {
    pub expected_kappa: f64,
    pub dataset_path: PathBuf,
    pub results_path: Option<PathBuf>,
    pub cues_path: PathBuf,
}

/// Generates a planted-cue dataset (and optional simulated LLM results)
/// in the standard corpus file formats.
pub fn run_synth(cmd: &SynthCommand) -> Result<SynthOutcome, ReportError> {
    let (dataset, cues) = generate(&cmd.config)?;
    std::fs::create_dir_all(&cmd.out_dir).map_err(io_err(&cmd.out_dir))?;

    let dataset_path = cmd.out_dir.join(format!("{}.jsonl", dataset.name));
    save_dataset(&dataset, &dataset_path, FileFormat::LinesOfRecords)?;

    let cues_path = cmd.out_dir.join(format!("{}.cues.json", dataset.name));
    let cue_map: BTreeMap<&str, bool> = dataset
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.id.as_str(), cues.is_cued(i)))
        .collect();
    write_json(&cues_path, &cue_map)?;

    let mut sets = Vec::new();
    let mut sim_seed = cmd.config.seed;
    if let Some((count, follow, background)) = cmd.cue_follower {
        for i in 1..=count {
            sim_seed = sim_seed.wrapping_add(1);
            sets.push(simulate_llm(
                &dataset,
                &cues,
                &SimPolicy::CueFollower { follow, background },
                &format!("cue_follower-{i}"),
                "cue_follower",
                sim_seed,
            )?);
        }
    }
    if let Some((count, accuracy)) = cmd.capability {
        for i in 1..=count {
            sim_seed = sim_seed.wrapping_add(1);
            sets.push(simulate_llm(
                &dataset,
                &cues,
                &SimPolicy::Capability { accuracy },
                &format!("capability-{i}"),
                "capability",
                sim_seed,
            )?);
        }
    }
    let results_path = if sets.is_empty() {
        None
    } else {
        let merged = LlmResultSet::merge(sets)?;
        let path = cmd.out_dir.join(format!("{}.results.jsonl", dataset.name));
        save_llm_results(&merged, &path)?;
        Some(path)
    };

    Ok(SynthOutcome {
        expected_kappa: expected_kappa(cmd.config.rho, cmd.config.k),
        dataset_path,
        results_path,
        cues_path,
    })
}
