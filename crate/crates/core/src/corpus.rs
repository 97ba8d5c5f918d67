//! Benchmark datasets, instance-level LLM results, and split assignment.
//!
//! File formats: datasets and result sets are one JSON record per line,
//! with a delimited-table (CSV) variant whose array field is encoded as a
//! `|`-separated string. Loading validates label ranges and id uniqueness;
//! everything is immutable after construction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse failure: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("instance {id}: gold index {gold} outside label space of size {k}")]
    LabelSpaceViolation { id: String, gold: usize, k: usize },
    #[error("duplicate instance id {id}")]
    DuplicateId { id: String },
    #[error("instance {id}: prompt is empty after trimming")]
    EmptyPrompt { id: String },
    #[error("dataset has no instances")]
    EmptyDataset,
    #[error("label space must have at least 2 choices, got {k}")]
    LabelSpaceTooSmall { k: usize },
    #[error("label space contains duplicate choice {choice:?}")]
    DuplicateChoice { choice: String },
    #[error("manifest declares {expected} choices for {dataset}, file has {actual}")]
    ManifestMismatch {
        dataset: String,
        expected: usize,
        actual: usize,
    },
    #[error("split ratios must be non-negative and sum to 1, got {ratios:?}")]
    BadRatios { ratios: [f64; 3] },
    #[error("{split} split is empty although its ratio {ratio} would grant >=1 instance")]
    EmptySplit { split: &'static str, ratio: f64 },
    #[error(
        "conflicting correctness for model {model} on {dataset}/{instance_id}"
    )]
    ConflictingRecord {
        model: String,
        dataset: String,
        instance_id: String,
    },
    #[error("model {model} appears under two families: {first} and {second}")]
    ConflictingFamily {
        model: String,
        first: String,
        second: String,
    },
    #[error("result record references unknown dataset {dataset}")]
    UnknownDataset { dataset: String },
    #[error("result record for {dataset} references unknown instance {instance_id}")]
    UnknownInstance {
        dataset: String,
        instance_id: String,
    },
}

/// One multiple-choice item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub prompt: String,
    pub gold: usize,
}

/// A validated multiple-choice dataset with a fixed choice set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkDataset {
    pub name: String,
    pub label_space: Vec<String>,
    pub instances: Vec<Instance>,
    id_index: HashMap<String, usize>,
}

impl BenchmarkDataset {
    pub fn new(
        name: String,
        label_space: Vec<String>,
        instances: Vec<Instance>,
    ) -> Result<Self, CorpusError> {
        let k = label_space.len();
        if k < 2 {
            return Err(CorpusError::LabelSpaceTooSmall { k });
        }
        let mut choices = HashSet::new();
        for choice in &label_space {
            if !choices.insert(choice) {
                return Err(CorpusError::DuplicateChoice {
                    choice: choice.clone(),
                });
            }
        }
        if instances.is_empty() {
            return Err(CorpusError::EmptyDataset);
        }
        let mut id_index = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if inst.gold >= k {
                return Err(CorpusError::LabelSpaceViolation {
                    id: inst.id.clone(),
                    gold: inst.gold,
                    k,
                });
            }
            if inst.prompt.trim().is_empty() {
                return Err(CorpusError::EmptyPrompt {
                    id: inst.id.clone(),
                });
            }
            if id_index.insert(inst.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: inst.id.clone(),
                });
            }
        }
        Ok(Self {
            name,
            label_space,
            instances,
            id_index,
        })
    }

    pub fn k(&self) -> usize {
        self.label_space.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.id_index.get(id).map(|&i| &self.instances[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }
}

/// Dataset file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// One JSON record per line.
    LinesOfRecords,
    /// CSV with a header row; the `choices` array is `|`-joined.
    DelimitedTable,
}

impl FileFormat {
    /// `.csv` and `.tsv` files are delimited tables, everything else is
    /// treated as JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("tsv") => FileFormat::DelimitedTable,
            _ => FileFormat::LinesOfRecords,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    id: String,
    prompt: String,
    choices: Vec<String>,
    gold: usize,
}

fn delimited_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, csv::Error> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => b'\t',
        _ => b',',
    };
    csv::ReaderBuilder::new().delimiter(delimiter).from_path(path)
}

fn dataset_name_from_path(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

/// Loads and validates a dataset file; input order is preserved. The
/// label space is the choice list shared by every record (records must
/// agree on it).
pub fn load_dataset(path: &Path, format: FileFormat) -> Result<BenchmarkDataset, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let parse_err = |line: usize, message: String| CorpusError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };

    let mut records: Vec<DatasetRecord> = Vec::new();
    match format {
        FileFormat::LinesOfRecords => {
            let file = std::fs::File::open(path).map_err(io_err)?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: DatasetRecord = serde_json::from_str(&line)
                    .map_err(|e| parse_err(idx + 1, e.to_string()))?;
                records.push(record);
            }
        }
        FileFormat::DelimitedTable => {
            let mut reader = delimited_reader(path).map_err(|e| parse_err(1, e.to_string()))?;
            #[derive(Deserialize)]
            struct Row {
                id: String,
                prompt: String,
                choices: String,
                gold: usize,
            }
            for (idx, row) in reader.deserialize::<Row>().enumerate() {
                let row = row.map_err(|e| parse_err(idx + 2, e.to_string()))?;
                records.push(DatasetRecord {
                    id: row.id,
                    prompt: row.prompt,
                    choices: row.choices.split('|').map(str::to_string).collect(),
                    gold: row.gold,
                });
            }
        }
    }

    if records.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let label_space = records[0].choices.clone();
    for (idx, record) in records.iter().enumerate() {
        if record.choices != label_space {
            return Err(parse_err(
                idx + 1,
                format!(
                    "choice set {:?} differs from the first record's {:?}",
                    record.choices, label_space
                ),
            ));
        }
    }
    let instances = records
        .into_iter()
        .map(|r| Instance {
            id: r.id,
            prompt: r.prompt,
            gold: r.gold,
        })
        .collect();
    BenchmarkDataset::new(dataset_name_from_path(path), label_space, instances)
}

/// Writes a dataset back out in the given format; `load -> save -> load`
/// round-trips field for field.
pub fn save_dataset(
    dataset: &BenchmarkDataset,
    path: &Path,
    format: FileFormat,
) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    match format {
        FileFormat::LinesOfRecords => {
            let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
            for inst in &dataset.instances {
                let record = DatasetRecord {
                    id: inst.id.clone(),
                    prompt: inst.prompt.clone(),
                    choices: dataset.label_space.clone(),
                    gold: inst.gold,
                };
                let json = serde_json::to_string(&record).expect("record serializes");
                writeln!(out, "{json}").map_err(io_err)?;
            }
        }
        FileFormat::DelimitedTable => {
            let mut writer = csv::Writer::from_path(path).map_err(|e| CorpusError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: e.to_string(),
            })?;
            writer
                .write_record(["id", "prompt", "choices", "gold"])
                .map_err(|e| CorpusError::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    message: e.to_string(),
                })?;
            for inst in &dataset.instances {
                writer
                    .write_record([
                        inst.id.as_str(),
                        inst.prompt.as_str(),
                        &dataset.label_space.join("|"),
                        &inst.gold.to_string(),
                    ])
                    .map_err(|e| CorpusError::Parse {
                        path: path.display().to_string(),
                        line: 0,
                        message: e.to_string(),
                    })?;
            }
            writer.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

/// Declared per-dataset choice counts, cross-checked at load time.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub choice_counts: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let choice_counts = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?;
        Ok(Self { choice_counts })
    }

    pub fn verify(&self, dataset: &BenchmarkDataset) -> Result<(), CorpusError> {
        if let Some(&expected) = self.choice_counts.get(&dataset.name) {
            if expected != dataset.k() {
                return Err(CorpusError::ManifestMismatch {
                    dataset: dataset.name.clone(),
                    expected,
                    actual: dataset.k(),
                });
            }
        }
        Ok(())
    }
}

/// Disjoint, exhaustive train/validation/test id sets. Ids are stored in
/// dataset order, which is the row order of every derived feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub stratified: bool,
}

impl SplitAssignment {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

fn allocate(counts: usize, ratios: [f64; 3]) -> [usize; 3] {
    let n = counts as f64;
    let mut sizes = [
        (n * ratios[0]).floor() as usize,
        (n * ratios[1]).floor() as usize,
        (n * ratios[2]).floor() as usize,
    ];
    let mut leftover = counts - (sizes[0] + sizes[1] + sizes[2]);
    // remainders go train-first
    let mut slot = 0;
    while leftover > 0 {
        sizes[slot % 3] += 1;
        leftover -= 1;
        slot += 1;
    }
    sizes
}

/// Seeded shuffle-and-cut split. Sizes are floor-allocated from the
/// ratios with remainders assigned train-first. With `stratified` the
/// shuffle and cut happen within each gold-label group and the groups are
/// merged, preserving per-split label marginals.
pub fn make_splits(
    dataset: &BenchmarkDataset,
    ratios: [f64; 3],
    seed: u64,
    stratified: bool,
) -> Result<SplitAssignment, CorpusError> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios { ratios });
    }
    if dataset.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        let mut by_label = vec![Vec::new(); dataset.k()];
        for (i, inst) in dataset.instances.iter().enumerate() {
            by_label[inst.gold].push(i);
        }
        by_label.into_iter().filter(|g| !g.is_empty()).collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };

    let mut split_indices: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let sizes = allocate(group.len(), ratios);
        let mut offset = 0;
        for (slot, &size) in sizes.iter().enumerate() {
            split_indices[slot].extend(&group[offset..offset + size]);
            offset += size;
        }
    }

    for indices in &mut split_indices {
        indices.sort_unstable();
    }

    let n = dataset.len();
    let checks: [(&'static str, usize, f64); 2] = [
        ("validation", 1, ratios[1]),
        ("test", 2, ratios[2]),
    ];
    for (name, slot, ratio) in checks {
        if split_indices[slot].is_empty() && ratio > 0.0 && (n as f64 * ratio).floor() >= 1.0 {
            return Err(CorpusError::EmptySplit { split: name, ratio });
        }
    }
    if split_indices[0].is_empty() && ratios[0] > 0.0 {
        log::warn!(
            "train split of {} came out empty (n={}, ratios={:?})",
            dataset.name,
            n,
            ratios
        );
    }

    let ids = |indices: &[usize]| {
        indices
            .iter()
            .map(|&i| dataset.instances[i].id.clone())
            .collect()
    };
    Ok(SplitAssignment {
        train: ids(&split_indices[0]),
        validation: ids(&split_indices[1]),
        test: ids(&split_indices[2]),
        seed,
        ratios,
        stratified,
    })
}

/// One instance-level LLM result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmRecord {
    pub model: String,
    pub family: String,
    pub dataset: String,
    pub instance_id: String,
    pub correct: bool,
}

/// Deduplicated, validated result records sorted by
/// (family, model, dataset, instance).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LlmResultSet {
    pub records: Vec<LlmRecord>,
}

impl LlmResultSet {
    pub fn from_records(records: Vec<LlmRecord>) -> Result<Self, CorpusError> {
        let mut seen: HashMap<(String, String, String), bool> = HashMap::new();
        let mut family_of: HashMap<String, String> = HashMap::new();
        let mut kept = Vec::new();
        for record in records {
            if let Some(prev) = family_of.get(&record.model) {
                if prev != &record.family {
                    return Err(CorpusError::ConflictingFamily {
                        model: record.model.clone(),
                        first: prev.clone(),
                        second: record.family.clone(),
                    });
                }
            } else {
                family_of.insert(record.model.clone(), record.family.clone());
            }
            let key = (
                record.model.clone(),
                record.dataset.clone(),
                record.instance_id.clone(),
            );
            match seen.get(&key) {
                Some(&prev) if prev != record.correct => {
                    return Err(CorpusError::ConflictingRecord {
                        model: record.model,
                        dataset: record.dataset,
                        instance_id: record.instance_id,
                    });
                }
                Some(_) => {} // exact duplicate, drop
                None => {
                    seen.insert(key, record.correct);
                    kept.push(record);
                }
            }
        }
        kept.sort_by(|a, b| {
            (&a.family, &a.model, &a.dataset, &a.instance_id).cmp(&(
                &b.family,
                &b.model,
                &b.dataset,
                &b.instance_id,
            ))
        });
        Ok(Self { records: kept })
    }

    pub fn merge(sets: Vec<LlmResultSet>) -> Result<Self, CorpusError> {
        Self::from_records(sets.into_iter().flat_map(|s| s.records).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Model -> (instance id -> correct) for one dataset. Errors if a
    /// record names an instance the dataset does not contain.
    pub fn join<'a>(
        &'a self,
        dataset: &BenchmarkDataset,
    ) -> Result<BTreeMap<&'a str, BTreeMap<&'a str, bool>>, CorpusError> {
        let mut by_model: BTreeMap<&str, BTreeMap<&str, bool>> = BTreeMap::new();
        for record in self.records.iter().filter(|r| r.dataset == dataset.name) {
            if dataset.instance(&record.instance_id).is_none() {
                return Err(CorpusError::UnknownInstance {
                    dataset: dataset.name.clone(),
                    instance_id: record.instance_id.clone(),
                });
            }
            by_model
                .entry(&record.model)
                .or_default()
                .insert(&record.instance_id, record.correct);
        }
        Ok(by_model)
    }

    /// Per-model fraction of the dataset's instances that have a record.
    pub fn coverage(
        &self,
        dataset: &BenchmarkDataset,
    ) -> Result<BTreeMap<String, f64>, CorpusError> {
        let joined = self.join(dataset)?;
        Ok(joined
            .into_iter()
            .map(|(model, records)| {
                (model.to_string(), records.len() as f64 / dataset.len() as f64)
            })
            .collect())
    }

    /// Every record must name a known dataset and an instance it contains.
    pub fn validate_against(&self, datasets: &[&BenchmarkDataset]) -> Result<(), CorpusError> {
        let by_name: HashMap<&str, &BenchmarkDataset> =
            datasets.iter().map(|d| (d.name.as_str(), *d)).collect();
        for record in &self.records {
            let Some(dataset) = by_name.get(record.dataset.as_str()) else {
                return Err(CorpusError::UnknownDataset {
                    dataset: record.dataset.clone(),
                });
            };
            if dataset.instance(&record.instance_id).is_none() {
                return Err(CorpusError::UnknownInstance {
                    dataset: record.dataset.clone(),
                    instance_id: record.instance_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn family_of(&self, model: &str) -> Option<&str> {
        self.records
            .iter()
            .find(|r| r.model == model)
            .map(|r| r.family.as_str())
    }
}

/// Loads a results file; format chosen by extension (`.csv`/`.tsv` are
/// delimited, anything else JSON lines).
pub fn load_llm_results(path: &Path) -> Result<LlmResultSet, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let parse_err = |line: usize, message: String| CorpusError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut records = Vec::new();
    match FileFormat::from_path(path) {
        FileFormat::LinesOfRecords => {
            let file = std::fs::File::open(path).map_err(io_err)?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: LlmRecord = serde_json::from_str(&line)
                    .map_err(|e| parse_err(idx + 1, e.to_string()))?;
                records.push(record);
            }
        }
        FileFormat::DelimitedTable => {
            let mut reader = delimited_reader(path).map_err(|e| parse_err(1, e.to_string()))?;
            for (idx, row) in reader.deserialize::<LlmRecord>().enumerate() {
                records.push(row.map_err(|e| parse_err(idx + 2, e.to_string()))?);
            }
        }
    }
    LlmResultSet::from_records(records)
}

/// Writes records as JSON lines.
pub fn save_llm_results(results: &LlmResultSet, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for record in &results.records {
        let json = serde_json::to_string(record).expect("record serializes");
        writeln!(out, "{json}").map_err(io_err)?;
    }
    Ok(())
}
