//! `benchaudit` command line: audit benchmark datasets for n-gram
//! shortcut predictability, generate planted-cue synthetic data, and
//! summarize report directories.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use benchaudit_core::audit::AuditConfig;
use benchaudit_core::features::FitScope;
use benchaudit_core::metrics::ChanceMode;
use benchaudit_core::report::{render_summary, run_audit, run_synth, RunConfig, SynthCommand};
use benchaudit_core::solver::{PenaltyConfig, PenaltyKind};
use benchaudit_core::stats::PairUnit;
use benchaudit_core::synth::{CueKind, SynthConfig};

#[derive(Parser)]
#[command(
    name = "benchaudit",
    version,
    about = "Audit multiple-choice benchmarks for n-gram label shortcuts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full audit over one or more datasets and write reports
    Audit(AuditArgs),
    /// Generate a planted-cue dataset with optional simulated LLM results
    Synth(SynthArgs),
    /// Print a human-readable summary of a report directory
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ChanceModeArg {
    Uniform,
    Marginal,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdfScopeArg {
    Train,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyUnitArg {
    /// One difference per (model, dataset) pair
    Pair,
    /// Average models within a family per dataset first
    DatasetMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum CueKindArg {
    Unigram,
    Bigram,
}

#[derive(Args)]
struct AuditArgs {
    /// Dataset file, JSON lines or delimited table; repeatable
    #[arg(long = "dataset", required = true, num_args = 1)]
    dataset: Vec<PathBuf>,
    /// Instance-level LLM results file; repeatable
    #[arg(long = "llm-results", num_args = 1)]
    llm_results: Vec<PathBuf>,
    /// Directory holding a GPT-2 style vocabulary + merges file pair;
    /// omitted: a merge-free byte-level tokenizer is used
    #[arg(long = "bpe-dir")]
    bpe_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated train,validation,test fractions summing to 1
    #[arg(long = "split-ratios", default_value = "0.6,0.2,0.2")]
    split_ratios: String,
    #[arg(long = "chance-mode", value_enum, default_value_t = ChanceModeArg::Uniform)]
    chance_mode: ChanceModeArg,
    /// Which splits fit vocabularies, df counts and standardization
    #[arg(long = "idf-scope", value_enum, default_value_t = IdfScopeArg::Train)]
    idf_scope: IdfScopeArg,
    /// Comma-separated kind:lambda penalties, e.g. l2:1,l1:1,l1:10
    #[arg(long = "lambda-grid", default_value = "l2:1,l1:1,l1:10")]
    lambda_grid: String,
    /// Paired unit of the family t-tests
    #[arg(long = "family-unit", value_enum, default_value_t = FamilyUnitArg::Pair)]
    family_unit: FamilyUnitArg,
    /// Output directory for reports and tables
    #[arg(long = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "synth")]
    name: String,
    /// Cue reliability in [0, 1]
    #[arg(long)]
    rho: f64,
    /// Number of choices
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Number of instances
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long = "vocab-size", default_value_t = 30)]
    vocab_size: usize,
    #[arg(long = "prompt-len", default_value_t = 12)]
    prompt_len: usize,
    #[arg(long, value_enum, default_value_t = CueKindArg::Unigram)]
    cue: CueKindArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Simulate a cue-follower family: count:follow_prob:background_prob
    #[arg(long = "cue-family")]
    cue_family: Option<String>,
    /// Simulate a capability family: count:accuracy
    #[arg(long = "capability-family")]
    capability_family: Option<String>,
    #[arg(long = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing *.report.json files
    dir: PathBuf,
}

fn parse_ratios(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().context("ratio is not a number"))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("--split-ratios needs exactly 3 comma-separated fractions");
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn parse_lambda_grid(text: &str) -> Result<Vec<PenaltyConfig>> {
    let mut penalties = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let (kind, lambda) = part
            .split_once(':')
            .with_context(|| format!("penalty {part:?} is not kind:lambda"))?;
        let kind = match kind.to_lowercase().as_str() {
            "l1" => PenaltyKind::L1,
            "l2" => PenaltyKind::L2,
            other => bail!("unknown penalty kind {other:?} (expected l1 or l2)"),
        };
        let lambda: f64 = lambda
            .parse()
            .with_context(|| format!("lambda {lambda:?} is not a number"))?;
        penalties.push(PenaltyConfig { kind, lambda });
    }
    if penalties.is_empty() {
        bail!("--lambda-grid is empty");
    }
    Ok(penalties)
}

fn parse_family(text: &str, fields: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .context("family field is not a number")
        })
        .collect::<Result<_>>()?;
    if parts.len() != fields {
        bail!("family spec {text:?} needs {fields} colon-separated fields");
    }
    Ok(parts)
}

fn cmd_audit(args: &AuditArgs) -> Result<i32> {
    let mut config = RunConfig::new(&args.out);
    config.dataset_paths = args.dataset.clone();
    config.llm_result_paths = args.llm_results.clone();
    config.bpe_dir = args.bpe_dir.clone();
    config.pair_unit = match args.family_unit {
        FamilyUnitArg::Pair => PairUnit::PerModelDataset,
        FamilyUnitArg::DatasetMean => PairUnit::PerDatasetMean,
    };
    config.audit = AuditConfig {
        ratios: parse_ratios(&args.split_ratios)?,
        seed: args.seed,
        chance_mode: match args.chance_mode {
            ChanceModeArg::Uniform => ChanceMode::Uniform,
            ChanceModeArg::Marginal => ChanceMode::Marginal,
        },
        fit_scope: match args.idf_scope {
            IdfScopeArg::Train => FitScope::TrainOnly,
            IdfScopeArg::All => FitScope::AllSplits,
        },
        penalties: parse_lambda_grid(&args.lambda_grid)?,
        ..AuditConfig::default()
    };

    let summary = run_audit(&config)?;
    for name in &summary.dataset_names {
        println!("audited {name}");
    }
    println!(
        "reports written to {} ({} dataset{})",
        args.out.display(),
        summary.dataset_names.len(),
        if summary.dataset_names.len() == 1 {
            ""
        } else {
            "s"
        }
    );
    if summary.exit_code() == 3 {
        eprintln!("no testable LLM family (need >= 2 usable pairs in some family)");
    }
    Ok(summary.exit_code())
}

fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let cue_follower = match &args.cue_family {
        Some(text) => {
            let f = parse_family(text, 3)?;
            Some((f[0] as usize, f[1], f[2]))
        }
        None => None,
    };
    let capability = match &args.capability_family {
        Some(text) => {
            let f = parse_family(text, 2)?;
            Some((f[0] as usize, f[1]))
        }
        None => None,
    };
    let cmd = SynthCommand {
        config: SynthConfig {
            name: args.name.clone(),
            k: args.k,
            n: args.n,
            vocab_size: args.vocab_size,
            prompt_len: args.prompt_len,
            rho: args.rho,
            cue: match args.cue {
                CueKindArg::Unigram => CueKind::Unigram,
                CueKindArg::Bigram => CueKind::Bigram,
            },
            seed: args.seed,
        },
        cue_follower,
        capability,
        out_dir: args.out.clone(),
    };
    let outcome = run_synth(&cmd)?;
    println!("expected kappa: {}", outcome.expected_kappa);
    println!("dataset: {}", outcome.dataset_path.display());
    if let Some(results) = &outcome.results_path {
        println!("llm results: {}", results.display());
    }
    Ok(0)
}

fn cmd_report(args: &ReportArgs) -> Result<i32> {
    let summary = render_summary(&args.dir)?;
    print!("{summary}");
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Audit(args) => cmd_audit(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
