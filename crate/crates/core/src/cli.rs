//! Command-line surface: `evaluate`, `reconstruct`, `subsample`, `lint`
//! and `rank`.
//!
//! Exit codes: 0 ok, 1 input error, 2 lint errors, 3 guardrail failure.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;
use thiserror::Error;

use crate::compliance::{
    guardrail_check, has_errors, lint_manifest, ComplianceError, EvaluationManifest,
    GuardrailOutcome, LostEvidenceThreshold,
};
use crate::ingest::{
    build_matrix, expand_matrix, parse_matrices, parse_records, reconstruct_matrix, IngestError,
    RecordFormat,
};
use crate::metrics::metric_set;
use crate::model::{
    ConfusionMatrix, CostModel, GroupKey, LabeledRecord, MetricSet, ModelError, PartialCounts,
};
use crate::report::{
    lost_evidence_summary, rank_models, render_distributions, render_lost_evidence_summary,
    render_ranking, render_table, OutputFormat, RankKey, ReportError, TableOptions,
};
use crate::resample::{subsample_distribution, ResampleError, SubsampleMetric, SubsamplePlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_LINT: i32 = 2;
pub const EXIT_GUARDRAIL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "screenlit",
    version,
    about = "Evaluate literature-screening classifiers with chance-anchored, cost-sensitive metrics"
)]
pub struct Cli {
    /// FN:FP cost ratio; each positive example carries this weight
    #[arg(long, global = true, default_value_t = 10.0)]
    pub weight: f64,

    /// Output format: text, markdown, csv or json
    #[arg(long, global = true, default_value = "text")]
    pub format: String,

    /// Master seed for subsampling
    #[arg(long, global = true, env = "SCREENLIT_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute metrics per (model, dataset) and render a table
    Evaluate(EvaluateArgs),
    /// Rebuild a confusion matrix from N, P, n and TN
    Reconstruct(ReconstructArgs),
    /// Metric stability under subsampling without replacement
    Subsample(SubsampleArgs),
    /// Check an evaluation manifest against the reporting rules
    Lint(LintArgs),
    /// Order models by a metric
    Rank(RankArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Labeled records (CSV, or JSON when the extension is .json)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Confusion-matrix JSON (one object or an array)
    #[arg(long)]
    pub cm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Fail with exit code 3 when any group loses more evidence than this
    #[arg(long)]
    pub max_lost_evidence: Option<f64>,
    /// Decimals for correlations and ratios
    #[arg(long, default_value_t = 3)]
    pub decimals: usize,
    /// Emit per-model lost-evidence min/median/max instead of the table
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Gold negatives
    #[arg(long = "N")]
    pub gold_negatives: u64,
    /// Gold positives
    #[arg(long = "P")]
    pub gold_positives: u64,
    /// Items the classifier labelled negative
    #[arg(long = "n")]
    pub predicted_negatives: u64,
    /// True negatives
    #[arg(long = "TN")]
    pub true_negatives: u64,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = crate::resample::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// mcc, wmcc, recall, lost_evidence, accuracy or cost
    #[arg(long, default_value = "wmcc")]
    pub metric: String,
    /// Select one model when the input holds several
    #[arg(long)]
    pub model: Option<String>,
    /// Select one dataset when the input holds several
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub decimals: usize,
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Records to check against the manifest's lost-evidence threshold
    #[arg(long, conflicts_with = "cm")]
    pub input: Option<PathBuf>,
    /// Confusion matrices to check against the manifest's threshold
    #[arg(long)]
    pub cm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub source: Source,
    /// wmcc, mcc, cost or lost_evidence
    #[arg(long, default_value = "wmcc")]
    pub key: String,
    #[arg(long, default_value_t = 3)]
    pub decimals: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Resample(#[from] ResampleError),
    #[error("{0}")]
    Compliance(#[from] ComplianceError),
    #[error("{0}")]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let format: OutputFormat = cli.format.parse()?;
    let cost = CostModel::new(cli.weight)?;
    match &cli.command {
        Command::Evaluate(args) => evaluate(args, format, &cost, out, err),
        Command::Reconstruct(args) => reconstruct(args, out),
        Command::Subsample(args) => subsample(args, format, cli.seed, &cost, out),
        Command::Lint(args) => lint(args, format, &cost, out, err),
        Command::Rank(args) => rank(args, format, &cost, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Open {
            path: path.to_owned(),
            source,
        })
}

/// Matrices per group, from either records or matrix JSON.
fn load_matrices(
    input: Option<&Path>,
    cm: Option<&Path>,
) -> Result<IndexMap<GroupKey, ConfusionMatrix>, CliError> {
    match (input, cm) {
        (Some(path), _) => {
            let groups = parse_records(open(path)?, RecordFormat::from_path(path))?;
            groups
                .iter()
                .map(|(key, records)| Ok((key.clone(), build_matrix(records)?)))
                .collect()
        }
        (None, Some(path)) => Ok(parse_matrices(open(path)?)?),
        (None, None) => Err(CliError::Usage("one of --input or --cm is required".into())),
    }
}

/// Column labels: the model alone unless several datasets are present.
fn labelled<V: Clone>(groups: &IndexMap<GroupKey, V>) -> IndexMap<String, V> {
    let first_dataset = groups.keys().next().map(|k| k.dataset.clone());
    let one_dataset = groups
        .keys()
        .all(|k| Some(k.dataset.clone()) == first_dataset);
    groups
        .iter()
        .map(|(key, v)| {
            let label = match (&key.model, one_dataset) {
                (Some(model), true) => model.clone(),
                _ => key.to_string(),
            };
            (label, v.clone())
        })
        .collect()
}

fn metric_sets(
    matrices: &IndexMap<GroupKey, ConfusionMatrix>,
    cost: &CostModel<f64>,
) -> IndexMap<GroupKey, MetricSet<f64>> {
    matrices
        .iter()
        .map(|(k, cm)| (k.clone(), metric_set(cm, cost)))
        .collect()
}

/// Reports every group over the threshold on `err`; returns whether all passed.
fn apply_guardrail(
    results: &IndexMap<String, MetricSet<f64>>,
    threshold: f64,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    let threshold = LostEvidenceThreshold::new(threshold)?;
    let mut passed = true;
    for (label, ms) in results {
        if let GuardrailOutcome::Fail { actual, threshold } = guardrail_check(ms, threshold) {
            passed = false;
            writeln!(
                err,
                "guardrail: {label} lost evidence {actual:.4} exceeds threshold {threshold:.4}; escalate to human review"
            )?;
        }
    }
    Ok(passed)
}

fn evaluate(
    args: &EvaluateArgs,
    format: OutputFormat,
    cost: &CostModel<f64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let matrices = load_matrices(args.source.input.as_deref(), args.source.cm.as_deref())?;
    let by_group = metric_sets(&matrices, cost);
    if args.summary {
        let rows = lost_evidence_summary(&by_group);
        out.write_all(render_lost_evidence_summary(&rows, format, args.decimals)?.as_bytes())?;
    } else {
        let options = TableOptions {
            decimals: args.decimals,
            format,
        };
        out.write_all(render_table(&labelled(&by_group), &options)?.as_bytes())?;
    }
    if let Some(threshold) = args.max_lost_evidence {
        if !apply_guardrail(&labelled(&by_group), threshold, err)? {
            return Ok(EXIT_GUARDRAIL);
        }
    }
    Ok(EXIT_OK)
}

fn reconstruct(args: &ReconstructArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cm = reconstruct_matrix(&PartialCounts {
        gold_negatives: args.gold_negatives,
        gold_positives: args.gold_positives,
        predicted_negatives: args.predicted_negatives,
        true_negatives: args.true_negatives,
    })?;
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&cm).expect("matrix serializes")
    )?;
    Ok(EXIT_OK)
}

fn subsample(
    args: &SubsampleArgs,
    format: OutputFormat,
    seed: u64,
    cost: &CostModel<f64>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let metric: SubsampleMetric = args.metric.parse().map_err(CliError::Usage)?;
    let mut population: IndexMap<GroupKey, Vec<LabeledRecord>> =
        match (&args.source.input, &args.source.cm) {
            (Some(path), _) => parse_records(open(path)?, RecordFormat::from_path(path))?,
            (None, Some(path)) => parse_matrices(open(path)?)?
                .into_iter()
                .map(|(k, cm)| (k, expand_matrix(&cm, "r")))
                .collect(),
            (None, None) => {
                return Err(CliError::Usage("one of --input or --cm is required".into()))
            }
        };
    population.retain(|k, _| {
        args.model
            .as_ref()
            .is_none_or(|m| k.model.as_ref() == Some(m))
            && args
                .dataset
                .as_ref()
                .is_none_or(|d| k.dataset.as_ref() == Some(d))
    });
    let records = match population.len() {
        1 => population.swap_remove_index(0).expect("one group").1,
        0 => {
            return Err(CliError::Usage(
                "no records match the selected model/dataset".into(),
            ))
        }
        _ => {
            let names: Vec<String> = population.keys().map(ToString::to_string).collect();
            return Err(CliError::Usage(format!(
                "input holds several groups ({}); select one with --model/--dataset",
                names.join(", ")
            )));
        }
    };
    let plan = SubsamplePlan::new(args.sizes.clone(), metric, *cost)
        .with_iterations(args.iterations)
        .with_seed(seed);
    let distributions = subsample_distribution(&records, &plan)?;
    out.write_all(
        render_distributions(metric.name(), &distributions, format, args.decimals)?.as_bytes(),
    )?;
    Ok(EXIT_OK)
}

fn lint(
    args: &LintArgs,
    format: OutputFormat,
    cost: &CostModel<f64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let manifest = EvaluationManifest::from_reader(open(&args.manifest)?)?;
    let findings = lint_manifest(&manifest);
    match format {
        OutputFormat::Json => {
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&findings).expect("findings serialize")
            )?;
        }
        _ => {
            for finding in &findings {
                writeln!(out, "{finding}")?;
            }
        }
    }
    writeln!(err, "{} finding(s)", findings.len())?;
    if has_errors(&findings) {
        return Ok(EXIT_LINT);
    }
    if args.input.is_some() || args.cm.is_some() {
        let Some(threshold) = manifest.lost_evidence_threshold else {
            return Ok(EXIT_OK);
        };
        let matrices = load_matrices(args.input.as_deref(), args.cm.as_deref())?;
        if !apply_guardrail(&labelled(&metric_sets(&matrices, cost)), threshold, err)? {
            return Ok(EXIT_GUARDRAIL);
        }
    }
    Ok(EXIT_OK)
}

fn rank(
    args: &RankArgs,
    format: OutputFormat,
    cost: &CostModel<f64>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let key: RankKey = args.key.parse()?;
    let matrices = load_matrices(args.source.input.as_deref(), args.source.cm.as_deref())?;
    let results = labelled(&metric_sets(&matrices, cost));
    let ranking = rank_models(&results, key);
    out.write_all(render_ranking(&ranking, key, format, args.decimals)?.as_bytes())?;
    Ok(EXIT_OK)
}
