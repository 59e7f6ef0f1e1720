//! Rankings, metric tables and plot-ready summaries.
//!
//! Output is deterministic for fixed input. Values are rounded only here.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::model::{GroupKey, MetricSet, MetricValue};
use crate::resample::SubsampleDistribution;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unsupported output format {0:?} (expected text, markdown, csv or json)")]
    UnsupportedFormat(String),
    #[error("unknown ranking key {0:?} (expected wmcc, mcc, cost or lost_evidence)")]
    UnknownRankKey(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Markdown,
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Self::Text),
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(ReportError::UnsupportedFormat(s.to_owned())),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Markdown => "markdown",
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankKey {
    Wmcc,
    Mcc,
    Cost,
    LostEvidence,
}

impl RankKey {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Self::Wmcc | Self::Mcc)
    }

    pub fn value_of<T: Real>(self, ms: &MetricSet<T>) -> MetricValue<T> {
        match self {
            Self::Wmcc => ms.wmcc,
            Self::Mcc => ms.mcc,
            Self::Cost => MetricValue::new(ms.cost),
            Self::LostEvidence => ms.lost_evidence,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Wmcc => "wmcc",
            Self::Mcc => "mcc",
            Self::Cost => "cost",
            Self::LostEvidence => "lost_evidence",
        }
    }
}

impl FromStr for RankKey {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wmcc" => Ok(Self::Wmcc),
            "mcc" => Ok(Self::Mcc),
            "cost" => Ok(Self::Cost),
            "lost_evidence" | "lost-evidence" => Ok(Self::LostEvidence),
            _ => Err(ReportError::UnknownRankKey(s.to_owned())),
        }
    }
}

/// Total order used for rankings: the key (undefined last), then lower
/// cost, then lower lost evidence, then model id.
pub fn rank_cmp<T: Real>(
    key: RankKey,
    (a_id, a): (&str, &MetricSet<T>),
    (b_id, b): (&str, &MetricSet<T>),
) -> Ordering {
    key.value_of(a)
        .rank_cmp(&key.value_of(b), key.higher_is_better())
        .then_with(|| MetricValue::new(a.cost).rank_cmp(&MetricValue::new(b.cost), false))
        .then_with(|| a.lost_evidence.rank_cmp(&b.lost_evidence, false))
        .then_with(|| a_id.cmp(b_id))
}

pub fn rank_models<T: Real>(
    results: &IndexMap<String, MetricSet<T>>,
    key: RankKey,
) -> Vec<(String, MetricValue<T>)> {
    let mut entries: Vec<(&String, &MetricSet<T>)> = results.iter().collect();
    entries.sort_by(|a, b| rank_cmp(key, (a.0, a.1), (b.0, b.1)));
    entries
        .into_iter()
        .map(|(id, ms)| (id.clone(), key.value_of(ms)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableOptions {
    /// Decimals for correlations and ratios. Percentages always use 2.
    pub decimals: usize,
    pub format: OutputFormat,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            decimals: 3,
            format: OutputFormat::Text,
        }
    }
}

const PERCENT_DECIMALS: usize = 2;

#[derive(Clone, Copy)]
enum Cell<T> {
    Count(fn(&MetricSet<T>) -> u64),
    Percent(fn(&MetricSet<T>) -> MetricValue<T>),
    Ratio(fn(&MetricSet<T>) -> MetricValue<T>),
    Cost,
}

struct Row<T> {
    label: &'static str,
    cell: Cell<T>,
    /// `Some(higher_is_better)` for rows that get a best marker.
    best: Option<bool>,
}

fn rows<T: Real>() -> Vec<Row<T>> {
    use Cell::*;
    let row = |label, cell, best| Row { label, cell, best };
    vec![
        row("True Negatives (TNs)", Count(|m| m.matrix.tn), None),
        row("False Negatives (FNs)", Count(|m| m.matrix.fn_), None),
        row("True Positives (TPs)", Count(|m| m.matrix.tp), None),
        row("False Positives (FPs)", Count(|m| m.matrix.fp), None),
        row("Referred Back", Count(|m| m.matrix.referred_back()), None),
        row("Total Articles (N)", Count(|m| m.total_n), None),
        row("Evidence Lost", Percent(|m| m.lost_evidence), Some(false)),
        row("Accuracy", Percent(|m| m.accuracy), Some(true)),
        row("MCC", Ratio(|m| m.mcc), Some(true)),
        row("Weighted MCC (WMCC)", Ratio(|m| m.wmcc), Some(true)),
        row("Precision", Ratio(|m| m.precision), Some(true)),
        row("Recall", Ratio(|m| m.recall), Some(true)),
        row("Specificity", Ratio(|m| m.specificity), Some(true)),
        row("F1", Ratio(|m| m.f1), Some(true)),
        row("PABAK", Ratio(|m| m.pabak), Some(true)),
        row("Cost", Cost, Some(false)),
        row(
            "Referral Rate",
            Percent(|m| MetricValue::new(m.referral_rate)),
            None,
        ),
    ]
}

fn fixed<T: Real>(value: MetricValue<T>, decimals: usize) -> String {
    match value {
        MetricValue::Defined(v) => format!("{v:.decimals$}"),
        MetricValue::Undefined => "NaN".into(),
    }
}

fn percent<T: Real>(value: MetricValue<T>) -> String {
    match value.map(|v| v * T::lit(100.0)) {
        MetricValue::Defined(v) => format!("{v:.PERCENT_DECIMALS$}%"),
        MetricValue::Undefined => "NaN".into(),
    }
}

fn cost_text<T: Real>(cost: T, decimals: usize) -> String {
    if cost.fract() == T::zero() {
        format!("{cost:.0}")
    } else {
        format!("{cost:.decimals$}")
    }
}

impl<T: Real> Row<T> {
    fn value(&self, ms: &MetricSet<T>) -> MetricValue<T> {
        match self.cell {
            Cell::Count(f) => MetricValue::Defined(T::from_count(f(ms))),
            Cell::Percent(f) | Cell::Ratio(f) => f(ms),
            Cell::Cost => MetricValue::new(ms.cost),
        }
    }

    fn render(&self, ms: &MetricSet<T>, decimals: usize) -> String {
        match self.cell {
            Cell::Count(f) => f(ms).to_string(),
            Cell::Percent(f) => percent(f(ms)),
            Cell::Ratio(f) => fixed(f(ms), decimals),
            Cell::Cost => cost_text(ms.cost, decimals),
        }
    }

    /// Rendered cells with `*` on every column tied with the best value
    /// at the displayed precision.
    fn cells(&self, sets: &[&MetricSet<T>], decimals: usize) -> Vec<String> {
        let mut cells: Vec<String> = sets.iter().map(|ms| self.render(ms, decimals)).collect();
        let Some(higher_is_better) = self.best else {
            return cells;
        };
        if sets.len() < 2 {
            return cells;
        }
        let best = sets
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| self.value(a).rank_cmp(&self.value(b), higher_is_better))
            .map(|(i, ms)| (i, self.value(ms)));
        if let Some((index, MetricValue::Defined(_))) = best {
            let best_text = cells[index].clone();
            for cell in cells.iter_mut().filter(|c| **c == best_text) {
                cell.push('*');
            }
        }
        cells
    }
}

#[derive(Serialize)]
struct ModelEntry<'a, T: Serialize> {
    model: &'a str,
    #[serde(flatten)]
    metrics: &'a MetricSet<T>,
}

/// Renders the metrics table: metrics as rows, models as columns.
pub fn render_table<T: Real + Serialize>(
    results: &IndexMap<String, MetricSet<T>>,
    options: &TableOptions,
) -> Result<String, ReportError> {
    if options.format == OutputFormat::Json {
        let entries: Vec<ModelEntry<T>> = results
            .iter()
            .map(|(model, metrics)| ModelEntry { model, metrics })
            .collect();
        return json_document(&entries);
    }
    let sets: Vec<&MetricSet<T>> = results.values().collect();
    let mut header = vec!["Metric".to_owned()];
    header.extend(results.keys().cloned());
    let body = if results.is_empty() {
        Vec::new()
    } else {
        rows::<T>()
            .iter()
            .map(|row| {
                let mut line = vec![row.label.to_owned()];
                line.extend(row.cells(&sets, options.decimals));
                line
            })
            .collect()
    };
    render_grid(&header, &body, options.format)
}

pub fn render_ranking<T: Real + Serialize>(
    ranking: &[(String, MetricValue<T>)],
    key: RankKey,
    format: OutputFormat,
    decimals: usize,
) -> Result<String, ReportError> {
    if format == OutputFormat::Json {
        #[derive(Serialize)]
        struct Entry<'a, T: Real + Serialize> {
            rank: usize,
            model: &'a str,
            key: &'static str,
            value: MetricValue<T>,
        }
        let entries: Vec<Entry<T>> = ranking
            .iter()
            .enumerate()
            .map(|(i, (model, value))| Entry {
                rank: i + 1,
                model,
                key: key.name(),
                value: *value,
            })
            .collect();
        return json_document(&entries);
    }
    let header = ["rank".to_owned(), "model".to_owned(), key.name().to_owned()];
    let body: Vec<Vec<String>> = ranking
        .iter()
        .enumerate()
        .map(|(i, (model, value))| {
            let text = match (key, value) {
                (RankKey::Cost, MetricValue::Defined(c)) => cost_text(*c, decimals),
                _ => fixed(*value, decimals),
            };
            vec![(i + 1).to_string(), model.clone(), text]
        })
        .collect();
    render_grid(&header, &body, format)
}

/// Spread of lost evidence for one model across datasets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LostEvidenceSummary<T = f64> {
    pub model: String,
    pub datasets: usize,
    pub min: MetricValue<T>,
    pub median: MetricValue<T>,
    pub max: MetricValue<T>,
    /// Datasets left out because lost evidence was undefined there.
    pub undefined_excluded: usize,
}

pub fn lost_evidence_summary<T: Real>(
    results: &IndexMap<GroupKey, MetricSet<T>>,
) -> Vec<LostEvidenceSummary<T>> {
    let mut by_model: IndexMap<String, Vec<MetricValue<T>>> = IndexMap::new();
    for (key, ms) in results {
        let model = key.model.clone().unwrap_or_else(|| "(unnamed)".to_owned());
        by_model.entry(model).or_default().push(ms.lost_evidence);
    }
    by_model
        .into_iter()
        .map(|(model, values)| {
            let mut defined: Vec<T> = values.iter().filter_map(MetricValue::value).collect();
            defined.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let median = match defined.len() {
                0 => None,
                n if n % 2 == 1 => Some(defined[n / 2]),
                n => Some((defined[n / 2 - 1] + defined[n / 2]) / T::lit(2.0)),
            };
            LostEvidenceSummary {
                model,
                datasets: values.len(),
                min: defined.first().copied().into(),
                median: median.into(),
                max: defined.last().copied().into(),
                undefined_excluded: values.len() - defined.len(),
            }
        })
        .collect()
}

pub fn render_lost_evidence_summary<T: Real + Serialize>(
    rows: &[LostEvidenceSummary<T>],
    format: OutputFormat,
    decimals: usize,
) -> Result<String, ReportError> {
    if format == OutputFormat::Json {
        return json_document(rows);
    }
    let header = [
        "model",
        "datasets",
        "min",
        "median",
        "max",
        "undefined_excluded",
    ]
    .map(str::to_owned);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.datasets.to_string(),
                fixed(r.min, decimals),
                fixed(r.median, decimals),
                fixed(r.max, decimals),
                r.undefined_excluded.to_string(),
            ]
        })
        .collect();
    render_grid(&header, &body, format)
}

/// Subsample summaries. CSV and JSON emit one row per (size, statistic)
/// at full precision; text and markdown emit one row per size.
pub fn render_distributions<T: Real + Serialize>(
    metric: &str,
    distributions: &[SubsampleDistribution<T>],
    format: OutputFormat,
    decimals: usize,
) -> Result<String, ReportError> {
    match format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Entry<'a, T: Real + Serialize> {
                metric: &'a str,
                size: usize,
                statistic: &'static str,
                value: MetricValue<T>,
            }
            let entries: Vec<Entry<T>> = distributions
                .iter()
                .flat_map(|d| {
                    d.statistics().map(|(statistic, value)| Entry {
                        metric,
                        size: d.size,
                        statistic,
                        value,
                    })
                })
                .collect();
            json_document(&entries)
        }
        OutputFormat::Csv => {
            let header = ["metric", "size", "statistic", "value"].map(str::to_owned);
            let body: Vec<Vec<String>> = distributions
                .iter()
                .flat_map(|d| {
                    d.statistics().map(|(statistic, value)| {
                        vec![
                            metric.to_owned(),
                            d.size.to_string(),
                            statistic.to_owned(),
                            value.to_string(),
                        ]
                    })
                })
                .collect();
            render_grid(&header, &body, format)
        }
        OutputFormat::Text | OutputFormat::Markdown => {
            let mut header = vec!["size".to_owned()];
            header.extend(SubsampleDistribution::<T>::STATISTICS.map(str::to_owned));
            let body: Vec<Vec<String>> = distributions
                .iter()
                .map(|d| {
                    let mut line = vec![d.size.to_string()];
                    line.extend(d.statistics().map(|(_, v)| fixed(v, decimals)));
                    line
                })
                .collect();
            let title = format!("metric: {metric}\n");
            Ok(title + &render_grid(&header, &body, format)?)
        }
    }
}

fn json_document<S: Serialize + ?Sized>(value: &S) -> Result<String, ReportError> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    Ok(out)
}

fn render_grid(
    header: &[String],
    body: &[Vec<String>],
    format: OutputFormat,
) -> Result<String, ReportError> {
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(Vec::new());
            writer.write_record(header)?;
            for line in body {
                writer.write_record(line)?;
            }
            let bytes = writer.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        OutputFormat::Markdown => {
            let escape = |s: &String| s.replace('|', "\\|");
            let mut out = String::new();
            out.push_str(&format!(
                "| {} |\n",
                header.iter().map(escape).collect::<Vec<_>>().join(" | ")
            ));
            let rule: Vec<&str> = (0..header.len())
                .map(|i| if i == 0 { "---" } else { "---:" })
                .collect();
            out.push_str(&format!("|{}|\n", rule.join("|")));
            for line in body {
                out.push_str(&format!(
                    "| {} |\n",
                    line.iter().map(escape).collect::<Vec<_>>().join(" | ")
                ));
            }
            Ok(out)
        }
        OutputFormat::Text => {
            let width = |i: usize| {
                std::iter::once(&header[i])
                    .chain(body.iter().map(|l| &l[i]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            };
            let widths: Vec<usize> = (0..header.len()).map(width).collect();
            let line = |cells: &[String]| {
                let parts: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, w))| {
                        if i == 0 {
                            format!("{c:<w$}")
                        } else {
                            format!("{c:>w$}")
                        }
                    })
                    .collect();
                parts.join("  ").trim_end().to_owned() + "\n"
            };
            let mut out = line(header);
            for l in body {
                out.push_str(&line(l));
            }
            Ok(out)
        }
        OutputFormat::Json => unreachable!("json is rendered from typed values"),
    }
}
