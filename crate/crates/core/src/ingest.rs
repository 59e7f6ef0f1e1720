//! Reading labeled records and confusion matrices, and turning records
//! into matrices.
//!
//! CSV layout: header row `id,gold,prediction[,model[,dataset]]`, tokens
//! `include`/`exclude`/`null` in any case, and an empty prediction cell
//! meaning `null`. JSON records use the same field names. No record is
//! ever dropped: a null prediction is a referral and counts as a
//! positive prediction.

use std::collections::HashSet;
use std::io::Read;

use indexmap::IndexMap;
use serde::Deserialize;
use thiserror::Error;

use crate::model::{
    validate_matrix, ConfusionMatrix, GoldLabel, GroupKey, LabeledRecord, ModelError,
    PartialCounts, RawPrediction,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("unknown label token {token:?} at line {line}")]
    UnknownLabelToken { token: String, line: u64 },
    #[error("missing gold label at line {line}; gold standards must be complete")]
    NullGoldLabel { line: u64 },
    #[error("duplicate id {id:?} in group {group}")]
    DuplicateId { id: String, group: GroupKey },
    #[error("records span more than one (model, dataset) group: {first} and {second}")]
    MixedGroups { first: GroupKey, second: GroupKey },
    #[error("inconsistent partial counts: {0}")]
    InconsistentCounts(String),
    #[error("invalid confusion matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

impl RecordFormat {
    /// Guess from a file extension; anything but `.json` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

/// Records grouped by `(model, dataset)` in first-appearance order.
pub type RecordGroups = IndexMap<GroupKey, Vec<LabeledRecord>>;

const COLUMNS: [&str; 5] = ["id", "gold", "prediction", "model", "dataset"];

pub fn parse_records<R: Read>(
    source: R,
    format: RecordFormat,
) -> Result<RecordGroups, IngestError> {
    let records = match format {
        RecordFormat::Csv => parse_csv(source)?,
        RecordFormat::Json => parse_json(source)?,
    };
    group_records(records)
}

fn parse_csv<R: Read>(source: R) -> Result<Vec<(u64, LabeledRecord)>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let width = header.len();
    let header_ok = (3..=COLUMNS.len()).contains(&width)
        && header
            .iter()
            .zip(COLUMNS)
            .all(|(got, want)| got.eq_ignore_ascii_case(want));
    if !header_ok {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: format!(
                "expected header `id,gold,prediction[,model[,dataset]]`, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut out = Vec::new();
    for (index, row) in reader.records().enumerate() {
        // header is line 1
        let fallback_line = index as u64 + 2;
        let row = row.map_err(|e| csv_error(e, fallback_line))?;
        let line = row.position().map_or(fallback_line, |p| p.line());
        if row.len() < 3 || row.len() > width {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 3 to {width} fields, got {}", row.len()),
            });
        }
        let cell = |i: usize| row.get(i).filter(|s| !s.is_empty()).map(str::to_owned);
        let record = make_record(
            line,
            row.get(0).unwrap_or_default(),
            row.get(1),
            row.get(2),
            cell(3),
            cell(4),
        )?;
        out.push((line, record));
    }
    Ok(out)
}

fn csv_error(err: csv::Error, line: u64) -> IngestError {
    let line = err.position().map_or(line, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        kind => IngestError::MalformedRow {
            line,
            reason: format!("{kind:?}"),
        },
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: String,
    gold: Option<String>,
    #[serde(default)]
    prediction: Option<String>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    dataset: Option<String>,
}

fn parse_json<R: Read>(source: R) -> Result<Vec<(u64, LabeledRecord)>, IngestError> {
    let rows: Vec<serde_json::Value> =
        serde_json::from_reader(source).map_err(|e| IngestError::MalformedRow {
            line: e.line() as u64,
            reason: e.to_string(),
        })?;
    rows.into_iter()
        .enumerate()
        .map(|(index, value)| {
            let row = index as u64 + 1;
            let raw: JsonRecord =
                serde_json::from_value(value).map_err(|e| IngestError::MalformedRow {
                    line: row,
                    reason: e.to_string(),
                })?;
            let nonempty = |s: Option<String>| s.filter(|s| !s.trim().is_empty());
            make_record(
                row,
                &raw.id,
                raw.gold.as_deref(),
                raw.prediction.as_deref(),
                nonempty(raw.model),
                nonempty(raw.dataset),
            )
            .map(|r| (row, r))
        })
        .collect()
}

fn make_record(
    line: u64,
    id: &str,
    gold: Option<&str>,
    prediction: Option<&str>,
    model: Option<String>,
    dataset: Option<String>,
) -> Result<LabeledRecord, IngestError> {
    let id = id.trim();
    if id.is_empty() {
        return Err(IngestError::MalformedRow {
            line,
            reason: "empty id".into(),
        });
    }
    let gold = parse_gold(gold.unwrap_or_default(), line)?;
    let prediction = parse_prediction(prediction.unwrap_or_default(), line)?;
    Ok(LabeledRecord::new(id, gold, prediction).with_group(model, dataset))
}

fn parse_gold(token: &str, line: u64) -> Result<GoldLabel, IngestError> {
    let token = token.trim();
    match token.to_ascii_lowercase().as_str() {
        "include" => Ok(GoldLabel::Positive),
        "exclude" => Ok(GoldLabel::Negative),
        "" | "null" => Err(IngestError::NullGoldLabel { line }),
        _ => Err(IngestError::UnknownLabelToken {
            token: token.to_owned(),
            line,
        }),
    }
}

fn parse_prediction(token: &str, line: u64) -> Result<RawPrediction, IngestError> {
    let token = token.trim();
    match token.to_ascii_lowercase().as_str() {
        "include" => Ok(RawPrediction::Include),
        "exclude" => Ok(RawPrediction::Exclude),
        "" | "null" => Ok(RawPrediction::Null),
        _ => Err(IngestError::UnknownLabelToken {
            token: token.to_owned(),
            line,
        }),
    }
}

fn group_records(records: Vec<(u64, LabeledRecord)>) -> Result<RecordGroups, IngestError> {
    let mut groups = RecordGroups::new();
    let mut seen: HashSet<(GroupKey, String)> = HashSet::new();
    for (_, record) in records {
        let key = record.group();
        if !seen.insert((key.clone(), record.id.clone())) {
            return Err(IngestError::DuplicateId {
                id: record.id,
                group: key,
            });
        }
        groups.entry(key).or_default().push(record);
    }
    Ok(groups)
}

/// Cell a single record lands in under the referral rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TruePositive,
    FalseNegative,
    FalsePositive,
    TrueNegative,
    ReferredPositive,
    ReferredNegative,
}

impl Outcome {
    pub fn of(gold: GoldLabel, prediction: RawPrediction) -> Self {
        use GoldLabel::*;
        use RawPrediction::*;
        match (gold, prediction) {
            (Positive, Include) => Self::TruePositive,
            (Positive, Exclude) => Self::FalseNegative,
            (Positive, Null) => Self::ReferredPositive,
            (Negative, Include) => Self::FalsePositive,
            (Negative, Exclude) => Self::TrueNegative,
            (Negative, Null) => Self::ReferredNegative,
        }
    }

    pub fn tally(outcomes: impl IntoIterator<Item = Outcome>) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for outcome in outcomes {
            match outcome {
                Self::TruePositive => cm.tp += 1,
                Self::FalseNegative => cm.fn_ += 1,
                Self::FalsePositive => cm.fp += 1,
                Self::TrueNegative => cm.tn += 1,
                Self::ReferredPositive => {
                    cm.tp += 1;
                    cm.referred_back_gold_positive += 1;
                }
                Self::ReferredNegative => {
                    cm.fp += 1;
                    cm.referred_back_gold_negative += 1;
                }
            }
        }
        cm
    }
}

/// Builds the matrix for one group. A null prediction is a referral to
/// human review and counts as a positive prediction.
pub fn build_matrix(records: &[LabeledRecord]) -> Result<ConfusionMatrix, IngestError> {
    if let Some(first) = records.first() {
        if let Some(other) = records
            .iter()
            .find(|r| r.model != first.model || r.dataset != first.dataset)
        {
            return Err(IngestError::MixedGroups {
                first: first.group(),
                second: other.group(),
            });
        }
    }
    Ok(Outcome::tally(
        records.iter().map(|r| Outcome::of(r.gold, r.prediction)),
    ))
}

/// Rebuilds a full matrix from gold negatives N, gold positives P,
/// predicted negatives n and true negatives TN:
/// `FP = N − TN`, `FN = n − TN`, `TP = P − FN`.
pub fn reconstruct_matrix(p: &PartialCounts) -> Result<ConfusionMatrix, IngestError> {
    let PartialCounts {
        gold_negatives: n_neg,
        gold_positives: n_pos,
        predicted_negatives: n_pred_neg,
        true_negatives: tn,
    } = *p;
    let fail = |what: String| Err(IngestError::InconsistentCounts(what));
    if tn > n_neg {
        return fail(format!("TN ({tn}) exceeds gold negatives N ({n_neg})"));
    }
    if tn > n_pred_neg {
        return fail(format!(
            "TN ({tn}) exceeds predicted negatives n ({n_pred_neg})"
        ));
    }
    if n_pred_neg > n_neg + n_pos {
        return fail(format!(
            "predicted negatives n ({n_pred_neg}) exceed N + P ({})",
            n_neg + n_pos
        ));
    }
    let fp = n_neg - tn;
    let fn_ = n_pred_neg - tn;
    let Some(tp) = n_pos.checked_sub(fn_) else {
        return fail(format!("FN ({fn_}) exceeds gold positives P ({n_pos})"));
    };
    let cm = ConfusionMatrix::new(tp, fn_, fp, tn);
    validate_matrix(&cm)?;
    Ok(cm)
}

#[derive(Deserialize)]
struct LabeledMatrix {
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    dataset: Option<String>,
    #[serde(flatten)]
    matrix: ConfusionMatrix,
}

/// Reads confusion-matrix JSON: one object with keys `tp`, `fn`, `fp`,
/// `tn` (plus optional referral counts, `model` and `dataset`), or an
/// array of such objects.
pub fn parse_matrices<R: Read>(
    source: R,
) -> Result<IndexMap<GroupKey, ConfusionMatrix>, IngestError> {
    let doc: serde_json::Value =
        serde_json::from_reader(source).map_err(|e| IngestError::InvalidMatrix(e.to_string()))?;
    let invalid = |e: serde_json::Error| IngestError::InvalidMatrix(e.to_string());
    let items: Vec<LabeledMatrix> = if doc.is_array() {
        serde_json::from_value(doc).map_err(invalid)?
    } else {
        vec![serde_json::from_value(doc).map_err(invalid)?]
    };
    let mut out = IndexMap::new();
    for item in items {
        let key = GroupKey {
            model: item.model,
            dataset: item.dataset,
        };
        if out.insert(key.clone(), item.matrix).is_some() {
            return Err(IngestError::InvalidMatrix(format!(
                "duplicate matrix for {key}"
            )));
        }
    }
    Ok(out)
}

/// Expands a matrix back into one synthetic record per item, with ids
/// `{prefix}{index:06}`. Referred-back cells become null predictions.
pub fn expand_matrix(cm: &ConfusionMatrix, prefix: &str) -> Vec<LabeledRecord> {
    use GoldLabel::*;
    use RawPrediction::*;
    let cells = [
        (Positive, Include, cm.tp - cm.referred_back_gold_positive),
        (Positive, Null, cm.referred_back_gold_positive),
        (Positive, Exclude, cm.fn_),
        (Negative, Include, cm.fp - cm.referred_back_gold_negative),
        (Negative, Null, cm.referred_back_gold_negative),
        (Negative, Exclude, cm.tn),
    ];
    cells
        .iter()
        .flat_map(|&(gold, pred, count)| (0..count).map(move |_| (gold, pred)))
        .enumerate()
        .map(|(i, (gold, pred))| LabeledRecord::new(format!("{prefix}{i:06}"), gold, pred))
        .collect()
}
