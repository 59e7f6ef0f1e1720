//! Domain types shared by every other module.
//!
//! Everything here is immutable after construction. Counts are `u64`;
//! anything real-valued is generic over [`Real`].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("count `{field}` is negative ({value})")]
    NegativeCount { field: &'static str, value: i64 },
    #[error("referred-back count `{field}` ({referred}) exceeds its cell `{cell}` ({cell_count})")]
    ReferredBackExceedsCell {
        field: &'static str,
        referred: u64,
        cell: &'static str,
        cell_count: u64,
    },
    #[error("cost weight must be a finite positive number, got {0}")]
    InvalidWeight(String),
}

/// Gold-standard label. Never null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    /// include
    Positive,
    /// exclude
    Negative,
}

/// Classifier output for one item. `Null` covers empty, invalid and
/// unclassifiable outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawPrediction {
    Include,
    Exclude,
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledRecord {
    pub id: String,
    pub gold: GoldLabel,
    pub prediction: RawPrediction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

impl LabeledRecord {
    pub fn new(id: impl Into<String>, gold: GoldLabel, prediction: RawPrediction) -> Self {
        Self {
            id: id.into(),
            gold,
            prediction,
            model: None,
            dataset: None,
        }
    }

    pub fn with_group(mut self, model: Option<String>, dataset: Option<String>) -> Self {
        self.model = model;
        self.dataset = dataset;
        self
    }

    pub fn group(&self) -> GroupKey {
        GroupKey {
            model: self.model.clone(),
            dataset: self.dataset.clone(),
        }
    }
}

/// `(model, dataset)` pair identifying one evaluation group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub model: Option<String>,
    pub dataset: Option<String>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.model, &self.dataset) {
            (Some(m), Some(d)) => write!(f, "{m} [{d}]"),
            (Some(m), None) => write!(f, "{m}"),
            (None, Some(d)) => write!(f, "[{d}]"),
            (None, None) => write!(f, "(all)"),
        }
    }
}

/// Binary confusion matrix.
///
/// Referred-back (null) predictions are already counted inside `tp`/`fp`;
/// the two `referred_back_*` fields record how many of those came from a
/// referral rather than an explicit include.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub referred_back_gold_positive: u64,
    pub referred_back_gold_negative: u64,
}

impl ConfusionMatrix {
    /// Matrix without referred-back items. Always valid.
    pub const fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self {
            tp,
            fn_,
            fp,
            tn,
            referred_back_gold_positive: 0,
            referred_back_gold_negative: 0,
        }
    }

    pub fn with_referred_back(
        tp: u64,
        fn_: u64,
        fp: u64,
        tn: u64,
        referred_back_gold_positive: u64,
        referred_back_gold_negative: u64,
    ) -> Result<Self, ModelError> {
        let cm = Self {
            tp,
            fn_,
            fp,
            tn,
            referred_back_gold_positive,
            referred_back_gold_negative,
        };
        validate_matrix(&cm)?;
        Ok(cm)
    }

    /// Builds a matrix from signed counts, as read from untrusted input.
    pub fn from_signed(
        tp: i64,
        fn_: i64,
        fp: i64,
        tn: i64,
        referred_back_gold_positive: i64,
        referred_back_gold_negative: i64,
    ) -> Result<Self, ModelError> {
        let unsigned = |field: &'static str, value: i64| {
            u64::try_from(value).map_err(|_| ModelError::NegativeCount { field, value })
        };
        Self::with_referred_back(
            unsigned("tp", tp)?,
            unsigned("fn", fn_)?,
            unsigned("fp", fp)?,
            unsigned("tn", tn)?,
            unsigned("referred_back_gold_positive", referred_back_gold_positive)?,
            unsigned("referred_back_gold_negative", referred_back_gold_negative)?,
        )
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn gold_positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn gold_negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn predicted_negatives(&self) -> u64 {
        self.fn_ + self.tn
    }

    pub fn referred_back(&self) -> u64 {
        self.referred_back_gold_positive + self.referred_back_gold_negative
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// The four summary counts the matrix can be rebuilt from.
    pub fn partial_counts(&self) -> PartialCounts {
        PartialCounts {
            gold_negatives: self.gold_negatives(),
            gold_positives: self.gold_positives(),
            predicted_negatives: self.predicted_negatives(),
            true_negatives: self.tn,
        }
    }

    /// Class-swapped matrix (positive and negative roles exchanged).
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.fp, self.fn_, self.tp)
    }
}

#[derive(Deserialize)]
struct RawMatrix {
    tp: i64,
    #[serde(rename = "fn")]
    fn_: i64,
    fp: i64,
    tn: i64,
    #[serde(default)]
    referred_back_gold_positive: i64,
    #[serde(default)]
    referred_back_gold_negative: i64,
}

impl TryFrom<RawMatrix> for ConfusionMatrix {
    type Error = ModelError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        ConfusionMatrix::from_signed(
            raw.tp,
            raw.fn_,
            raw.fp,
            raw.tn,
            raw.referred_back_gold_positive,
            raw.referred_back_gold_negative,
        )
    }
}

/// Checks the matrix invariants. Counts are unsigned so only the
/// referred-back containment can fail here; negative input is caught by
/// [`ConfusionMatrix::from_signed`].
pub fn validate_matrix(cm: &ConfusionMatrix) -> Result<(), ModelError> {
    if cm.referred_back_gold_positive > cm.tp {
        return Err(ModelError::ReferredBackExceedsCell {
            field: "referred_back_gold_positive",
            referred: cm.referred_back_gold_positive,
            cell: "tp",
            cell_count: cm.tp,
        });
    }
    if cm.referred_back_gold_negative > cm.fp {
        return Err(ModelError::ReferredBackExceedsCell {
            field: "referred_back_gold_negative",
            referred: cm.referred_back_gold_negative,
            cell: "fp",
            cell_count: cm.fp,
        });
    }
    Ok(())
}

/// Gold negatives (N), gold positives (P), predicted negatives (n) and
/// true negatives (TN).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialCounts {
    pub gold_negatives: u64,
    pub gold_positives: u64,
    pub predicted_negatives: u64,
    pub true_negatives: u64,
}

/// FN:FP cost ratio, applied as a weight on every positive example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostModel<T = f64> {
    weight: T,
}

impl<T: Real> CostModel<T> {
    pub fn new(weight: T) -> Result<Self, ModelError> {
        if weight.is_finite() && weight > T::zero() {
            Ok(Self { weight })
        } else {
            Err(ModelError::InvalidWeight(weight.to_string()))
        }
    }

    /// Unit weight; WMCC reduces to MCC.
    pub fn unweighted() -> Self {
        Self { weight: T::one() }
    }

    pub fn weight(&self) -> T {
        self.weight
    }
}

impl<T: Real> Default for CostModel<T> {
    /// The 10:1 FN:FP ratio used throughout the screening literature examples.
    fn default() -> Self {
        Self {
            weight: T::lit(10.0),
        }
    }
}

/// A metric that may be undefined (zero denominator).
///
/// `Undefined` never takes part in arithmetic or comparisons. It renders
/// as `NaN` and serializes as JSON `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue<T = f64> {
    Defined(T),
    Undefined,
}

impl<T: Real> MetricValue<T> {
    /// Wraps `value`, mapping non-finite input to `Undefined`.
    pub fn new(value: T) -> Self {
        if value.is_finite() {
            Self::Defined(value)
        } else {
            Self::Undefined
        }
    }

    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            Self::Undefined
        } else {
            Self::Defined(T::from_count(numerator) / T::from_count(denominator))
        }
    }

    pub fn value(&self) -> Option<T> {
        match *self {
            Self::Defined(v) => Some(v),
            Self::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, Self::Defined(_))
    }

    pub fn map(self, f: impl FnOnce(T) -> T) -> Self {
        match self {
            Self::Defined(v) => Self::new(f(v)),
            Self::Undefined => Self::Undefined,
        }
    }

    /// Ranking order: better values first, `Undefined` always last.
    pub fn rank_cmp(&self, other: &Self, higher_is_better: bool) -> Ordering {
        match (self, other) {
            (Self::Defined(a), Self::Defined(b)) => {
                let ord = a.partial_cmp(b).unwrap_or(Ordering::Equal);
                if higher_is_better {
                    ord.reverse()
                } else {
                    ord
                }
            }
            (Self::Defined(_), Self::Undefined) => Ordering::Less,
            (Self::Undefined, Self::Defined(_)) => Ordering::Greater,
            (Self::Undefined, Self::Undefined) => Ordering::Equal,
        }
    }
}

impl<T: Real> From<Option<T>> for MetricValue<T> {
    fn from(value: Option<T>) -> Self {
        value.map_or(Self::Undefined, Self::new)
    }
}

impl<T: Real> fmt::Display for MetricValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Defined(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Self::Undefined => f.write_str("NaN"),
        }
    }
}

impl<T: Serialize> Serialize for MetricValue<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Defined(v) => serializer.serialize_some(v),
            Self::Undefined => serializer.serialize_none(),
        }
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for MetricValue<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Option::<T>::deserialize(deserializer).map(Self::from)
    }
}

/// All metrics for one matrix under one cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSet<T = f64> {
    pub matrix: ConfusionMatrix,
    pub accuracy: MetricValue<T>,
    pub recall: MetricValue<T>,
    pub lost_evidence: MetricValue<T>,
    pub precision: MetricValue<T>,
    pub specificity: MetricValue<T>,
    pub f1: MetricValue<T>,
    pub pabak: MetricValue<T>,
    pub mcc: MetricValue<T>,
    pub wmcc: MetricValue<T>,
    pub cost: T,
    pub referral_rate: T,
    pub total_n: u64,
    pub cost_model: CostModel<T>,
}
