//! Confusion-matrix metrics, the cost-weighted transformation, and the
//! misclassification cost.
//!
//! Nothing is rounded here. Any ratio with a zero denominator is
//! [`MetricValue::Undefined`].

use serde::Serialize;

use crate::model::{ConfusionMatrix, CostModel, MetricSet, MetricValue};
use crate::scalar::Real;

/// The ratio metrics that need no cost model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicMetrics<T = f64> {
    pub accuracy: MetricValue<T>,
    pub recall: MetricValue<T>,
    pub lost_evidence: MetricValue<T>,
    pub precision: MetricValue<T>,
    pub specificity: MetricValue<T>,
    pub f1: MetricValue<T>,
    pub pabak: MetricValue<T>,
}

pub fn basic_metrics<T: Real>(cm: &ConfusionMatrix) -> BasicMetrics<T> {
    let accuracy = MetricValue::ratio(cm.tp + cm.tn, cm.total());
    let recall = MetricValue::ratio(cm.tp, cm.tp + cm.fn_);
    let precision = MetricValue::ratio(cm.tp, cm.tp + cm.fp);
    let specificity = MetricValue::ratio(cm.tn, cm.tn + cm.fp);
    BasicMetrics {
        accuracy,
        recall,
        lost_evidence: recall.map(|r| T::one() - r),
        precision,
        specificity,
        f1: harmonic_f1(precision, recall),
        pabak: accuracy.map(|a| T::lit(2.0) * a - T::one()),
    }
}

/// Harmonic mean of precision and recall. Undefined when either input is
/// undefined or both are zero, which is how an all-negative classifier
/// ends up with F1 = NaN rather than 0.
fn harmonic_f1<T: Real>(precision: MetricValue<T>, recall: MetricValue<T>) -> MetricValue<T> {
    match (precision.value(), recall.value()) {
        (Some(p), Some(r)) if p + r > T::zero() => MetricValue::new(T::lit(2.0) * p * r / (p + r)),
        _ => MetricValue::Undefined,
    }
}

/// Matthews correlation on real-valued cells.
pub fn mcc_of_cells<T: Real>(tp: T, fn_: T, fp: T, tn: T) -> MetricValue<T> {
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.iter().any(|f| *f == T::zero()) {
        return MetricValue::Undefined;
    }
    let denominator = factors.iter().fold(T::one(), |acc, f| acc * *f).sqrt();
    MetricValue::new(clamp_unit((tp * tn - fp * fn_) / denominator))
}

pub fn mcc<T: Real>(cm: &ConfusionMatrix) -> MetricValue<T> {
    mcc_of_cells(
        T::from_count(cm.tp),
        T::from_count(cm.fn_),
        T::from_count(cm.fp),
        T::from_count(cm.tn),
    )
}

fn clamp_unit<T: Real>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

/// Confusion matrix with every positive example carrying weight `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedMatrix<T = f64> {
    pub tp: T,
    #[serde(rename = "fn")]
    pub fn_: T,
    pub fp: T,
    pub tn: T,
}

impl<T: Real> WeightedMatrix<T> {
    pub fn mcc(&self) -> MetricValue<T> {
        mcc_of_cells(self.tp, self.fn_, self.fp, self.tn)
    }
}

pub fn weighted_counts<T: Real>(cm: &ConfusionMatrix, cost: &CostModel<T>) -> WeightedMatrix<T> {
    let w = cost.weight();
    WeightedMatrix {
        tp: w * T::from_count(cm.tp),
        fn_: w * T::from_count(cm.fn_),
        fp: T::from_count(cm.fp),
        tn: T::from_count(cm.tn),
    }
}

/// Numerator and radicand of the factored WMCC expression
/// `(w·TP·TN − FP·w·FN) / √((w·TP+FP)(w·TP+w·FN)(TN+FP)(TN+w·FN))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmccTerms<T = f64> {
    pub numerator: T,
    pub factors: [T; 4],
}

impl<T: Real> WmccTerms<T> {
    pub fn radicand(&self) -> T {
        self.factors.iter().fold(T::one(), |acc, f| acc * *f)
    }

    pub fn denominator(&self) -> T {
        self.radicand().sqrt()
    }

    pub fn value(&self) -> MetricValue<T> {
        if self.factors.iter().any(|f| *f == T::zero()) {
            MetricValue::Undefined
        } else {
            MetricValue::new(clamp_unit(self.numerator / self.denominator()))
        }
    }
}

pub fn wmcc_terms<T: Real>(cm: &ConfusionMatrix, cost: &CostModel<T>) -> WmccTerms<T> {
    let w = cost.weight();
    let (tp, fn_, fp, tn) = (
        T::from_count(cm.tp),
        T::from_count(cm.fn_),
        T::from_count(cm.fp),
        T::from_count(cm.tn),
    );
    WmccTerms {
        numerator: w * tp * tn - fp * w * fn_,
        factors: [w * tp + fp, w * tp + w * fn_, tn + fp, tn + w * fn_],
    }
}

pub fn wmcc<T: Real>(cm: &ConfusionMatrix, cost: &CostModel<T>) -> MetricValue<T> {
    wmcc_terms(cm, cost).value()
}

/// `w·FN + FP`.
pub fn cost<T: Real>(cm: &ConfusionMatrix, cost_model: &CostModel<T>) -> T {
    cost_model.weight() * T::from_count(cm.fn_) + T::from_count(cm.fp)
}

pub fn referral_rate<T: Real>(cm: &ConfusionMatrix) -> T {
    MetricValue::ratio(cm.referred_back(), cm.total())
        .value()
        .unwrap_or_else(T::zero)
}

pub fn metric_set<T: Real>(cm: &ConfusionMatrix, cost_model: &CostModel<T>) -> MetricSet<T> {
    let basic = basic_metrics(cm);
    MetricSet {
        matrix: *cm,
        accuracy: basic.accuracy,
        recall: basic.recall,
        lost_evidence: basic.lost_evidence,
        precision: basic.precision,
        specificity: basic.specificity,
        f1: basic.f1,
        pabak: basic.pabak,
        mcc: mcc(cm),
        wmcc: wmcc(cm, cost_model),
        cost: cost(cm, cost_model),
        referral_rate: referral_rate(cm),
        total_n: cm.total(),
        cost_model: *cost_model,
    }
}
