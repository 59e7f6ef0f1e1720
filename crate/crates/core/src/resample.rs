//! Subsampling without replacement, for judging how stable a metric is
//! on validation samples of a given size.
//!
//! Every (size, iteration) pair draws from its own ChaCha stream keyed by
//! the master seed and the size, so results do not depend on how the
//! iterations are scheduled across threads.

use std::cmp::Ordering;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Outcome;
use crate::metrics;
use crate::model::{ConfusionMatrix, CostModel, LabeledRecord, MetricValue};
use crate::scalar::Real;

pub const DEFAULT_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResampleError {
    #[error("subsample size {size} exceeds population size {population}")]
    SizeExceedsPopulation { size: usize, population: usize },
    #[error("invalid subsample plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleMetric {
    Mcc,
    Wmcc,
    Recall,
    LostEvidence,
    Accuracy,
    Cost,
}

impl SubsampleMetric {
    pub fn evaluate<T: Real>(self, cm: &ConfusionMatrix, cost: &CostModel<T>) -> MetricValue<T> {
        match self {
            Self::Mcc => metrics::mcc(cm),
            Self::Wmcc => metrics::wmcc(cm, cost),
            Self::Recall => metrics::basic_metrics(cm).recall,
            Self::LostEvidence => metrics::basic_metrics(cm).lost_evidence,
            Self::Accuracy => metrics::basic_metrics(cm).accuracy,
            Self::Cost => MetricValue::new(metrics::cost(cm, cost)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mcc => "mcc",
            Self::Wmcc => "wmcc",
            Self::Recall => "recall",
            Self::LostEvidence => "lost_evidence",
            Self::Accuracy => "accuracy",
            Self::Cost => "cost",
        }
    }
}

impl FromStr for SubsampleMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mcc" => Ok(Self::Mcc),
            "wmcc" => Ok(Self::Wmcc),
            "recall" => Ok(Self::Recall),
            "lost_evidence" | "lost-evidence" => Ok(Self::LostEvidence),
            "accuracy" => Ok(Self::Accuracy),
            "cost" => Ok(Self::Cost),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplePlan<T = f64> {
    pub sizes: Vec<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub metric: SubsampleMetric,
    pub cost_model: CostModel<T>,
}

impl<T: Real> SubsamplePlan<T> {
    pub fn new(sizes: Vec<usize>, metric: SubsampleMetric, cost_model: CostModel<T>) -> Self {
        Self {
            sizes,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            metric,
            cost_model,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, population: usize) -> Result<(), ResampleError> {
        if self.iterations == 0 {
            return Err(ResampleError::InvalidPlan(
                "iterations must be at least 1".into(),
            ));
        }
        if self.sizes.is_empty() {
            return Err(ResampleError::InvalidPlan(
                "no subsample sizes given".into(),
            ));
        }
        if self.sizes.contains(&0) {
            return Err(ResampleError::InvalidPlan(
                "subsample sizes must be positive".into(),
            ));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ResampleError::InvalidPlan(
                "sizes must be strictly ascending".into(),
            ));
        }
        if let Some(&size) = self.sizes.iter().find(|&&s| s > population) {
            return Err(ResampleError::SizeExceedsPopulation { size, population });
        }
        Ok(())
    }
}

/// Summary of one metric over all iterations at one subsample size.
/// Statistics cover defined values only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsampleDistribution<T = f64> {
    pub size: usize,
    pub mean: MetricValue<T>,
    pub sd: MetricValue<T>,
    pub min: MetricValue<T>,
    pub max: MetricValue<T>,
    pub q05: MetricValue<T>,
    pub q25: MetricValue<T>,
    pub median: MetricValue<T>,
    pub q75: MetricValue<T>,
    pub q95: MetricValue<T>,
    pub undefined_fraction: T,
}

impl<T: Real> SubsampleDistribution<T> {
    pub const STATISTICS: [&'static str; 10] = [
        "mean",
        "sd",
        "min",
        "q05",
        "q25",
        "median",
        "q75",
        "q95",
        "max",
        "undefined_fraction",
    ];

    /// `(statistic, value)` pairs in [`Self::STATISTICS`] order.
    pub fn statistics(&self) -> [(&'static str, MetricValue<T>); 10] {
        let values = [
            self.mean,
            self.sd,
            self.min,
            self.q05,
            self.q25,
            self.median,
            self.q75,
            self.q95,
            self.max,
            MetricValue::Defined(self.undefined_fraction),
        ];
        let mut out = [("", MetricValue::Undefined); 10];
        for (slot, (name, value)) in out.iter_mut().zip(Self::STATISTICS.iter().zip(values)) {
            *slot = (*name, value);
        }
        out
    }

    pub fn summarize(size: usize, samples: &[MetricValue<T>]) -> Self {
        let mut defined: Vec<T> = samples.iter().filter_map(MetricValue::value).collect();
        let undefined = samples.len() - defined.len();
        let undefined_fraction = if samples.is_empty() {
            T::zero()
        } else {
            T::from_count(undefined as u64) / T::from_count(samples.len() as u64)
        };
        if defined.is_empty() {
            let u = MetricValue::Undefined;
            return Self {
                size,
                mean: u,
                sd: u,
                min: u,
                max: u,
                q05: u,
                q25: u,
                median: u,
                q75: u,
                q95: u,
                undefined_fraction,
            };
        }
        let n = T::from_count(defined.len() as u64);
        // shifted by the first value so identical samples give their value exactly
        let origin = defined[0];
        let mean = origin + defined.iter().fold(T::zero(), |acc, x| acc + (*x - origin)) / n;
        let sd = if defined.len() < 2 {
            T::zero()
        } else {
            let ss = defined
                .iter()
                .fold(T::zero(), |acc, x| acc + (*x - mean) * (*x - mean));
            (ss / (n - T::one())).sqrt()
        };
        defined.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let q = |p: f64| MetricValue::Defined(quantile_sorted(&defined, p));
        Self {
            size,
            mean: MetricValue::Defined(mean),
            sd: MetricValue::Defined(sd),
            min: MetricValue::Defined(defined[0]),
            max: MetricValue::Defined(defined[defined.len() - 1]),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            undefined_fraction,
        }
    }
}

/// Linear interpolation between order statistics (Hyndman–Fan type 7).
fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    let value = sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
    // interpolation can drift past a neighbour by an ulp
    value.max(sorted[lo]).min(sorted[hi])
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for one `(size, iteration)` cell of the plan.
pub fn iteration_rng(seed: u64, size: usize, iteration: usize) -> ChaCha8Rng {
    let mut state = seed ^ (size as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(iteration as u64);
    rng
}

/// Indices of the records drawn for one `(size, iteration)` cell.
pub fn subsample_indices(
    population: usize,
    size: usize,
    seed: u64,
    iteration: usize,
) -> Vec<usize> {
    let mut rng = iteration_rng(seed, size, iteration);
    rand::seq::index::sample(&mut rng, population, size).into_vec()
}

/// Population in canonical order: sorted by id, so input order never
/// changes the draws.
fn normalized_outcomes(records: &[LabeledRecord]) -> Vec<Outcome> {
    let mut sorted: Vec<&LabeledRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.dataset.cmp(&b.dataset))
    });
    sorted
        .into_iter()
        .map(|r| Outcome::of(r.gold, r.prediction))
        .collect()
}

/// Raw metric values for every iteration at one size, in iteration order.
pub fn subsample_values<T: Real>(
    records: &[LabeledRecord],
    plan: &SubsamplePlan<T>,
    size: usize,
) -> Result<Vec<MetricValue<T>>, ResampleError> {
    let population = normalized_outcomes(records);
    if size > population.len() {
        return Err(ResampleError::SizeExceedsPopulation {
            size,
            population: population.len(),
        });
    }
    Ok(draw_values(&population, plan, size))
}

fn draw_values<T: Real>(
    population: &[Outcome],
    plan: &SubsamplePlan<T>,
    size: usize,
) -> Vec<MetricValue<T>> {
    (0..plan.iterations)
        .into_par_iter()
        .map(|iteration| {
            let picks = subsample_indices(population.len(), size, plan.seed, iteration);
            let cm = Outcome::tally(picks.into_iter().map(|i| population[i]));
            plan.metric.evaluate(&cm, &plan.cost_model)
        })
        .collect()
}

pub fn subsample_distribution<T: Real>(
    records: &[LabeledRecord],
    plan: &SubsamplePlan<T>,
) -> Result<Vec<SubsampleDistribution<T>>, ResampleError> {
    plan.validate(records.len())?;
    let population = normalized_outcomes(records);
    Ok(plan
        .sizes
        .iter()
        .map(|&size| SubsampleDistribution::summarize(size, &draw_values(&population, plan, size)))
        .collect())
}
