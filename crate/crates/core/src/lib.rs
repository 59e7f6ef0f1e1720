//! Evaluation toolkit for literature-screening classifiers.
//!
//! Metrics are generic over the [`Real`] scalar (`f64` or `f32`); the
//! aliases below fix the common choices. Counts are always `u64`.
//!
//! ```
//! use screenlit::{metrics, ConfusionMatrix, CostModel};
//!
//! let cm = ConfusionMatrix::new(82, 90, 281, 4048);
//! let w = CostModel::new(10.0).unwrap();
//! let ms = metrics::metric_set(&cm, &w);
//! assert_eq!(ms.cost, 1181.0);
//! assert!((ms.wmcc.value().unwrap() - 0.481).abs() < 5e-4);
//! ```

pub mod cli;
pub mod compliance;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod report;
pub mod resample;
pub mod scalar;

pub use model::{
    validate_matrix, ConfusionMatrix, GoldLabel, GroupKey, LabeledRecord, PartialCounts,
    RawPrediction,
};
pub use scalar::Real;

pub type CostModel = model::CostModel<f64>;
pub type MetricValue = model::MetricValue<f64>;
pub type MetricSet = model::MetricSet<f64>;
pub type WeightedMatrix = metrics::WeightedMatrix<f64>;
pub type SubsamplePlan = resample::SubsamplePlan<f64>;
pub type SubsampleDistribution = resample::SubsampleDistribution<f64>;

pub type CostModelF32 = model::CostModel<f32>;
pub type MetricValueF32 = model::MetricValue<f32>;
pub type MetricSetF32 = model::MetricSet<f32>;
pub type WeightedMatrixF32 = metrics::WeightedMatrix<f32>;
pub type SubsamplePlanF32 = resample::SubsamplePlan<f32>;
pub type SubsampleDistributionF32 = resample::SubsampleDistribution<f32>;
