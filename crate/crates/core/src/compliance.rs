//! Report linting against the screening-evaluation recommendations, and
//! the lost-evidence guardrail.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MetricSet, MetricValue};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ComplianceError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("lost-evidence threshold must lie in [0, 1], got {0}")]
    ThresholdOutOfRange(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    Recall,
    LostEvidence,
    Precision,
    Specificity,
    F1,
    Pabak,
    Mcc,
    Wmcc,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMethod {
    SubsampleWithoutReplacement,
    Other,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyDesign {
    Prospective,
    Retrospective,
    Benchmark,
}

/// What an evaluation report declares about itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationManifest {
    pub metrics_reported: BTreeSet<MetricName>,
    pub primary_metric: MetricName,
    pub confusion_matrices_included: bool,
    #[serde(default)]
    pub cost_ratio_declared: Option<f64>,
    #[serde(default)]
    pub uncertainty_method: Option<UncertaintyMethod>,
    pub null_handling_declared: bool,
    pub leakage_statement_present: bool,
    pub non_llm_baseline_present: bool,
    #[serde(default)]
    pub lost_evidence_threshold: Option<f64>,
    pub study_design: StudyDesign,
}

impl EvaluationManifest {
    pub fn from_reader<R: Read>(source: R) -> Result<Self, ComplianceError> {
        let manifest: Self = serde_json::from_reader(source)
            .map_err(|e| ComplianceError::InvalidManifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), ComplianceError> {
        if !self.metrics_reported.contains(&self.primary_metric) {
            return Err(ComplianceError::InvalidManifest(format!(
                "primary_metric {:?} is not among metrics_reported",
                self.primary_metric
            )));
        }
        if let Some(ratio) = self.cost_ratio_declared {
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(ComplianceError::InvalidManifest(format!(
                    "cost_ratio_declared must be positive, got {ratio}"
                )));
            }
        }
        if let Some(t) = self.lost_evidence_threshold {
            LostEvidenceThreshold::new(t)?;
        }
        Ok(())
    }

    fn reports(&self, metric: MetricName) -> bool {
        self.metrics_reported.contains(&metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Error => "error",
            Self::Warning => "warning",
        })
    }
}

/// One entry of the rule registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub id: &'static str,
    pub summary: &'static str,
    /// Policymaker recommendations enforced through this rule.
    pub policymaker: &'static [&'static str],
    /// `false` for recommendations that no manifest field can check.
    pub linted: bool,
}

/// All recommendations, in the order findings are reported.
///
/// The researcher list numbers two different recommendations R9; they
/// are keyed `R9-baseline` and `R9-escalate` here. The policymaker list
/// likewise reuses R4_PM for null-output disclosure and for leakage
/// statements.
pub const RULES: &[Rule] = &[
    Rule {
        id: "R1",
        summary: "report lost evidence (recall), MCC and WMCC with a declared FN:FP cost ratio; accuracy and PABAK must not be the primary metric",
        policymaker: &["R1_PM"],
        linted: true,
    },
    Rule {
        id: "R2",
        summary: "draw comparative conclusions from cost-sensitive analysis",
        policymaker: &["R2_PM"],
        linted: false,
    },
    Rule {
        id: "R3",
        summary: "predefine an acceptable lost-evidence threshold",
        policymaker: &["R7_PM"],
        linted: true,
    },
    Rule {
        id: "R4",
        summary: "publish complete confusion matrices for every model, dataset and prompt",
        policymaker: &["R3_PM"],
        linted: true,
    },
    Rule {
        id: "R5",
        summary: "report uncertainty for validation samples, estimated by resampling without replacement",
        policymaker: &[],
        linted: true,
    },
    Rule {
        id: "R6",
        summary: "report null or invalid outputs and state how referred-back items are counted",
        policymaker: &["R4_PM"],
        linted: true,
    },
    Rule {
        id: "R7",
        summary: "release prompts, seeds, code and data",
        policymaker: &["R5_PM"],
        linted: false,
    },
    Rule {
        id: "R8",
        summary: "use prospective or temporally safeguarded designs and state leakage risks",
        policymaker: &["R4_PM"],
        linted: true,
    },
    Rule {
        id: "R9-baseline",
        summary: "include non-LLM baselines",
        policymaker: &["R5_PM", "R6_PM"],
        linted: true,
    },
    Rule {
        id: "R9-escalate",
        summary: "escalate to human review when lost evidence exceeds the threshold (see guardrail_check)",
        policymaker: &["R7_PM"],
        linted: false,
    },
];

pub fn rule(id: &str) -> Option<&'static Rule> {
    RULES.iter().find(|r| r.id == id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintFinding {
    pub rule_id: &'static str,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.rule_id, self.severity, self.message)
    }
}

pub fn lint_manifest(m: &EvaluationManifest) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    let mut push = |rule_id: &'static str, severity, message: String| {
        debug_assert!(rule(rule_id).is_some());
        findings.push(LintFinding {
            rule_id,
            severity,
            message,
        });
    };
    use MetricName::*;
    use Severity::*;

    if matches!(m.primary_metric, Accuracy | Pabak) {
        push(
            "R1",
            Error,
            format!(
                "primary metric is {:?}; accuracy and PABAK reward rejecting everything on imbalanced data and must not be primary",
                m.primary_metric
            ),
        );
    }
    let missing: Vec<&str> = [
        (
            m.reports(Recall) || m.reports(LostEvidence),
            "recall/lost_evidence",
        ),
        (m.reports(Mcc), "mcc"),
        (m.reports(Wmcc), "wmcc"),
    ]
    .into_iter()
    .filter_map(|(present, name)| (!present).then_some(name))
    .collect();
    if !missing.is_empty() {
        push(
            "R1",
            Error,
            format!("required metrics not reported: {}", missing.join(", ")),
        );
    }
    if m.reports(Wmcc) && m.cost_ratio_declared.is_none() {
        push(
            "R1",
            Error,
            "WMCC is reported without a declared FN:FP cost ratio".into(),
        );
    }
    if m.lost_evidence_threshold.is_none() {
        push(
            "R3",
            Warning,
            "no acceptable lost-evidence threshold is declared".into(),
        );
    }
    if !m.confusion_matrices_included {
        push(
            "R4",
            Error,
            "complete confusion matrices are not published".into(),
        );
    }
    if matches!(m.uncertainty_method, None | Some(UncertaintyMethod::None)) {
        push("R5", Warning, "no uncertainty estimate is reported".into());
    }
    if !m.null_handling_declared {
        push(
            "R6",
            Error,
            "handling of null, invalid or referred-back outputs is not declared".into(),
        );
    }
    if m.study_design != StudyDesign::Prospective && !m.leakage_statement_present {
        push(
            "R8",
            Error,
            format!(
                "{} design without a data leakage/contamination statement",
                match m.study_design {
                    StudyDesign::Retrospective => "retrospective",
                    _ => "benchmark",
                }
            ),
        );
    }
    if !m.non_llm_baseline_present {
        push(
            "R9-baseline",
            Warning,
            "no non-LLM baseline is included".into(),
        );
    }
    findings
}

pub fn has_errors(findings: &[LintFinding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

/// Maximum acceptable lost evidence, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LostEvidenceThreshold<T = f64>(T);

impl<T: Real> LostEvidenceThreshold<T> {
    pub fn new(value: T) -> Result<Self, ComplianceError> {
        if value >= T::zero() && value <= T::one() {
            Ok(Self(value))
        } else {
            Err(ComplianceError::ThresholdOutOfRange(value.to_string()))
        }
    }

    pub fn value(&self) -> T {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuardrailOutcome<T = f64> {
    Pass,
    Fail {
        actual: MetricValue<T>,
        threshold: T,
    },
}

impl<T: Real> GuardrailOutcome<T> {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass)
    }
}

/// Passes iff lost evidence is defined and at most the threshold.
pub fn guardrail_check<T: Real>(
    ms: &MetricSet<T>,
    threshold: LostEvidenceThreshold<T>,
) -> GuardrailOutcome<T> {
    match ms.lost_evidence {
        MetricValue::Defined(le) if le <= threshold.value() => GuardrailOutcome::Pass,
        actual => GuardrailOutcome::Fail {
            actual,
            threshold: threshold.value(),
        },
    }
}
