#![allow(dead_code)]

use screenlit::ConfusionMatrix;

/// The four SR-I matrices: (model, TP, FN, FP, TN).
pub const TABLE1: [(&str, ConfusionMatrix); 4] = [
    ("gemma:7b", ConfusionMatrix::new(0, 172, 0, 4324)),
    ("llama3-Athene:70b", ConfusionMatrix::new(47, 125, 82, 4242)),
    ("llama3.1:8b", ConfusionMatrix::new(82, 90, 281, 4048)),
    ("mistral-nemo:12b", ConfusionMatrix::new(0, 172, 3, 4326)),
];

pub fn matrix(model: &str) -> ConfusionMatrix {
    TABLE1
        .iter()
        .find(|(m, _)| *m == model)
        .expect("known model")
        .1
}

/// Record-level CSV reproducing every Table 1 matrix on dataset SR-I.
pub fn table1_csv() -> String {
    let mut out = String::from("id,gold,prediction,model,dataset\n");
    for (model, cm) in TABLE1 {
        let cells = [
            ("include", "include", cm.tp),
            ("include", "exclude", cm.fn_),
            ("exclude", "include", cm.fp),
            ("exclude", "exclude", cm.tn),
        ];
        let mut i = 0;
        for (gold, pred, count) in cells {
            for _ in 0..count {
                out.push_str(&format!("p{i:05},{gold},{pred},{model},SR-I\n"));
                i += 1;
            }
        }
    }
    out
}

pub fn matrix_json(model: Option<&str>, cm: &ConfusionMatrix) -> String {
    let name = model
        .map(|m| format!("\"model\":\"{m}\","))
        .unwrap_or_default();
    format!(
        "{{{name}\"tp\":{},\"fn\":{},\"fp\":{},\"tn\":{}}}",
        cm.tp, cm.fn_, cm.fp, cm.tn
    )
}

pub fn table1_matrices_json() -> String {
    let items: Vec<String> = TABLE1
        .iter()
        .map(|(m, cm)| matrix_json(Some(m), cm))
        .collect();
    format!("[{}]", items.join(","))
}

pub const COMPLIANT_MANIFEST: &str = r#"{
  "metrics_reported": ["recall", "lost_evidence", "mcc", "wmcc", "cost"],
  "primary_metric": "wmcc",
  "confusion_matrices_included": true,
  "cost_ratio_declared": 10,
  "uncertainty_method": "subsample_without_replacement",
  "null_handling_declared": true,
  "leakage_statement_present": true,
  "non_llm_baseline_present": true,
  "lost_evidence_threshold": 0.2,
  "study_design": "retrospective"
}"#;

pub const ACCURACY_MANIFEST: &str = r#"{
  "metrics_reported": ["accuracy", "recall", "mcc", "wmcc"],
  "primary_metric": "accuracy",
  "confusion_matrices_included": false,
  "cost_ratio_declared": 10,
  "uncertainty_method": "subsample_without_replacement",
  "null_handling_declared": true,
  "leakage_statement_present": true,
  "non_llm_baseline_present": true,
  "lost_evidence_threshold": 0.2,
  "study_design": "prospective"
}"#;
