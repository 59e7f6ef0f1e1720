mod common;

use std::time::{Duration, Instant};

use common::{matrix, ACCURACY_MANIFEST, COMPLIANT_MANIFEST, TABLE1};
use indexmap::IndexMap;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use screenlit::cli::{self, EXIT_GUARDRAIL, EXIT_LINT, EXIT_OK};
use screenlit::compliance::{lint_manifest, EvaluationManifest, Severity};
use screenlit::ingest::{build_matrix, expand_matrix, reconstruct_matrix, Outcome};
use screenlit::metrics::{self, metric_set, wmcc_terms};
use screenlit::report::{rank_cmp, rank_models, RankKey};
use screenlit::resample::{subsample_distribution, subsample_values, SubsampleMetric};
use screenlit::{
    ConfusionMatrix, CostModel, GoldLabel, LabeledRecord, MetricSet, MetricValue, RawPrediction,
    SubsamplePlan,
};

struct Criterion {
    id: &'static str,
    failures: Vec<String>,
    checks: usize,
}

impl Criterion {
    fn new(id: &'static str) -> Self {
        Self {
            id,
            failures: Vec::new(),
            checks: 0,
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks += 1;
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn finish(self, elapsed: Duration, limit: Option<Duration>) {
        let mut failures = self.failures;
        if let Some(limit) = limit {
            if elapsed >= limit {
                failures.push(format!("runtime {elapsed:?} exceeds {limit:?}"));
            }
        }
        let status = if failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} ({} checks, {:.3}s)",
            self.id,
            self.checks,
            elapsed.as_secs_f64()
        );
        for f in &failures {
            println!("    {f}");
        }
        assert!(failures.is_empty(), "{} failed: {failures:?}", self.id);
    }
}

fn w10() -> CostModel {
    CostModel::new(10.0).unwrap()
}

/// Printed Table 1 value: `Some((value, half_unit))` or `None` for NaN.
type Printed = Option<(f64, f64)>;

fn pct(v: f64) -> Printed {
    // percentages printed with 2 decimals, compared as fractions
    Some((v / 100.0, 0.005 / 100.0))
}

fn pct0(v: f64) -> Printed {
    Some((v / 100.0, 0.5 / 100.0))
}

fn d2(v: f64) -> Printed {
    Some((v, 0.005))
}

fn d3(v: f64) -> Printed {
    Some((v, 0.0005))
}

fn compare(c: &mut Criterion, model: &str, row: &str, got: MetricValue, printed: Printed) {
    match (got, printed) {
        (MetricValue::Undefined, None) => c.check(true, ""),
        (MetricValue::Defined(v), Some((want, tol))) => c.check(
            (v - want).abs() <= tol + 1e-12,
            format!("{model} {row}: computed {v} vs printed {want} (tolerance {tol})"),
        ),
        (got, want) => c.check(
            false,
            format!("{model} {row}: computed {got} vs printed {want:?}"),
        ),
    }
}

#[test]
fn c1_table1_golden() {
    let start = Instant::now();
    let mut c = Criterion::new("C1 Table 1 golden reproduction");
    #[rustfmt::skip]
    let printed: [(&str, u64, [Printed; 8]); 4] = [
        // evidence lost, accuracy, mcc, wmcc, precision, recall, specificity, f1
        ("gemma:7b", 1720,
         [pct0(100.0), pct(96.17), None, None, None, d2(0.00), d2(1.00), None]),
        ("llama3-Athene:70b", 1332,
         [pct0(73.0), pct(95.40), d2(0.29), d2(0.40), d2(0.36), d2(0.27), d2(0.98), d2(0.31)]),
        ("llama3.1:8b", 1181,
         [pct0(52.0), pct(91.80), d2(0.29), d2(0.48), d2(0.23), d2(0.48), d2(0.94), d2(0.31)]),
        ("mistral-nemo:12b", 1723,
         [pct0(100.0), pct(96.11), d3(-0.005), d3(-0.014), d2(0.00), d2(0.00), d2(1.00), None]),
    ];
    let totals = [4496, 4496, 4501, 4501];
    for ((model, cost, row), total) in printed.iter().zip(totals) {
        let ms: MetricSet = metric_set(&matrix(model), &w10());
        c.check(
            ms.total_n == total,
            format!("{model} N: {} vs {total}", ms.total_n),
        );
        let computed = [
            ms.lost_evidence,
            ms.accuracy,
            ms.mcc,
            ms.wmcc,
            ms.precision,
            ms.recall,
            ms.specificity,
            ms.f1,
        ];
        let names = [
            "Evidence Lost",
            "Accuracy",
            "MCC",
            "WMCC",
            "Precision",
            "Recall",
            "Specificity",
            "F1",
        ];
        for ((name, got), want) in names.iter().zip(computed).zip(row.iter()) {
            compare(&mut c, model, name, got, *want);
        }
        c.check(
            ms.cost == *cost as f64,
            format!("{model} Cost: {} vs {cost}", ms.cost),
        );
    }
    c.finish(start.elapsed(), Some(Duration::from_secs(1)));
}

fn isqrt_round(x: i128) -> i128 {
    // nearest integer to sqrt(x)
    let mut r = (x as f64).sqrt() as i128;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    // r <= sqrt(x) < r + 1; round up when x >= (r + 0.5)^2
    if 4 * x >= (2 * r + 1) * (2 * r + 1) {
        r + 1
    } else {
        r
    }
}

fn integer_wmcc(cm: &ConfusionMatrix, w: i128) -> (i128, i128) {
    let (tp, fn_, fp, tn) = (cm.tp as i128, cm.fn_ as i128, cm.fp as i128, cm.tn as i128);
    let num = w * (tp * tn - fp * fn_);
    let radicand = (w * tp + fp) * (w * (tp + fn_)) * (tn + fp) * (tn + w * fn_);
    (num, isqrt_round(radicand))
}

#[test]
fn c2_wmcc_worked_examples() {
    let start = Instant::now();
    let mut c = Criterion::new("C2 WMCC worked examples");
    for (model, num, den, ratio) in [
        ("llama3-Athene:70b", 1_891_240_i128, 4_748_341_i128, 0.398),
        ("llama3.1:8b", 3_066_460, 6_368_931, 0.481),
    ] {
        let cm = matrix(model);
        let (onum, oden) = integer_wmcc(&cm, 10);
        c.check(
            onum == num,
            format!("{model} oracle numerator {onum} vs {num}"),
        );
        c.check(
            oden == den,
            format!("{model} oracle denominator {oden} vs {den}"),
        );

        let terms = wmcc_terms(&cm, &w10());
        c.check(
            terms.numerator == num as f64,
            format!("{model} numerator {} vs {num}", terms.numerator),
        );
        c.check(
            terms.denominator().round() == den as f64,
            format!("{model} denominator {} vs {den}", terms.denominator()),
        );
        let v = metrics::wmcc(&cm, &w10()).value().unwrap_or(f64::NAN);
        c.check(
            (v - ratio).abs() <= 5e-4,
            format!("{model} WMCC {v} vs {ratio}"),
        );
        c.check(
            (v - num as f64 / den as f64).abs() <= 5e-4,
            format!("{model} WMCC {v} vs integer ratio"),
        );
    }
    c.finish(start.elapsed(), None);
}

#[test]
fn c3_cost_row() {
    let start = Instant::now();
    let mut c = Criterion::new("C3 cost row");
    for ((model, cm), want) in TABLE1.iter().zip([1720u64, 1332, 1181, 1723]) {
        let oracle = 10 * cm.fn_ + cm.fp;
        c.check(
            oracle == want,
            format!("{model} oracle cost {oracle} vs {want}"),
        );
        let got = metrics::cost(cm, &w10());
        c.check(
            got.fract() == 0.0 && got as u64 == want,
            format!("{model} cost {got} vs {want}"),
        );
    }
    c.finish(start.elapsed(), None);
}

#[test]
fn c4_reconstruction_round_trip() {
    let start = Instant::now();
    let mut c = Criterion::new("C4 reconstruction round trip");
    for (model, cm) in TABLE1 {
        let partial = cm.partial_counts();
        c.check(
            partial.gold_negatives == cm.tn + cm.fp
                && partial.gold_positives == cm.tp + cm.fn_
                && partial.predicted_negatives == cm.tn + cm.fn_
                && partial.true_negatives == cm.tn,
            format!("{model} partial counts {partial:?}"),
        );
        match reconstruct_matrix(&partial) {
            Ok(back) => c.check(back == cm, format!("{model}: {back:?} vs {cm:?}")),
            Err(e) => c.check(false, format!("{model}: {e}")),
        }
    }
    c.finish(start.elapsed(), None);
}

fn any_matrix() -> impl Strategy<Value = ConfusionMatrix> {
    (0u64..2000, 0u64..2000, 0u64..2000, 0u64..20000)
        .prop_map(|(tp, fn_, fp, tn)| ConfusionMatrix::new(tp, fn_, fp, tn))
}

fn in_range(v: MetricValue, lo: f64, hi: f64) -> bool {
    v.value().is_none_or(|x| (lo..=hi).contains(&x))
}

fn outcome_record(i: usize, outcome: u8) -> LabeledRecord {
    let (gold, pred) = match outcome % 6 {
        0 => (GoldLabel::Positive, RawPrediction::Include),
        1 => (GoldLabel::Positive, RawPrediction::Exclude),
        2 => (GoldLabel::Positive, RawPrediction::Null),
        3 => (GoldLabel::Negative, RawPrediction::Include),
        4 => (GoldLabel::Negative, RawPrediction::Exclude),
        _ => (GoldLabel::Negative, RawPrediction::Null),
    };
    LabeledRecord::new(format!("r{i}"), gold, pred)
}

#[test]
fn c5_property_suite() {
    let start = Instant::now();
    let mut c = Criterion::new("C5 property suite");
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };

    let mut runner = TestRunner::new(config.clone());
    let r = runner.run(&any_matrix(), |cm| {
        let w1 = metrics::wmcc(&cm, &CostModel::unweighted());
        let m = metrics::mcc::<f64>(&cm);
        match (w1, m) {
            (MetricValue::Defined(a), MetricValue::Defined(b)) => {
                prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}")
            }
            (a, b) => prop_assert_eq!(a.is_defined(), b.is_defined()),
        }
        Ok(())
    });
    c.check(r.is_ok(), format!("(a) wmcc(w=1) == mcc: {r:?}"));

    let mut runner = TestRunner::new(config.clone());
    let r = runner.run(&(any_matrix(), 0.01f64..100.0), |(cm, w)| {
        let ms = metric_set(&cm, &CostModel::new(w).unwrap());
        prop_assert!(in_range(ms.mcc, -1.0, 1.0));
        prop_assert!(in_range(ms.wmcc, -1.0, 1.0));
        prop_assert!(in_range(ms.pabak, -1.0, 1.0));
        for v in [
            ms.accuracy,
            ms.recall,
            ms.lost_evidence,
            ms.precision,
            ms.specificity,
            ms.f1,
        ] {
            prop_assert!(in_range(v, 0.0, 1.0), "{v}");
        }
        prop_assert!((0.0..=1.0).contains(&ms.referral_rate));
        Ok(())
    });
    c.check(r.is_ok(), format!("(b) ranges: {r:?}"));

    let mut runner = TestRunner::new(config.clone());
    let r = runner.run(&any_matrix(), |cm| {
        let a = metrics::mcc::<f64>(&cm);
        let b = metrics::mcc::<f64>(&cm.swapped());
        match (a, b) {
            (MetricValue::Defined(x), MetricValue::Defined(y)) => {
                prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}")
            }
            (x, y) => prop_assert_eq!(x.is_defined(), y.is_defined()),
        }
        Ok(())
    });
    c.check(r.is_ok(), format!("(c) class-swap symmetry: {r:?}"));

    let mut runner = TestRunner::new(config.clone());
    let r = runner.run(&prop::collection::vec(0u8..6, 1..300), |outcomes| {
        let records: Vec<LabeledRecord> = outcomes
            .iter()
            .enumerate()
            .map(|(i, &o)| outcome_record(i, o))
            .collect();
        let cm = build_matrix(&records).unwrap();
        let count = |k: u8| outcomes.iter().filter(|&&o| o % 6 == k).count() as u64;
        prop_assert_eq!(cm.total(), records.len() as u64);
        prop_assert_eq!(cm.tp, count(0) + count(2));
        prop_assert_eq!(cm.fn_, count(1));
        prop_assert_eq!(cm.fp, count(3) + count(5));
        prop_assert_eq!(cm.tn, count(4));
        prop_assert_eq!(cm.referred_back(), count(2) + count(5));
        Ok(())
    });
    c.check(r.is_ok(), format!("(d) referred-back conservation: {r:?}"));

    let mut runner = TestRunner::new(config);
    let keys = [
        RankKey::Wmcc,
        RankKey::Mcc,
        RankKey::Cost,
        RankKey::LostEvidence,
    ];
    let r = runner.run(
        &(prop::collection::vec(any_matrix(), 1..12), 0usize..4),
        |(cms, k)| {
            let key = keys[k];
            let results: IndexMap<String, MetricSet> = cms
                .iter()
                .enumerate()
                .map(|(i, cm)| (format!("m{i:02}"), metric_set(cm, &w10())))
                .collect();
            let ranked = rank_models(&results, key);
            prop_assert_eq!(ranked.len(), results.len());
            let entries: Vec<(&str, &MetricSet)> =
                results.iter().map(|(k, v)| (k.as_str(), v)).collect();
            for a in &entries {
                prop_assert_eq!(rank_cmp(key, *a, *a), std::cmp::Ordering::Equal);
                for b in &entries {
                    let ab = rank_cmp(key, *a, *b);
                    prop_assert_eq!(ab, rank_cmp(key, *b, *a).reverse());
                    if a.0 != b.0 {
                        prop_assert_ne!(ab, std::cmp::Ordering::Equal);
                    }
                }
            }
            for pair in ranked.windows(2) {
                let a = (pair[0].0.as_str(), &results[&pair[0].0]);
                let b = (pair[1].0.as_str(), &results[&pair[1].0]);
                prop_assert_eq!(rank_cmp(key, a, b), std::cmp::Ordering::Less);
            }
            Ok(())
        },
    );
    c.check(r.is_ok(), format!("(e) ranking totality: {r:?}"));

    c.finish(start.elapsed(), Some(Duration::from_secs(10)));
}

fn exhaustive_mean_recall(gold: &[bool], size: usize) -> (f64, f64, usize) {
    let n = gold.len();
    let mut values = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let picked: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let positives = picked.iter().filter(|&&i| gold[i]).count();
        // every record is predicted positive for index < 2, negative otherwise
        let tp = picked.iter().filter(|&&i| gold[i] && i < 2).count();
        if positives > 0 {
            values.push(tp as f64 / positives as f64);
        }
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    (m, var.sqrt(), values.len())
}

#[test]
fn c6_resampling_oracle() {
    let start = Instant::now();
    let mut c = Criterion::new("C6 resampling oracle");
    // 3 positives (ids 0..3), two of them detected; 7 negatives, one false positive
    let gold: Vec<bool> = (0..10).map(|i| i < 3).collect();
    let records: Vec<LabeledRecord> = (0..10)
        .map(|i| {
            let pred = if i < 2 || i == 5 {
                RawPrediction::Include
            } else {
                RawPrediction::Exclude
            };
            let g = if gold[i] {
                GoldLabel::Positive
            } else {
                GoldLabel::Negative
            };
            LabeledRecord::new(format!("r{i}"), g, pred)
        })
        .collect();
    let (exact_mean, exact_sd, defined_subsets) = exhaustive_mean_recall(&gold, 5);
    c.check(
        defined_subsets == 252 - 21,
        format!("subsets with a positive: {defined_subsets}"),
    );

    let plan = SubsamplePlan::new(vec![5], SubsampleMetric::Recall, w10())
        .with_iterations(10_000)
        .with_seed(20240917);
    let dist = subsample_distribution(&records, &plan).unwrap();
    let values = subsample_values(&records, &plan, 5).unwrap();
    let defined = values.iter().filter(|v| v.is_defined()).count();
    let mean = dist[0].mean.value().unwrap_or(f64::NAN);
    let se = exact_sd / (defined as f64).sqrt();
    c.check(
        (mean - exact_mean).abs() <= 3.0 * se,
        format!("mean {mean} vs exact {exact_mean} (3 SE = {})", 3.0 * se),
    );
    let undefined: f64 = 21.0 / 252.0;
    let und_se = (undefined * (1.0 - undefined) / 10_000.0).sqrt();
    c.check(
        (dist[0].undefined_fraction - undefined).abs() <= 3.0 * und_se,
        format!(
            "undefined fraction {} vs exact {undefined}",
            dist[0].undefined_fraction
        ),
    );

    let full = SubsamplePlan::new(vec![10], SubsampleMetric::Recall, w10())
        .with_iterations(10_000)
        .with_seed(20240917);
    let dist = subsample_distribution(&records, &full).unwrap();
    c.check(
        dist[0].sd == MetricValue::Defined(0.0),
        format!("sd at size = population: {}", dist[0].sd),
    );
    let whole = build_matrix(&records).unwrap();
    c.check(
        dist[0].mean == metrics::metric_set::<f64>(&whole, &w10()).recall,
        format!("mean at size = population: {}", dist[0].mean),
    );
    c.finish(start.elapsed(), Some(Duration::from_secs(5)));
}

#[test]
fn c7_stability_by_size() {
    let start = Instant::now();
    let mut c = Criterion::new("C7 WMCC stability by subsample size");
    let cm = matrix("llama3.1:8b");
    let records = expand_matrix(&cm, "p");
    c.check(
        Outcome::tally(records.iter().map(|r| Outcome::of(r.gold, r.prediction))) == cm,
        "expanded records reproduce the matrix",
    );
    let plan = SubsamplePlan::new(vec![100, 500], SubsampleMetric::Wmcc, w10())
        .with_iterations(10_000)
        .with_seed(42);
    let dist = subsample_distribution(&records, &plan).unwrap();
    let (sd100, sd500) = (dist[0].sd, dist[1].sd);
    match (sd100.value(), sd500.value()) {
        (Some(a), Some(b)) => c.check(b < a, format!("sd(500) {b} vs sd(100) {a}")),
        _ => c.check(false, format!("undefined sd: {sd100} / {sd500}")),
    }
    c.finish(start.elapsed(), Some(Duration::from_secs(30)));
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        std::iter::once("screenlit").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn c8_compliance_fixtures() {
    let start = Instant::now();
    let mut c = Criterion::new("C8 compliance fixtures");

    let bad = EvaluationManifest::from_reader(ACCURACY_MANIFEST.as_bytes()).unwrap();
    let findings = lint_manifest(&bad);
    let r1 = findings
        .iter()
        .filter(|f| f.rule_id == "R1" && f.severity == Severity::Error)
        .count();
    let r4 = findings
        .iter()
        .filter(|f| f.rule_id == "R4" && f.severity == Severity::Error)
        .count();
    c.check(r1 >= 1, format!("R1 errors: {r1}"));
    c.check(r4 == 1, format!("R4 errors: {r4}"));
    c.check(
        r1 + r4 == findings.len(),
        format!(
            "unexpected findings: {:?}",
            findings.iter().map(ToString::to_string).collect::<Vec<_>>()
        ),
    );

    let good = EvaluationManifest::from_reader(COMPLIANT_MANIFEST.as_bytes()).unwrap();
    let findings = lint_manifest(&good);
    c.check(
        findings.is_empty(),
        format!("compliant findings: {findings:?}"),
    );

    let dir = tempfile::tempdir().unwrap();
    let good_path = dir.path().join("good.json");
    let bad_path = dir.path().join("bad.json");
    let cm_path = dir.path().join("cm.json");
    std::fs::write(&good_path, COMPLIANT_MANIFEST).unwrap();
    std::fs::write(&bad_path, ACCURACY_MANIFEST).unwrap();
    std::fs::write(&cm_path, common::table1_matrices_json()).unwrap();
    let good_s = good_path.to_str().unwrap();
    let bad_s = bad_path.to_str().unwrap();
    let cm_s = cm_path.to_str().unwrap();

    let (code, _, _) = run_cli(&["lint", "--manifest", good_s]);
    c.check(code == EXIT_OK, format!("compliant lint exit {code}"));
    let (code, _, _) = run_cli(&["lint", "--manifest", bad_s]);
    c.check(
        code == EXIT_LINT,
        format!("accuracy manifest lint exit {code}"),
    );
    // every Table 1 model loses more than 20% of the evidence
    let (code, _, _) = run_cli(&["lint", "--manifest", good_s, "--cm", cm_s]);
    c.check(
        code == EXIT_GUARDRAIL,
        format!("guardrail lint exit {code}"),
    );
    let (code, _, _) = run_cli(&["evaluate", "--cm", cm_s, "--max-lost-evidence", "0.2"]);
    c.check(
        code == EXIT_GUARDRAIL,
        format!("guardrail evaluate exit {code}"),
    );
    let (code, _, _) = run_cli(&["evaluate", "--cm", cm_s, "--max-lost-evidence", "1"]);
    c.check(code == EXIT_OK, format!("relaxed guardrail exit {code}"));

    c.finish(start.elapsed(), None);
}
