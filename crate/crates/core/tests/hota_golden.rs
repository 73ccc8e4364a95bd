//! Golden report for the two-frame micro case (one ID switch on object 1).
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p rmot --test hota_golden`.

mod common;

use std::path::{Path, PathBuf};

use rmot::data_model::{load_annotation, load_predictions};
use rmot::hota::{default_alphas, evaluate_dataset, render_report, EvalConfig, EvalReport, Metrics, ReferentGroundTruth, ReportFormat};

fn micro() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/micro")
}

fn report() -> (ReferentGroundTruth, rmot::data_model::PredictionSet, EvalReport) {
    let ann = load_annotation(micro().join("gt/micro.json")).unwrap();
    let gt = ReferentGroundTruth::from_annotation(&ann, 0).unwrap();
    let pred = load_predictions(micro().join("pred/micro_0.csv")).unwrap();
    let report = evaluate_dataset(&[(gt.clone(), pred.clone())], &EvalConfig::default()).unwrap();
    (gt, pred, report)
}

fn check_golden(name: &str, actual: &str) {
    let path = micro().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{} differs from golden", path.display());
}

#[test]
fn micro_case_matches_oracle() {
    let (gt, pred, report) = report();
    let oracle = common::brute_hota(&gt, &pred, &default_alphas(), 1.0);
    let want = Metrics::mean(oracle.iter().map(|o| &o.metrics)).unwrap();
    for (name, (a, b)) in common::metric_pairs(&report.metrics, &want) {
        assert!((a - b).abs() <= 1e-12, "{name}: {a} vs oracle {b}");
    }
    // Object 1 splits over tracks 6 and 7, so association is imperfect while
    // every detection is found at low alpha.
    assert!(report.metrics.assa < 1.0);
    assert_eq!((oracle[0].tp, oracle[0].fp), (4, 0));
    // At low alpha: A = 1, 1 for object 0 and 1/2, 1/2 for object 1.
    assert_eq!(oracle[0].metrics.assa, 0.75);
    // Track 6 at frame 0 has IoU 2400/2880, so it is lost from alpha 0.85 on.
    let last = oracle.last().unwrap();
    assert_eq!((last.tp, last.fn_, last.fp), (3, 1, 1));
}

#[test]
fn micro_case_golden_json() {
    let (_, _, report) = report();
    let json = render_report(&report, ReportFormat::Json);
    check_golden("report.json", &json);
    let back: EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn micro_case_golden_table() {
    let (_, _, report) = report();
    check_golden("table.txt", &render_report(&report, ReportFormat::Table));
}
