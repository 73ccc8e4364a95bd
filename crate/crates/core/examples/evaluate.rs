//! Evaluate a prediction CSV against an annotation and print the table row.
//!
//! cargo run -p rmot --example evaluate -- [annotation.json prediction.csv]

use std::path::PathBuf;

use rmot::data_model::{load_annotation, load_predictions};
use rmot::hota::{evaluate_expression, render_report, report_from, EvalConfig, ReferentGroundTruth, ReportFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/micro");
    let mut args = std::env::args().skip(1);
    let ann_path = args.next().map(PathBuf::from).unwrap_or(fixtures.join("gt/micro.json"));
    let pred_path = args.next().map(PathBuf::from).unwrap_or(fixtures.join("pred/micro_0.csv"));

    let ann = load_annotation(&ann_path)?;
    let pred = load_predictions(&pred_path)?;
    let gt = ReferentGroundTruth::from_annotation(&ann, pred.expression_id)?;
    let eval = evaluate_expression(&gt, &pred, &EvalConfig::default())?;

    println!("{} expression {}", eval.sequence_id, eval.expression_id);
    for a in eval.per_alpha.iter().step_by(3) {
        println!(
            "  alpha {:.2}: TP {} FN {} FP {}  DetA {:.3} AssA {:.3}",
            a.alpha, a.tp, a.fn_, a.fp, a.metrics.deta, a.metrics.assa
        );
    }
    print!("{}", render_report(&report_from(&[eval]), ReportFormat::Table));
    Ok(())
}
