//! Run the ground-truth oracle through the query lifecycle on synthetic
//! sequences, then corrupt its output and watch the metrics move.

use rmot::hota::{evaluate_dataset, render_report, EvalConfig, ReferentGroundTruth, ReportFormat};
use rmot::lifecycle::{run, OracleScorer, TrackerConfig};
use rmot::synthetic::{drop_random_frames, jitter_boxes, random_id_switch, synthetic_dataset, FixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = TrackerConfig::default();
    let mut clean = Vec::new();
    let mut jittered = Vec::new();
    let mut switched = Vec::new();
    let mut dropped = Vec::new();
    for ann in synthetic_dataset(10, 2024, &FixtureSpec::default()) {
        for e in &ann.expressions {
            let gt = ReferentGroundTruth::from_annotation(&ann, e.id)?;
            let mut scorer = OracleScorer::new(&ann, e.id, cfg.detect_slots)?;
            let pred = run(&ann.sequence_id, e.id, ann.frame_count, &mut scorer, cfg)?.predictions;
            jittered.push((gt.clone(), jitter_boxes(&pred, 4.0, ann.frame_w, ann.frame_h, 1)));
            switched.push((gt.clone(), random_id_switch(&pred, 1).unwrap_or_else(|| pred.clone())));
            dropped.push((gt.clone(), drop_random_frames(&pred, 3, 1)));
            clean.push((gt, pred));
        }
    }
    let eval = EvalConfig::default();
    for (name, pairs) in [("oracle", &clean), ("jitter 4px", &jittered), ("ID switch", &switched), ("3 frames dropped", &dropped)] {
        println!("{name}");
        print!("{}", render_report(&evaluate_dataset(pairs, &eval)?, ReportFormat::Table));
    }
    Ok(())
}
