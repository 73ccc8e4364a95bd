use std::collections::BTreeSet;
use std::path::Path;

use rmot::data_model::{load_annotation, PredictionSet, SequenceAnnotation};
use rmot::hota::{evaluate_expression, EvalConfig, ReferentGroundTruth};
use rmot::lifecycle::{
    gt_detections, iou_associate, run, FrameScores, IouAssociatorConfig, OracleNoise, OracleScorer, Scorer,
    ScorerError, SlotScore, TrackerConfig, TrackerState,
};
use rmot::synthetic::{random_id_switch, synthetic_dataset, FixtureSpec};
use rmot::{BBox, TrackError};

fn tiny() -> SequenceAnnotation {
    load_annotation(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.json")).unwrap()
}

fn oracle_run(ann: &SequenceAnnotation, eid: u32, noise: OracleNoise) -> PredictionSet {
    let cfg = TrackerConfig::default();
    let mut scorer = OracleScorer::with_noise(ann, eid, cfg.detect_slots, noise).unwrap();
    run(&ann.sequence_id, eid, ann.frame_count, &mut scorer, cfg).unwrap().predictions
}

fn frame_boxes(set: &PredictionSet) -> BTreeSet<(u32, [u64; 4])> {
    set.rows.iter().map(|r| (r.frame, r.bbox.to_array().map(f64::to_bits))).collect()
}

#[test]
fn oracle_reproduces_referent_boxes() {
    let mut anns = synthetic_dataset(4, 5, &FixtureSpec::default());
    anns.push(tiny());
    for ann in &anns {
        for e in &ann.expressions {
            let pred = oracle_run(ann, e.id, OracleNoise::default());
            let gt = ReferentGroundTruth::from_annotation(ann, e.id).unwrap().to_predictions();
            assert_eq!(frame_boxes(&pred), frame_boxes(&gt), "{}/{}", ann.sequence_id, e.id);
        }
    }
}

#[test]
fn tiny_oracle_scores_and_ids() {
    let ann = tiny();
    let cfg = TrackerConfig::default();
    let mut scorer = OracleScorer::new(&ann, 0, cfg.detect_slots).unwrap();
    let out = run("tiny", 0, 3, &mut scorer, cfg).unwrap();
    // Both objects survive; only the car is a referent.
    assert_eq!(out.survivors.rows.len(), 5);
    assert_eq!(out.predictions.rows.len(), 3);
    assert!(out.predictions.rows.iter().all(|r| r.track_id == 0 && r.ref_score == 1.0));
    let pedestrian: Vec<_> = out.survivors.rows.iter().filter(|r| r.track_id == 1).collect();
    assert_eq!(pedestrian.len(), 2);
    assert!(pedestrian.iter().all(|r| r.class_score == 1.0 && r.ref_score == 0.0));
}

#[test]
fn oracle_rejects_unknown_expression() {
    assert!(OracleScorer::new(&tiny(), 9, 300).is_err());
}

struct Silent;

impl Scorer for Silent {
    fn score(&mut self, _: u32, state: &TrackerState) -> Result<FrameScores, ScorerError> {
        let s = SlotScore { class_score: 0.0, ref_score: 1.0, bbox: BBox::new(0.0, 0.0, 1.0, 1.0)?, key: 0 };
        Ok(FrameScores { track: vec![s; state.live_tracks.len()], detect: vec![s; state.config.detect_slots] })
    }
}

#[test]
fn all_zero_class_scores_give_nothing() {
    let out = run("s", 0, 10, &mut Silent, TrackerConfig::default()).unwrap();
    assert!(out.predictions.rows.is_empty() && out.survivors.rows.is_empty());
}

struct FailsAt(u32);

impl Scorer for FailsAt {
    fn score(&mut self, frame: u32, state: &TrackerState) -> Result<FrameScores, ScorerError> {
        if frame == self.0 {
            return Err("decoder exploded".into());
        }
        Silent.score(frame, state)
    }
}

#[test]
fn scorer_failure_carries_frame() {
    let err = run("s", 0, 10, &mut FailsAt(4), TrackerConfig::default()).unwrap_err();
    match err {
        TrackError::Scorer { frame, message } => {
            assert_eq!(frame, 4);
            assert!(message.contains("exploded"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

struct WrongLength;

impl Scorer for WrongLength {
    fn score(&mut self, _: u32, _: &TrackerState) -> Result<FrameScores, ScorerError> {
        Ok(FrameScores::default())
    }
}

#[test]
fn score_length_is_checked() {
    assert!(matches!(
        run("s", 0, 2, &mut WrongLength, TrackerConfig::default()),
        Err(TrackError::ScoreLength { frame: 0, .. })
    ));
}

#[test]
fn jitter_keeps_ids_and_moves_boxes() {
    let ann = &synthetic_dataset(1, 9, &FixtureSpec::default())[0];
    let eid = ann.expressions.iter().find(|e| !e.referents.is_empty()).unwrap().id;
    let clean = oracle_run(ann, eid, OracleNoise::default());
    let noisy = oracle_run(ann, eid, OracleNoise { box_sigma: 2.0, seed: 3, ..Default::default() });
    assert_eq!(clean.rows.len(), noisy.rows.len());
    let mut moved = 0;
    for (a, b) in clean.rows.iter().zip(&noisy.rows) {
        assert_eq!((a.frame, a.track_id), (b.frame, b.track_id));
        if a.bbox != b.bbox {
            moved += 1;
        }
    }
    assert!(moved > 0);
    assert_eq!(noisy, oracle_run(ann, eid, OracleNoise { box_sigma: 2.0, seed: 3, ..Default::default() }));
}

#[test]
fn referring_flips_are_seeded() {
    let ann = &synthetic_dataset(1, 9, &FixtureSpec::default())[0];
    let noise = OracleNoise { flip_ref: 0.3, seed: 1, ..Default::default() };
    let a = oracle_run(ann, 0, noise);
    assert_eq!(a, oracle_run(ann, 0, noise));
    assert_ne!(a, oracle_run(ann, 0, OracleNoise::default()));
}

#[test]
fn iou_baseline_beats_switched_oracle() {
    for ann in synthetic_dataset(5, 21, &FixtureSpec::default()) {
        for e in &ann.expressions {
            let gt = ReferentGroundTruth::from_annotation(&ann, e.id).unwrap();
            let tracked = iou_associate(
                &ann.sequence_id,
                e.id,
                &gt_detections(&ann, e.id).unwrap(),
                IouAssociatorConfig::default(),
            )
            .referent_only(0.4);
            let oracle = oracle_run(&ann, e.id, OracleNoise::default());
            let Some(switched) = random_id_switch(&oracle, 1) else { continue };
            let cfg = EvalConfig::default();
            let iou_hota = evaluate_expression(&gt, &tracked, &cfg).unwrap().metrics.hota;
            let switched_hota = evaluate_expression(&gt, &switched, &cfg).unwrap().metrics.hota;
            assert!(iou_hota >= switched_hota, "{}/{}: {iou_hota} < {switched_hota}", ann.sequence_id, e.id);
        }
    }
}
