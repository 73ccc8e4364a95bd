//! Tracking by detection: feed per-frame detections (here, ground-truth
//! boxes with a little noise and a few misses) to the IoU associator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmot::hota::{evaluate_dataset, render_report, EvalConfig, ReferentGroundTruth, ReportFormat};
use rmot::lifecycle::{gt_detections, iou_associate, IouAssociatorConfig};
use rmot::synthetic::{jitter_box, synthetic_dataset, FixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for patience in [0, 2] {
        let cfg = IouAssociatorConfig { patience, ..Default::default() };
        let mut pairs = Vec::new();
        for ann in synthetic_dataset(10, 7, &FixtureSpec::default()) {
            for e in &ann.expressions {
                let mut frames = gt_detections(&ann, e.id)?;
                for dets in &mut frames {
                    dets.retain(|_| rng.random_bool(0.9));
                    for d in dets.iter_mut() {
                        d.bbox = jitter_box(d.bbox, 2.0, f64::from(ann.frame_w), f64::from(ann.frame_h), &mut rng);
                    }
                }
                let pred = iou_associate(&ann.sequence_id, e.id, &frames, cfg).referent_only(0.4);
                pairs.push((ReferentGroundTruth::from_annotation(&ann, e.id)?, pred));
            }
        }
        println!("patience {patience}");
        print!("{}", render_report(&evaluate_dataset(&pairs, &EvalConfig::default())?, ReportFormat::Table));
    }
    Ok(())
}
