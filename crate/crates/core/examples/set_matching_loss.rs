//! Track loss on identity-aligned slots and detect loss with bipartite
//! matching of new-born objects.

use rmot::losses::{detect_loss, final_loss, track_loss, FrameLoss, GroundTruthObject, LossConfig, Reduction, TrackPrediction};
use rmot::NormBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = LossConfig::default();
    let car = NormBox::new(0.3, 0.5, 0.2, 0.1)?;
    let person = NormBox::new(0.7, 0.6, 0.05, 0.2)?;

    let tracks = [
        TrackPrediction { class_prob: 0.9, bbox: NormBox::new(0.31, 0.5, 0.2, 0.1)?, ref_prob: 0.8 },
        TrackPrediction { class_prob: 0.4, bbox: person, ref_prob: 0.3 },
    ];
    let targets = [GroundTruthObject::present(car, true), GroundTruthObject::absent()];
    let track = track_loss(&tracks, &targets, &cfg)?;
    println!("track loss {track:.4}");

    let detects = [
        TrackPrediction { class_prob: 0.1, bbox: car, ref_prob: 0.1 },
        TrackPrediction { class_prob: 0.8, bbox: NormBox::new(0.69, 0.61, 0.05, 0.2)?, ref_prob: 0.2 },
        TrackPrediction { class_prob: 0.2, bbox: NormBox::new(0.1, 0.1, 0.1, 0.1)?, ref_prob: 0.5 },
    ];
    let newborn = [GroundTruthObject::present(person, false)];
    let (detect, matching) = detect_loss(&detects, &newborn, &cfg)?;
    println!("detect loss {detect:.4}, matched (slot, object) {:?}", matching.pairs);

    let frames = [FrameLoss { track, detect }, FrameLoss { track: track / 2.0, detect }];
    println!("sum over frames {:.4}", final_loss(&frames, Reduction::Sum)?);
    println!("mean over frames {:.4}", final_loss(&frames, Reduction::Mean)?);
    Ok(())
}
