//! Label a referent with two clicks, extend it, and retract a frame.

use std::path::PathBuf;

use rmot::annotator::{create_expression, intervals_by_object, propagate, retract, ClickPair};
use rmot::data_model::{load_annotation, referent_frames};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ann = load_annotation(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.json"))?;
    let (ann, eid) = create_expression(&ann, "the pedestrian")?;
    println!("created expression {eid}");

    let click = ClickPair { expression_id: eid, object_id: 1, start_frame: 1, end_frame: 2 };
    let ann = propagate(&ann, &click)?;
    let expr = ann.expression(eid).expect("just created");
    println!("intervals after two clicks: {:?}", intervals_by_object(expr));
    println!("referent frames: {:?}", referent_frames(&ann, eid)?);

    let bad = ClickPair { start_frame: 0, ..click };
    if let Err(e) = propagate(&ann, &bad) {
        println!("rejected: {e} ({})", e.code());
    }

    let ann = retract(&ann, eid, 1, 2)?;
    println!("after retracting frame 2: {:?}", intervals_by_object(ann.expression(eid).expect("exists")));
    Ok(())
}
