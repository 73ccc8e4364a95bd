//! Seeded synthetic sequences and corruptions of prediction sets.
//!
//! Objects move at constant velocity and are visible over one contiguous
//! frame range, so an exact tracker never has to re-identify anything.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data_model::{Expression, PredictionSet, Referent, SequenceAnnotation, TrackedObject};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub frames: std::ops::RangeInclusive<u32>,
    pub objects: std::ops::RangeInclusive<u32>,
    pub expressions: std::ops::RangeInclusive<u32>,
    pub frame_w: u32,
    pub frame_h: u32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { frames: 20..=40, objects: 3..=8, expressions: 2..=4, frame_w: 1242, frame_h: 375 }
    }
}

const CATEGORIES: [&str; 3] = ["car", "pedestrian", "van"];
const TEXTS: [&str; 6] = [
    "cars in the left",
    "moving cars",
    "pedestrians walking",
    "cars which are turning",
    "vehicles in front of ours",
    "people on the right",
];

/// One synthetic sequence named `name`.
pub fn synthetic_sequence(name: &str, seed: u64, spec: &FixtureSpec) -> SequenceAnnotation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame_count = rng.random_range(spec.frames.clone());
    let (w, h) = (f64::from(spec.frame_w), f64::from(spec.frame_h));
    let n_objects = rng.random_range(spec.objects.clone());

    let mut objects = Vec::new();
    for id in 0..n_objects {
        let start = rng.random_range(0..frame_count);
        let end = rng.random_range(start..frame_count);
        let bw = rng.random_range(20.0..w / 4.0);
        let bh = rng.random_range(20.0..h / 3.0);
        let (mut x, mut y) = (rng.random_range(0.0..w - bw), rng.random_range(0.0..h - bh));
        let (vx, vy) = (rng.random_range(-8.0..8.0), rng.random_range(-3.0..3.0));
        let mut boxes = BTreeMap::new();
        for f in start..=end {
            boxes.insert(f, BBox::new(x, y, x + bw, y + bh).expect("positive size"));
            x = (x + vx).clamp(0.0, w - bw);
            y = (y + vy).clamp(0.0, h - bh);
        }
        objects.push(TrackedObject {
            id,
            category: CATEGORIES.choose(&mut rng).expect("nonempty").to_string(),
            boxes,
        });
    }

    let n_expr = rng.random_range(spec.expressions.clone());
    let mut expressions = Vec::new();
    for id in 0..n_expr {
        let mut referents = Vec::new();
        let k = rng.random_range(0..=objects.len().min(3));
        let mut picked: Vec<&TrackedObject> = objects.iter().collect();
        picked.shuffle(&mut rng);
        for obj in picked.into_iter().take(k) {
            let first = *obj.boxes.keys().next().expect("nonempty");
            let last = *obj.boxes.keys().last().expect("nonempty");
            let start = rng.random_range(first..=last);
            let end = rng.random_range(start..=last);
            referents.push(Referent { object_id: obj.id, start, end });
        }
        referents.sort();
        expressions.push(Expression {
            id,
            text: TEXTS[(id as usize + seed as usize) % TEXTS.len()].to_string(),
            referents,
        });
    }

    SequenceAnnotation {
        sequence_id: name.to_string(),
        frame_count,
        frame_w: spec.frame_w,
        frame_h: spec.frame_h,
        objects,
        expressions,
    }
}

/// `count` sequences named `synth-00`, `synth-01`, ...; sequence `i` uses
/// seed `seed + i`.
pub fn synthetic_dataset(count: usize, seed: u64, spec: &FixtureSpec) -> Vec<SequenceAnnotation> {
    (0..count)
        .map(|i| synthetic_sequence(&format!("synth-{i:02}"), seed + i as u64, spec))
        .collect()
}

/// Add Gaussian noise to each corner coordinate, clamped to the frame.
/// Returns the box unchanged if the noisy one would be degenerate.
pub fn jitter_box(b: BBox, sigma: f64, frame_w: f64, frame_h: f64, rng: &mut impl Rng) -> BBox {
    if sigma <= 0.0 {
        return b;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let [x1, y1, x2, y2] = b.to_array().map(|v| v + normal.sample(rng));
    BBox::new(x1.clamp(0.0, frame_w), y1.clamp(0.0, frame_h), x2.clamp(0.0, frame_w), y2.clamp(0.0, frame_h))
        .unwrap_or(b)
}

/// Jitter every row's box.
pub fn jitter_boxes(set: &PredictionSet, sigma: f64, frame_w: u32, frame_h: u32, seed: u64) -> PredictionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = set.clone();
    for r in &mut out.rows {
        r.bbox = jitter_box(r.bbox, sigma, f64::from(frame_w), f64::from(frame_h), &mut rng);
    }
    out
}

/// Relabel `track_id` to a fresh id from `from_frame` on. Boxes and
/// per-frame rows are untouched.
pub fn switch_id(set: &PredictionSet, track_id: u32, from_frame: u32) -> PredictionSet {
    let fresh = set.rows.iter().map(|r| r.track_id).max().map_or(0, |m| m + 1);
    let mut out = set.clone();
    for r in &mut out.rows {
        if r.track_id == track_id && r.frame >= from_frame {
            r.track_id = fresh;
        }
    }
    out
}

/// Pick a track spanning at least two frames and switch its id at a frame
/// strictly after its first. `None` if no track qualifies.
pub fn random_id_switch(set: &PredictionSet, seed: u64) -> Option<PredictionSet> {
    let mut frames: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for r in &set.rows {
        frames.entry(r.track_id).or_default().insert(r.frame);
    }
    let candidates: Vec<(u32, Vec<u32>)> = frames
        .into_iter()
        .filter(|(_, f)| f.len() >= 2)
        .map(|(id, f)| (id, f.into_iter().collect()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (id, fs) = candidates.choose(&mut rng)?;
    let at = fs[rng.random_range(1..fs.len())];
    Some(switch_id(set, *id, at))
}

/// Remove every row at the given frames.
pub fn drop_frames(set: &PredictionSet, frames: &BTreeSet<u32>) -> PredictionSet {
    let mut out = set.clone();
    out.rows.retain(|r| !frames.contains(&r.frame));
    out
}

/// Remove all rows of `count` randomly chosen frames that have rows.
pub fn drop_random_frames(set: &PredictionSet, count: usize, seed: u64) -> PredictionSet {
    let occupied: Vec<u32> = set.rows.iter().map(|r| r.frame).collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<u32> = occupied.choose_multiple(&mut rng, count).copied().collect();
    drop_frames(set, &chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid_and_seeded() {
        let spec = FixtureSpec::default();
        let a = synthetic_dataset(5, 11, &spec);
        let b = synthetic_dataset(5, 11, &spec);
        assert_eq!(a, b);
        for ann in &a {
            ann.validate().unwrap();
            for o in &ann.objects {
                let f: Vec<u32> = o.boxes.keys().copied().collect();
                assert_eq!(f.last().unwrap() - f[0] + 1, f.len() as u32, "visibility is contiguous");
            }
        }
        assert_ne!(a[0], synthetic_sequence("synth-00", 12, &spec));
    }

    #[test]
    fn id_switch_keeps_rows() {
        let ann = synthetic_sequence("s", 3, &FixtureSpec::default());
        let mut set = PredictionSet::new("s", 0);
        for o in &ann.objects {
            for (&frame, &bbox) in &o.boxes {
                set.rows.push(crate::data_model::PredictionRow {
                    frame,
                    track_id: o.id,
                    bbox,
                    class_score: 1.0,
                    ref_score: 1.0,
                });
            }
        }
        let switched = random_id_switch(&set, 0).unwrap();
        assert_eq!(switched.rows.len(), set.rows.len());
        assert!(switched.rows.iter().zip(&set.rows).all(|(a, b)| a.bbox == b.bbox && a.frame == b.frame));
        assert_ne!(switched, set);
        switched.validate().unwrap();
        let dropped = drop_random_frames(&set, 2, 0);
        let gone: BTreeSet<u32> = set.rows.iter().map(|r| r.frame).collect::<BTreeSet<_>>()
            .difference(&dropped.rows.iter().map(|r| r.frame).collect())
            .copied()
            .collect();
        assert_eq!(gone.len(), 2);
    }

    #[test]
    fn jitter_stays_in_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = BBox::new(0.0, 0.0, 5.0, 5.0).unwrap();
        for _ in 0..200 {
            let j = jitter_box(b, 3.0, 100.0, 100.0, &mut rng);
            assert!(j.inside_frame(100.0, 100.0));
        }
    }
}
