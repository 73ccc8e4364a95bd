//! Converter from Refer-KITTI style labels.
//!
//! Expected layout under a dataset root (either label location works):
//!
//! ```text
//! <root>/KITTI/training/label_02/<seq>.txt   or  <root>/label_02/<seq>.txt
//! <root>/KITTI/training/image_02/<seq>/      optional, sets the frame count
//! <root>/expression/<seq>/<name>.json
//! ```
//!
//! Label rows are KITTI tracking rows
//! `frame track_id type truncated occluded alpha x1 y1 x2 y2 ...`;
//! `DontCare` rows and rows with `track_id < 0` are skipped. An expression
//! file is `{"sentence": "...", "label": {"<frame>": [track ids]}}`.
//! Expression ids are assigned in file-name order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data_model::{Expression, Referent, SequenceAnnotation, TrackedObject};
use crate::error::DataError;
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KittiOptions {
    pub frame_w: u32,
    pub frame_h: u32,
}

impl Default for KittiOptions {
    fn default() -> Self {
        KittiOptions { frame_w: 1242, frame_h: 375 }
    }
}

/// Parse a KITTI tracking label file into objects keyed by track id.
/// Boxes are clamped to the frame; boxes that become empty are dropped.
pub fn parse_kitti_labels(
    text: &str,
    origin: &Path,
    opts: KittiOptions,
) -> Result<BTreeMap<u32, TrackedObject>, DataError> {
    let (w, h) = (f64::from(opts.frame_w), f64::from(opts.frame_h));
    let mut objects: BTreeMap<u32, TrackedObject> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |column: usize, message: String| DataError::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            column,
            message,
        };
        if fields.len() < 10 {
            return Err(err(1, format!("expected at least 10 fields, found {}", fields.len())));
        }
        let frame: u32 = fields[0].parse().map_err(|e| err(1, format!("frame: {e}")))?;
        let track: i64 = fields[1].parse().map_err(|e| err(2, format!("track_id: {e}")))?;
        if track < 0 || fields[2] == "DontCare" {
            continue;
        }
        let mut c = [0.0f64; 4];
        for (k, v) in c.iter_mut().enumerate() {
            *v = fields[6 + k].parse().map_err(|e| err(7 + k, format!("box: {e}")))?;
        }
        let Ok(bbox) = BBox::new(c[0].clamp(0.0, w), c[1].clamp(0.0, h), c[2].clamp(0.0, w), c[3].clamp(0.0, h))
        else {
            continue;
        };
        let id = u32::try_from(track).map_err(|e| err(2, format!("track_id: {e}")))?;
        objects
            .entry(id)
            .or_insert_with(|| TrackedObject { id, category: fields[2].to_lowercase(), boxes: BTreeMap::new() })
            .boxes
            .insert(frame, bbox);
    }
    Ok(objects)
}

#[derive(Debug, Deserialize)]
struct RawExpression {
    sentence: String,
    #[serde(default)]
    label: BTreeMap<String, Vec<i64>>,
}

/// Referent intervals for one object: runs of listed frames that are
/// consecutive among the object's visible frames.
fn intervals(obj: &TrackedObject, listed: &BTreeSet<u32>) -> Vec<Referent> {
    let mut out: Vec<Referent> = Vec::new();
    let mut open = false;
    for &f in obj.boxes.keys() {
        if listed.contains(&f) {
            match out.last_mut() {
                Some(last) if open => last.end = f,
                _ => out.push(Referent { object_id: obj.id, start: f, end: f }),
            }
            open = true;
        } else {
            open = false;
        }
    }
    out
}

fn parse_expression(
    id: u32,
    text: &str,
    origin: &Path,
    objects: &BTreeMap<u32, TrackedObject>,
) -> Result<Expression, DataError> {
    let raw: RawExpression = serde_json::from_str(text).map_err(|e| DataError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut listed: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (frame, ids) in &raw.label {
        let frame: u32 = frame.trim().parse().map_err(|_| DataError::Parse {
            path: origin.to_path_buf(),
            line: 0,
            column: 0,
            message: format!("label key {frame:?} is not a frame number"),
        })?;
        for &oid in ids {
            if let Ok(oid) = u32::try_from(oid) {
                listed.entry(oid).or_default().insert(frame);
            }
        }
    }
    let mut referents = Vec::new();
    for (oid, frames) in &listed {
        if let Some(obj) = objects.get(oid) {
            referents.extend(intervals(obj, frames));
        }
    }
    referents.sort();
    Ok(Expression { id, text: raw.sentence.trim().to_string(), referents })
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

fn sorted_entries(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>, DataError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DataError::io(dir, e))? {
        let path = entry.map_err(|e| DataError::io(dir, e))?.path();
        if keep(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Convert one sequence from its label file and expression files.
///
/// The frame count is `frame_count` if given, else one past the largest
/// frame seen in the labels or expressions.
pub fn convert_sequence(
    sequence_id: &str,
    labels: &Path,
    expressions: &[PathBuf],
    frame_count: Option<u32>,
    opts: KittiOptions,
) -> Result<SequenceAnnotation, DataError> {
    let objects = parse_kitti_labels(&read(labels)?, labels, opts)?;
    let mut exprs = Vec::new();
    for (i, path) in expressions.iter().enumerate() {
        exprs.push(parse_expression(i as u32, &read(path)?, path, &objects)?);
    }
    let last_frame = objects
        .values()
        .filter_map(|o| o.boxes.keys().last().copied())
        .chain(exprs.iter().flat_map(|e| e.referents.iter().map(|r| r.end)))
        .max();
    let frame_count = frame_count.unwrap_or_else(|| last_frame.map_or(0, |f| f + 1));
    let ann = SequenceAnnotation {
        sequence_id: sequence_id.to_string(),
        frame_count,
        frame_w: opts.frame_w,
        frame_h: opts.frame_h,
        objects: objects.into_values().collect(),
        expressions: exprs,
    };
    ann.validate()?;
    Ok(ann)
}

/// Convert every sequence that has an expression directory.
pub fn load_refer_kitti(root: &Path, opts: KittiOptions) -> Result<Vec<SequenceAnnotation>, DataError> {
    let candidates = [root.join("KITTI/training"), root.to_path_buf()];
    let base = candidates
        .iter()
        .find(|b| b.join("label_02").is_dir())
        .ok_or_else(|| DataError::Validation(format!("no label_02 directory under {}", root.display())))?;
    let expr_root = root.join("expression");
    let seq_dirs = sorted_entries(&expr_root, |p| p.is_dir())?;
    let mut out = Vec::new();
    for dir in seq_dirs {
        let seq = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let labels = base.join("label_02").join(format!("{seq}.txt"));
        let exprs = sorted_entries(&dir, |p| p.extension().is_some_and(|e| e == "json"))?;
        let images = base.join("image_02").join(&seq);
        let frame_count = if images.is_dir() {
            Some(sorted_entries(&images, |p| p.is_file())?.len() as u32)
        } else {
            None
        };
        out.push(convert_sequence(&seq, &labels, &exprs, frame_count, opts)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{compute_stats, referent_frames};

    const LABELS: &str = "\
0 0 Car 0 0 -1.5 100 100 200 200 1.5 1.6 3.9 1 1 10 0.1
0 -1 DontCare -1 -1 -10 0 0 50 50 -1 -1 -1 -1000 -1000 -1000 -10
1 0 Car 0 0 -1.5 102 100 202 200 1.5 1.6 3.9 1 1 10 0.1
1 3 Pedestrian 0 0 0.2 500 120 530 200 1.7 0.6 0.8 2 1 12 0.2
2 0 Car 0 0 -1.5 104 100 204 200 1.5 1.6 3.9 1 1 10 0.1
4 0 Car 0 0 -1.5 108 100 1300 200 1.5 1.6 3.9 1 1 10 0.1
";

    #[test]
    fn parses_labels_and_clamps() {
        let objs = parse_kitti_labels(LABELS, Path::new("l.txt"), KittiOptions::default()).unwrap();
        assert_eq!(objs.keys().copied().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(objs[&0].category, "car");
        assert_eq!(objs[&0].boxes[&4].x2(), 1242.0);
        assert_eq!(objs[&3].boxes.len(), 1);
    }

    #[test]
    fn label_errors_name_line() {
        let err = parse_kitti_labels("0 0 Car 0 0 0 1 2 x 4", Path::new("l.txt"), KittiOptions::default())
            .unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, column: 9, .. }));
    }

    #[test]
    fn converts_a_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let labels = dir.path().join("0001.txt");
        fs::write(&labels, LABELS).unwrap();
        let e = dir.path().join("a.json");
        fs::write(&e, r#"{"sentence": "the car ", "label": {"0": [0], "1": [0, 3], "2": [0], "4": [0], "3": [0]}}"#)
            .unwrap();
        let ann = convert_sequence("0001", &labels, &[e], None, KittiOptions::default()).unwrap();
        assert_eq!(ann.frame_count, 5);
        let expr = &ann.expressions[0];
        assert_eq!(expr.text, "the car");
        // frame 3 has no box for object 0, so 0..=4 is one run over visible frames
        assert_eq!(
            expr.referents,
            vec![Referent { object_id: 0, start: 0, end: 4 }, Referent { object_id: 3, start: 1, end: 1 }]
        );
        let frames = referent_frames(&ann, 0).unwrap();
        assert_eq!(frames.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2, 4]);
        let stats = compute_stats(&[ann]);
        assert_eq!(stats.mean_objects_per_expression, 2.0);
        assert!((stats.mean_temporal_ratio - 0.8).abs() < 1e-12);
    }

    #[test]
    fn loads_dataset_layout() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("KITTI/training/label_02")).unwrap();
        fs::create_dir_all(root.join("KITTI/training/image_02/0001")).unwrap();
        fs::create_dir_all(root.join("expression/0001")).unwrap();
        fs::write(root.join("KITTI/training/label_02/0001.txt"), LABELS).unwrap();
        for f in 0..6 {
            fs::write(root.join(format!("KITTI/training/image_02/0001/{f:06}.png")), b"").unwrap();
        }
        fs::write(root.join("expression/0001/b.json"), r#"{"sentence": "walking people", "label": {"1": [3]}}"#)
            .unwrap();
        fs::write(root.join("expression/0001/a.json"), r#"{"sentence": "cars", "label": {"0": [0]}}"#).unwrap();
        let anns = load_refer_kitti(root, KittiOptions::default()).unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].frame_count, 6);
        assert_eq!(anns[0].expressions[0].text, "cars");
        assert_eq!(anns[0].expressions[1].text, "walking people");
        assert!(load_refer_kitti(&root.join("expression"), KittiOptions::default()).is_err());
    }
}
