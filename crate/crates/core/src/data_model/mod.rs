//! Sequence annotations, referent ground truth and tracker predictions.
//!
//! An annotation is one JSON document per sequence. Referent ground truth is
//! kept as per-object frame intervals (the two clicks) and expanded on demand
//! by [`referent_frames`]. Frames are 0-indexed everywhere.

mod predictions;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::geometry::BBox;

pub use predictions::{
    format_score, load_predictions, load_predictions_as, prediction_file_name, save_predictions,
    PredictionRow, PredictionSet, PREDICTION_HEADER,
};
pub use stats::{compute_stats, DatasetStats, Histogram};

/// One ground-truth identity and its per-frame boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedObject {
    pub id: u32,
    pub category: String,
    pub boxes: BTreeMap<u32, BBox>,
}

impl TrackedObject {
    pub fn visible_at(&self, frame: u32) -> bool {
        self.boxes.contains_key(&frame)
    }
}

/// An object referred to over the inclusive frame range `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Referent {
    pub object_id: u32,
    pub start: u32,
    pub end: u32,
}

impl Referent {
    pub fn contains(&self, frame: u32) -> bool {
        self.start <= frame && frame <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expression {
    pub id: u32,
    pub text: String,
    pub referents: Vec<Referent>,
}

impl Expression {
    /// Distinct referenced object ids.
    pub fn referent_objects(&self) -> BTreeSet<u32> {
        self.referents.iter().map(|r| r.object_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceAnnotation {
    pub sequence_id: String,
    pub frame_count: u32,
    pub frame_w: u32,
    pub frame_h: u32,
    pub objects: Vec<TrackedObject>,
    pub expressions: Vec<Expression>,
}

impl SequenceAnnotation {
    pub fn object(&self, id: u32) -> Option<&TrackedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn expression(&self, id: u32) -> Option<&Expression> {
        self.expressions.iter().find(|e| e.id == id)
    }

    pub fn expression_mut(&mut self, id: u32) -> Option<&mut Expression> {
        self.expressions.iter_mut().find(|e| e.id == id)
    }

    /// Objects with a box at `frame`, in file order.
    pub fn visible_at(&self, frame: u32) -> impl Iterator<Item = (&TrackedObject, &BBox)> {
        self.objects
            .iter()
            .filter_map(move |o| o.boxes.get(&frame).map(|b| (o, b)))
    }

    /// Check every schema invariant. Errors name the offending object or
    /// expression.
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::Validation(msg));
        if self.frame_count < 1 {
            return fail("frame_count must be at least 1".into());
        }
        if self.frame_w == 0 || self.frame_h == 0 {
            return fail(format!("frame size {}x{} must be positive", self.frame_w, self.frame_h));
        }
        let (fw, fh) = (f64::from(self.frame_w), f64::from(self.frame_h));
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return fail(format!("object_id {} is not unique", o.id));
            }
            for (&f, b) in &o.boxes {
                if f >= self.frame_count {
                    return fail(format!(
                        "object_id {}: frame {f} outside 0..{}",
                        o.id, self.frame_count
                    ));
                }
                if !b.inside_frame(fw, fh) {
                    return fail(format!(
                        "object_id {}: box {:?} at frame {f} outside {}x{} frame",
                        o.id,
                        b.to_array(),
                        self.frame_w,
                        self.frame_h
                    ));
                }
            }
        }
        let mut expr_ids = HashSet::new();
        for e in &self.expressions {
            if !expr_ids.insert(e.id) {
                return fail(format!("expression_id {} is not unique", e.id));
            }
            let mut by_object: BTreeMap<u32, Vec<&Referent>> = BTreeMap::new();
            for r in &e.referents {
                if r.start > r.end {
                    return fail(format!(
                        "expression_id {}: referent object_id {} has start {} > end {}",
                        e.id, r.object_id, r.start, r.end
                    ));
                }
                if r.end >= self.frame_count {
                    return fail(format!(
                        "expression_id {}: referent object_id {} ends at {} beyond frame_count {}",
                        e.id, r.object_id, r.end, self.frame_count
                    ));
                }
                if !ids.contains(&r.object_id) {
                    return fail(format!(
                        "expression_id {}: referent object_id {} does not exist",
                        e.id, r.object_id
                    ));
                }
                by_object.entry(r.object_id).or_default().push(r);
            }
            for (oid, mut rs) in by_object {
                rs.sort_by_key(|r| r.start);
                if rs.windows(2).any(|w| w[1].start <= w[0].end) {
                    return fail(format!(
                        "expression_id {}: overlapping intervals for object_id {oid}",
                        e.id
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parse and validate a JSON document. `origin` is only used in
    /// diagnostics.
    pub fn from_json_str(s: &str, origin: &Path) -> Result<Self, DataError> {
        let ann: SequenceAnnotation = serde_json::from_str(s).map_err(|e| DataError::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        ann.validate()?;
        Ok(ann)
    }

    /// Canonical serialized form: pretty JSON with a trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("annotation serializes");
        s.push('\n');
        s
    }
}

pub fn load_annotation(path: impl AsRef<Path>) -> Result<SequenceAnnotation, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    SequenceAnnotation::from_json_str(&text, path)
}

/// Validate, then write atomically.
pub fn save_annotation(ann: &SequenceAnnotation, path: impl AsRef<Path>) -> Result<(), DataError> {
    ann.validate()?;
    write_atomic(path.as_ref(), ann.to_json_string().as_bytes())
}

/// `*.json` files directly inside `dir`, sorted by file name.
pub fn annotation_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, DataError> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| DataError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Load every `*.json` annotation in a directory, sorted by file name.
pub fn load_annotation_dir(dir: impl AsRef<Path>) -> Result<Vec<SequenceAnnotation>, DataError> {
    annotation_files(dir)?.iter().map(load_annotation).collect()
}

/// Write to a sibling temp file, sync, then rename over `path`. A crash at
/// any point leaves either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let name = path
        .file_name()
        .ok_or_else(|| DataError::Validation(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        if tmp.is_file() {
            let _ = fs::remove_file(&tmp);
        }
        DataError::io(path, e)
    })
}

/// Referent objects per frame for one expression.
///
/// An object is included at frame `f` iff `f` lies in one of its referent
/// intervals and the object has a box at `f`. Frames with no referent are
/// absent from the map.
pub fn referent_frames(
    ann: &SequenceAnnotation,
    expression_id: u32,
) -> Result<BTreeMap<u32, BTreeSet<u32>>, DataError> {
    let expr = ann
        .expression(expression_id)
        .ok_or(DataError::UnknownExpression(expression_id))?;
    let mut out: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for r in &expr.referents {
        let Some(obj) = ann.object(r.object_id) else {
            continue;
        };
        for (&f, _) in obj.boxes.range(r.start..=r.end) {
            out.entry(f).or_default().insert(r.object_id);
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Single object visible on `frames`, 100x100 boxes in a 1000x1000 frame.
    pub fn one_object(frames: impl IntoIterator<Item = u32>, frame_count: u32) -> SequenceAnnotation {
        let boxes = frames
            .into_iter()
            .map(|f| (f, BBox::new(10.0, 10.0, 110.0, 110.0).unwrap()))
            .collect();
        SequenceAnnotation {
            sequence_id: "s".into(),
            frame_count,
            frame_w: 1000,
            frame_h: 1000,
            objects: vec![TrackedObject { id: 7, category: "car".into(), boxes }],
            expressions: vec![Expression { id: 0, text: "the car".into(), referents: vec![] }],
        }
    }
}
