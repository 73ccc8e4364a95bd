//! Two-click referent labeling.
//!
//! An annotator clicks an object's box at the frame where it starts matching
//! an expression and again where it stops. The pair becomes one referent
//! interval; every intermediate frame in which the object has a box follows
//! from its identity, so nothing is labeled frame by frame.
//!
//! Per expression, the intervals of one object are kept canonical: sorted,
//! with overlapping or adjacent intervals merged. The stored list is then a
//! function of the covered frame set alone, which makes propagation
//! idempotent and independent of click order.

use std::collections::BTreeMap;

use crate::data_model::{Expression, Referent, SequenceAnnotation};
use crate::error::AnnotateError;

/// One start/end click pair on an object's box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickPair {
    pub expression_id: u32,
    pub object_id: u32,
    pub start_frame: u32,
    pub end_frame: u32,
}

impl ClickPair {
    /// Check the pair against an annotation.
    pub fn check(&self, ann: &SequenceAnnotation) -> Result<(), AnnotateError> {
        if ann.expression(self.expression_id).is_none() {
            return Err(AnnotateError::UnknownExpression(self.expression_id));
        }
        let obj = ann
            .object(self.object_id)
            .ok_or(AnnotateError::UnknownObject(self.object_id))?;
        if self.start_frame > self.end_frame {
            return Err(AnnotateError::InvalidRange { start: self.start_frame, end: self.end_frame });
        }
        for frame in [self.start_frame, self.end_frame] {
            if !obj.visible_at(frame) {
                return Err(AnnotateError::ClickRejected { object_id: self.object_id, frame });
            }
        }
        Ok(())
    }
}

/// Apply a click pair, merging with existing intervals of the same object.
pub fn propagate(
    ann: &SequenceAnnotation,
    click: &ClickPair,
) -> Result<SequenceAnnotation, AnnotateError> {
    click.check(ann)?;
    let mut out = ann.clone();
    let expr = out
        .expression_mut(click.expression_id)
        .expect("checked above");
    expr.referents.push(Referent {
        object_id: click.object_id,
        start: click.start_frame,
        end: click.end_frame,
    });
    normalize(expr);
    Ok(out)
}

/// Remove one frame from the interval of `object_id` that contains it,
/// truncating or splitting that interval.
pub fn retract(
    ann: &SequenceAnnotation,
    expression_id: u32,
    object_id: u32,
    frame: u32,
) -> Result<SequenceAnnotation, AnnotateError> {
    let mut out = ann.clone();
    let expr = out
        .expression_mut(expression_id)
        .ok_or(AnnotateError::UnknownExpression(expression_id))?;
    let idx = expr
        .referents
        .iter()
        .position(|r| r.object_id == object_id && r.contains(frame))
        .ok_or(AnnotateError::NoInterval { object_id, frame })?;
    let hit = expr.referents.remove(idx);
    if hit.start < frame {
        expr.referents.push(Referent { end: frame - 1, ..hit });
    }
    if frame < hit.end {
        expr.referents.push(Referent { start: frame + 1, ..hit });
    }
    normalize(expr);
    Ok(out)
}

/// Add a new expression with no referents. The fresh id is one past the
/// largest existing id, or 0.
pub fn create_expression(
    ann: &SequenceAnnotation,
    text: &str,
) -> Result<(SequenceAnnotation, u32), AnnotateError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(AnnotateError::EmptyText);
    }
    let id = ann.expressions.iter().map(|e| e.id + 1).max().unwrap_or(0);
    let mut out = ann.clone();
    out.expressions.push(Expression { id, text: text.to_string(), referents: Vec::new() });
    Ok((out, id))
}

/// Intervals of one expression, grouped by object.
pub fn intervals_by_object(expr: &Expression) -> BTreeMap<u32, Vec<(u32, u32)>> {
    let mut map: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for r in &expr.referents {
        map.entry(r.object_id).or_default().push((r.start, r.end));
    }
    map
}

fn normalize(expr: &mut Expression) {
    let mut rs = std::mem::take(&mut expr.referents);
    rs.sort();
    let mut merged: Vec<Referent> = Vec::with_capacity(rs.len());
    for r in rs {
        match merged.last_mut() {
            Some(last) if last.object_id == r.object_id && r.start <= last.end.saturating_add(1) => {
                last.end = last.end.max(r.end);
            }
            _ => merged.push(r),
        }
    }
    expr.referents = merged;
}
