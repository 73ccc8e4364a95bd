//! Axis-aligned boxes, coordinate conversions and overlap measures.
//!
//! Everything here is continuous geometry: edges are real-valued and no
//! pixel discretization happens anywhere.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Axis-aligned box in pixel coordinates, origin top-left.
///
/// Construction rejects degenerate boxes, so every `BBox` has positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x1 >= x2 || y1 >= y2 {
            return Err(GeometryError::Degenerate([x1, y1, x2, y2]));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    /// Box from top-left corner plus width/height.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        BBox::new(x, y, x + w, y + h)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Shift by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Scale about the origin by a positive factor.
    pub fn scaled(&self, k: f64) -> Result<BBox, GeometryError> {
        BBox::new(self.x1 * k, self.y1 * k, self.x2 * k, self.y2 * k)
    }

    /// True when the box lies inside `[0, w] x [0, h]`.
    pub fn inside_frame(&self, frame_w: f64, frame_h: f64) -> bool {
        self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= frame_w && self.y2 <= frame_h
    }

    /// Point-in-box test, edges inclusive.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        iw * ih
    }

    /// Area of the smallest box enclosing both.
    pub fn hull_area(&self, other: &BBox) -> f64 {
        let cw = self.x2.max(other.x2) - self.x1.min(other.x1);
        let ch = self.y2.max(other.y2) - self.y1.min(other.y1);
        cw * ch
    }

    /// Convert to normalized center/size form relative to the frame.
    pub fn to_norm(&self, frame_w: f64, frame_h: f64) -> Result<NormBox, GeometryError> {
        if !(frame_w > 0.0 && frame_h > 0.0) {
            return Err(GeometryError::BadFrame(frame_w, frame_h));
        }
        if !self.inside_frame(frame_w, frame_h) {
            return Err(GeometryError::OutOfRange(format!(
                "box {:?} outside {frame_w}x{frame_h} frame",
                self.to_array()
            )));
        }
        let (cx, cy) = self.center();
        NormBox::new(
            cx / frame_w,
            cy / frame_h,
            self.width() / frame_w,
            self.height() / frame_h,
        )
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// Box in normalized `(cx, cy, w, h)` form, every field in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(cx) && in_unit(cy) && in_unit(w) && in_unit(h)) {
            return Err(GeometryError::OutOfRange(format!(
                "normalized box ({cx}, {cy}, {w}, {h}) not in [0,1]"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::Degenerate([cx, cy, w, h]));
        }
        Ok(NormBox { cx, cy, w, h })
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    /// Corner form in unit coordinates (not necessarily clipped to the frame).
    pub fn to_xyxy(&self) -> BBox {
        BBox {
            x1: self.cx - self.w / 2.0,
            y1: self.cy - self.h / 2.0,
            x2: self.cx + self.w / 2.0,
            y2: self.cy + self.h / 2.0,
        }
    }

    /// Pixel box for a `frame_w x frame_h` frame.
    pub fn from_norm(&self, frame_w: f64, frame_h: f64) -> Result<BBox, GeometryError> {
        if !(frame_w > 0.0 && frame_h > 0.0) {
            return Err(GeometryError::BadFrame(frame_w, frame_h));
        }
        let (cx, cy) = (self.cx * frame_w, self.cy * frame_h);
        let (hw, hh) = (self.w * frame_w / 2.0, self.h * frame_h / 2.0);
        BBox::new(cx - hw, cy - hh, cx + hw, cy + hh)
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Generalized IoU: IoU minus the fraction of the enclosing box not covered
/// by the union. Lies in `(-1, 1]`.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let hull = a.hull_area(b);
    inter / union - (hull - union) / hull
}

/// Partial derivatives of `giou(a, b)` with respect to `a`'s corners
/// `[x1, y1, x2, y2]`, `b` held fixed. Undefined on the measure-zero set
/// where two edges coincide; the one-sided choice here takes `b`'s edge.
pub fn giou_grad(a: &BBox, b: &BBox) -> [f64; 4] {
    let iw_raw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih_raw = a.y2.min(b.y2) - a.y1.max(b.y1);
    let (iw, ih) = (iw_raw.max(0.0), ih_raw.max(0.0));
    let inter = iw * ih;
    let (aw, ah) = (a.width(), a.height());
    let union = aw * ah + b.area() - inter;
    let cw = a.x2.max(b.x2) - a.x1.min(b.x1);
    let ch = a.y2.max(b.y2) - a.y1.min(b.y1);
    let hull = cw * ch;

    let overlapping = iw_raw > 0.0 && ih_raw > 0.0;
    // d(iw)/d(corner), d(ih)/d(corner)
    let d_iw = [
        if overlapping && a.x1 > b.x1 { -1.0 } else { 0.0 },
        0.0,
        if overlapping && a.x2 < b.x2 { 1.0 } else { 0.0 },
        0.0,
    ];
    let d_ih = [
        0.0,
        if overlapping && a.y1 > b.y1 { -1.0 } else { 0.0 },
        0.0,
        if overlapping && a.y2 < b.y2 { 1.0 } else { 0.0 },
    ];
    let d_area = [-ah, -aw, ah, aw];
    let d_cw = [if a.x1 < b.x1 { -1.0 } else { 0.0 }, 0.0, if a.x2 > b.x2 { 1.0 } else { 0.0 }, 0.0];
    let d_ch = [0.0, if a.y1 < b.y1 { -1.0 } else { 0.0 }, 0.0, if a.y2 > b.y2 { 1.0 } else { 0.0 }];

    let mut g = [0.0; 4];
    for k in 0..4 {
        let d_inter = d_iw[k] * ih + iw * d_ih[k];
        let d_union = d_area[k] - d_inter;
        let d_hull = d_cw[k] * ch + cw * d_ch[k];
        // giou = I/U - 1 + U/C
        g[k] = d_inter / union - inter * d_union / (union * union) + d_union / hull
            - union * d_hull / (hull * hull);
    }
    g
}
