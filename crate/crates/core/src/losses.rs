//! Set-prediction training objective: focal classification/referring terms,
//! L1 + GIoU box term, the one-to-one track loss, the Hungarian-matched
//! detect loss and the per-video total.
//!
//! Boxes are normalized `(cx, cy, w, h)`. The L1 term is taken on that form,
//! GIoU on the corner form.

use crate::assignment::{solve_min_cost, Assignment, CostMatrix};
use crate::error::LossError;
use crate::geometry::{giou, giou_grad, NormBox};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

/// Weight coefficients of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub cls: f64,
    pub l1: f64,
    pub giou: f64,
    pub referring: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { cls: 5.0, l1: 2.0, giou: 2.0, referring: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        FocalParams { alpha: 0.25, gamma: 2.0 }
    }
}

/// Classification cost used when matching detect predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchClassCost {
    /// Positive-class focal term `focal_loss(c, 1)`.
    #[default]
    Focal,
    /// Plain `1 - c`.
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub focal: FocalParams,
    pub match_class_cost: MatchClassCost,
    /// Divide the track loss by `max(1, present tracked objects)` and the
    /// detect loss by `max(1, new-born objects)`. Off gives the bare sums.
    pub normalize: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            weights: LossWeights::default(),
            focal: FocalParams::default(),
            match_class_cost: MatchClassCost::default(),
            normalize: true,
        }
    }
}

/// One prediction slot: class probability, normalized box, referring
/// probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPrediction {
    pub class_prob: f64,
    pub bbox: NormBox,
    pub ref_prob: f64,
}

/// Target for one slot. `bbox` is `Some` iff the object is present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub bbox: Option<NormBox>,
    pub referent: bool,
}

impl GroundTruthObject {
    pub fn present(bbox: NormBox, referent: bool) -> Self {
        GroundTruthObject { bbox: Some(bbox), referent }
    }

    pub fn absent() -> Self {
        GroundTruthObject { bbox: None, referent: false }
    }

    pub fn is_present(&self) -> bool {
        self.bbox.is_some()
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Binary focal loss of probability `p` against `target`.
pub fn focal_loss(p: f64, target: bool, fp: FocalParams) -> f64 {
    let p = clamp_prob(p);
    if target {
        -fp.alpha * (1.0 - p).powf(fp.gamma) * p.ln()
    } else {
        -(1.0 - fp.alpha) * p.powf(fp.gamma) * (1.0 - p).ln()
    }
}

/// `d focal_loss / d p` on the open interval where no clamping applies.
pub fn focal_loss_grad(p: f64, target: bool, fp: FocalParams) -> f64 {
    let p = clamp_prob(p);
    let FocalParams { alpha, gamma } = fp;
    if target {
        alpha * (gamma * (1.0 - p).powf(gamma - 1.0) * p.ln() - (1.0 - p).powf(gamma) / p)
    } else {
        -(1.0 - alpha) * (gamma * p.powf(gamma - 1.0) * (1.0 - p).ln() - p.powf(gamma) / (1.0 - p))
    }
}

/// `lambda_l1 * sum|b - b_hat| + lambda_giou * (1 - giou(b, b_hat))`.
pub fn box_loss(b: &NormBox, b_hat: &NormBox, w: &LossWeights) -> f64 {
    let l1: f64 = b
        .to_array()
        .iter()
        .zip(b_hat.to_array())
        .map(|(x, y)| (x - y).abs())
        .sum();
    w.l1 * l1 + w.giou * (1.0 - giou(&b.to_xyxy(), &b_hat.to_xyxy()))
}

/// Gradient of [`box_loss`] with respect to `b`'s `(cx, cy, w, h)`.
pub fn box_loss_grad(b: &NormBox, b_hat: &NormBox, w: &LossWeights) -> [f64; 4] {
    let g = giou_grad(&b.to_xyxy(), &b_hat.to_xyxy());
    // x1 = cx - w/2, x2 = cx + w/2 (same for y)
    let d_giou = [g[0] + g[2], g[1] + g[3], (g[2] - g[0]) / 2.0, (g[3] - g[1]) / 2.0];
    let (bv, hv) = (b.to_array(), b_hat.to_array());
    let mut out = [0.0; 4];
    for k in 0..4 {
        let sign = (bv[k] - hv[k]).signum() * f64::from(u8::from(bv[k] != hv[k]));
        out[k] = w.l1 * sign - w.giou * d_giou[k];
    }
    out
}

fn check_probs(p: &TrackPrediction) -> Result<(), LossError> {
    for (name, v) in [("class_prob", p.class_prob), ("ref_prob", p.ref_prob)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(LossError::Probability(name, v));
        }
    }
    Ok(())
}

/// Loss of one prediction against its target: class term always, box and
/// referring terms only when the object is present.
fn slot_loss(pred: &TrackPrediction, gt: &GroundTruthObject, cfg: &LossConfig) -> f64 {
    let w = &cfg.weights;
    let mut loss = w.cls * focal_loss(pred.class_prob, gt.is_present(), cfg.focal);
    if let Some(b_hat) = &gt.bbox {
        loss += box_loss(&pred.bbox, b_hat, w);
        loss += w.referring * focal_loss(pred.ref_prob, gt.referent, cfg.focal);
    }
    loss
}

/// One-to-one loss over identity-aligned track slots.
pub fn track_loss(
    preds: &[TrackPrediction],
    gts: &[GroundTruthObject],
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    if preds.len() != gts.len() {
        return Err(LossError::LengthMismatch { preds: preds.len(), gts: gts.len() });
    }
    let mut total = 0.0;
    for (p, g) in preds.iter().zip(gts) {
        check_probs(p)?;
        total += slot_loss(p, g, cfg);
    }
    if cfg.normalize {
        let present = gts.iter().filter(|g| g.is_present()).count();
        total /= present.max(1) as f64;
    }
    Ok(total)
}

/// Cost of pairing a detect prediction with a present ground-truth object.
pub fn match_cost(
    pred: &TrackPrediction,
    gt: &GroundTruthObject,
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    let b_hat = gt.bbox.as_ref().ok_or(LossError::GroundTruthAbsent)?;
    let cls = match cfg.match_class_cost {
        MatchClassCost::Focal => focal_loss(pred.class_prob, true, cfg.focal),
        MatchClassCost::Probability => 1.0 - pred.class_prob,
    };
    Ok(box_loss(&pred.bbox, b_hat, &cfg.weights) + cfg.weights.cls * cls)
}

/// Matching cost matrix, rows = predictions, columns = new-born objects.
pub fn match_cost_matrix(
    preds: &[TrackPrediction],
    newborn: &[GroundTruthObject],
    cfg: &LossConfig,
) -> Result<CostMatrix, LossError> {
    let mut data = Vec::with_capacity(preds.len() * newborn.len());
    for p in preds {
        check_probs(p)?;
        for g in newborn {
            data.push(match_cost(p, g, cfg)?);
        }
    }
    Ok(CostMatrix::new(preds.len(), newborn.len(), data).expect("finite costs"))
}

/// Detect loss over all `N` detect slots.
///
/// Predictions are matched to new-born objects by minimum total
/// [`match_cost`]. Matched slots target class 1 and add box and referring
/// terms; every other slot targets class 0. The returned assignment pairs
/// `(prediction, new-born)` indices.
pub fn detect_loss(
    preds: &[TrackPrediction],
    newborn: &[GroundTruthObject],
    cfg: &LossConfig,
) -> Result<(f64, Assignment), LossError> {
    if newborn.len() > preds.len() {
        return Err(LossError::TooManyGroundTruths { gts: newborn.len(), preds: preds.len() });
    }
    let costs = match_cost_matrix(preds, newborn, cfg)?;
    let assignment = solve_min_cost(&costs);
    let mut total = 0.0;
    for (i, p) in preds.iter().enumerate() {
        let target = match assignment.col_for(i) {
            Some(j) => newborn[j],
            None => GroundTruthObject::absent(),
        };
        total += slot_loss(p, &target, cfg);
    }
    if cfg.normalize {
        total /= newborn.len().max(1) as f64;
    }
    Ok((total, assignment))
}

/// Per-frame track and detect losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLoss {
    pub track: f64,
    pub detect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Total over frames of `track + detect`, summed or averaged.
pub fn final_loss(per_frame: &[FrameLoss], reduction: Reduction) -> Result<f64, LossError> {
    if per_frame.is_empty() {
        return Err(LossError::NoFrames);
    }
    let sum: f64 = per_frame.iter().map(|f| f.track + f.detect).sum();
    Ok(match reduction {
        Reduction::Sum => sum,
        Reduction::Mean => sum / per_frame.len() as f64,
    })
}
