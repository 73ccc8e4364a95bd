//! HOTA evaluation against referring ground truth.
//!
//! Ground truth for an expression holds only the referent boxes of each
//! frame, so a prediction on a visible object that does not match the
//! expression at that frame is simply unmatched: a false positive.
//!
//! For every localization threshold `α`:
//!
//! 1. each ground-truth/predicted identity pair gets a potential association
//!    score from the number of frames where their boxes overlap with IoU ≥ α;
//! 2. each frame is matched independently, first maximizing the number of
//!    pairs with IoU ≥ α, then the summed potential score, then (weight 1e-6)
//!    the summed IoU;
//! 3. detection and association sub-metrics follow from the matched pairs.
//!
//! Final metrics are the mean over `α`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_max_score, CostMatrix};
use crate::data_model::{referent_frames, PredictionSet, SequenceAnnotation};
use crate::error::{DataError, EvalError};
use crate::geometry::{iou, BBox};

/// Weight of the IoU tie-break in per-frame matching.
pub const IOU_TIE_WEIGHT: f64 = 1e-6;

/// `0.05, 0.10, ..., 0.95`.
pub fn default_alphas() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub alphas: Vec<f64>,
    /// Every metric of an expression whose ground truth and predictions are
    /// both empty.
    pub zero_zero: f64,
    /// Keep only prediction rows with `ref_score` at or above this value.
    /// `None` takes rows as already filtered.
    pub ref_threshold: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { alphas: default_alphas(), zero_zero: 1.0, ref_threshold: None }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.alphas.is_empty() {
            return Err(EvalError::Config("alpha grid is empty".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(EvalError::Config("alphas must lie in (0,1)".into()));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::Config("alphas must be strictly increasing".into()));
        }
        if !(0.0..=1.0).contains(&self.zero_zero) {
            return Err(EvalError::Config(format!("zero_zero {} not in [0,1]", self.zero_zero)));
        }
        if let Some(t) = self.ref_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(EvalError::Config(format!("ref_threshold {t} not in [0,1]")));
            }
        }
        Ok(())
    }
}

/// Referent boxes of one expression, per frame, keyed by object id.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferentGroundTruth {
    pub sequence_id: String,
    pub expression_id: u32,
    pub frames: Vec<Vec<(u32, BBox)>>,
}

impl ReferentGroundTruth {
    pub fn from_annotation(ann: &SequenceAnnotation, expression_id: u32) -> Result<Self, DataError> {
        let referents = referent_frames(ann, expression_id)?;
        let mut frames = vec![Vec::new(); ann.frame_count as usize];
        for (f, ids) in referents {
            for id in ids {
                let obj = ann.object(id).expect("referent_frames only yields known objects");
                frames[f as usize].push((id, obj.boxes[&f]));
            }
        }
        Ok(ReferentGroundTruth { sequence_id: ann.sequence_id.clone(), expression_id, frames })
    }

    /// All expressions of an annotation.
    pub fn all_from_annotation(ann: &SequenceAnnotation) -> Vec<Self> {
        ann.expressions
            .iter()
            .map(|e| Self::from_annotation(ann, e.id).expect("expression exists"))
            .collect()
    }

    pub fn frame_count(&self) -> u32 {
        self.frames.len() as u32
    }

    /// The ground truth written as a prediction set with unit scores.
    pub fn to_predictions(&self) -> PredictionSet {
        let mut set = PredictionSet::new(self.sequence_id.clone(), self.expression_id);
        for (f, objs) in self.frames.iter().enumerate() {
            for &(id, bbox) in objs {
                set.rows.push(crate::data_model::PredictionRow {
                    frame: f as u32,
                    track_id: id,
                    bbox,
                    class_score: 1.0,
                    ref_score: 1.0,
                });
            }
        }
        set
    }
}

/// The eight reported metrics, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub detre: f64,
    pub detpr: f64,
    pub assre: f64,
    pub asspr: f64,
    pub loca: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 8] = ["HOTA", "DetA", "AssA", "DetRe", "DetPr", "AssRe", "AssPr", "LocA"];

    pub fn uniform(v: f64) -> Self {
        Metrics { hota: v, deta: v, assa: v, detre: v, detpr: v, assre: v, asspr: v, loca: v }
    }

    /// Values in table column order.
    pub fn to_array(&self) -> [f64; 8] {
        [self.hota, self.deta, self.assa, self.detre, self.detpr, self.assre, self.asspr, self.loca]
    }

    fn from_array(a: [f64; 8]) -> Self {
        Metrics {
            hota: a[0],
            deta: a[1],
            assa: a[2],
            detre: a[3],
            detpr: a[4],
            assre: a[5],
            asspr: a[6],
            loca: a[7],
        }
    }

    /// Arithmetic mean; `None` for an empty input.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Metrics>) -> Option<Metrics> {
        let mut sum = [0.0; 8];
        let mut n = 0usize;
        for m in items {
            for (s, v) in sum.iter_mut().zip(m.to_array()) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| Metrics::from_array(sum.map(|s| s / n as f64)))
    }
}

/// Metrics and detection counts at one `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionEval {
    pub sequence_id: String,
    pub expression_id: u32,
    pub metrics: Metrics,
    pub per_alpha: Vec<AlphaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionMetrics {
    pub sequence_id: String,
    pub expression_id: u32,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub per_expression: Vec<ExpressionMetrics>,
}

/// Dense-id view of one side (ground truth or predictions).
struct Side {
    /// Per frame, `(dense id, box)`.
    frames: Vec<Vec<(usize, BBox)>>,
    /// Detections per dense id.
    counts: Vec<u64>,
}

impl Side {
    fn build(frames: impl Iterator<Item = Vec<(u32, BBox)>>) -> Self {
        let mut ids: BTreeMap<u32, usize> = BTreeMap::new();
        let raw: Vec<Vec<(u32, BBox)>> = frames.collect();
        for f in &raw {
            for (id, _) in f {
                let next = ids.len();
                ids.entry(*id).or_insert(next);
            }
        }
        let mut counts = vec![0u64; ids.len()];
        let frames = raw
            .into_iter()
            .map(|f| {
                f.into_iter()
                    .map(|(id, b)| {
                        let d = ids[&id];
                        counts[d] += 1;
                        (d, b)
                    })
                    .collect()
            })
            .collect();
        Side { frames, counts }
    }

    fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Evaluate one expression.
pub fn evaluate_expression(
    gt: &ReferentGroundTruth,
    pred: &PredictionSet,
    cfg: &EvalConfig,
) -> Result<ExpressionEval, EvalError> {
    cfg.validate()?;
    if gt.sequence_id != pred.sequence_id || gt.expression_id != pred.expression_id {
        return Err(EvalError::Mismatch {
            gt_seq: gt.sequence_id.clone(),
            gt_expr: gt.expression_id,
            pred_seq: pred.sequence_id.clone(),
            pred_expr: pred.expression_id,
        });
    }
    let pred = match cfg.ref_threshold {
        Some(t) => pred.referent_only(t),
        None => pred.clone(),
    };
    pred.validate_frames(gt.frame_count())?;

    let mut pred_frames = vec![Vec::new(); gt.frames.len()];
    for r in &pred.rows {
        pred_frames[r.frame as usize].push((r.track_id, r.bbox));
    }
    let g = Side::build(gt.frames.iter().cloned());
    let p = Side::build(pred_frames.into_iter());

    let per_alpha: Vec<AlphaResult> = if g.total() == 0 && p.total() == 0 {
        cfg.alphas
            .iter()
            .map(|&alpha| AlphaResult { alpha, tp: 0, fn_: 0, fp: 0, metrics: Metrics::uniform(cfg.zero_zero) })
            .collect()
    } else {
        let ious: Vec<Vec<Vec<f64>>> = g
            .frames
            .iter()
            .zip(&p.frames)
            .map(|(gf, pf)| gf.iter().map(|(_, a)| pf.iter().map(|(_, b)| iou(a, b)).collect()).collect())
            .collect();
        cfg.alphas.iter().map(|&alpha| evaluate_alpha(&g, &p, &ious, alpha)).collect()
    };

    let metrics = Metrics::mean(per_alpha.iter().map(|a| &a.metrics)).expect("alphas nonempty");
    Ok(ExpressionEval {
        sequence_id: gt.sequence_id.clone(),
        expression_id: gt.expression_id,
        metrics,
        per_alpha,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    num / den.max(1.0)
}

fn evaluate_alpha(g: &Side, p: &Side, ious: &[Vec<Vec<f64>>], alpha: f64) -> AlphaResult {
    let (ng, np) = (g.counts.len(), p.counts.len());

    // Frames where each identity pair overlaps at this threshold.
    let mut overlap = vec![vec![0u64; np]; ng];
    for ((gf, pf), m) in g.frames.iter().zip(&p.frames).zip(ious) {
        for (r, (gi, _)) in gf.iter().enumerate() {
            for (c, (pj, _)) in pf.iter().enumerate() {
                if m[r][c] >= alpha {
                    overlap[*gi][*pj] += 1;
                }
            }
        }
    }
    let potential = |i: usize, j: usize| -> f64 {
        let n = overlap[i][j] as f64;
        let den = (g.counts[i] + p.counts[j]) as f64 - n;
        if den > 0.0 {
            n / den
        } else {
            0.0
        }
    };

    let mut matches = vec![vec![0u64; np]; ng];
    let (mut tp, mut loc_sum) = (0u64, 0.0);
    for ((gf, pf), m) in g.frames.iter().zip(&p.frames).zip(ious) {
        if gf.is_empty() || pf.is_empty() {
            continue;
        }
        // Any single extra match outweighs the largest possible potential
        // plus tie-break total.
        let count_weight = gf.len().min(pf.len()) as f64 + 1.0;
        let scores = CostMatrix::from_fn(gf.len(), pf.len(), |r, c| {
            if m[r][c] >= alpha {
                count_weight + potential(gf[r].0, pf[c].0) + IOU_TIE_WEIGHT * m[r][c]
            } else {
                0.0
            }
        })
        .expect("finite scores");
        for (r, c) in solve_max_score(&scores).pairs {
            if m[r][c] >= alpha {
                tp += 1;
                loc_sum += m[r][c];
                matches[gf[r].0][pf[c].0] += 1;
            }
        }
    }

    let fn_ = g.total() - tp;
    let fp = p.total() - tp;
    let (mut ass_a, mut ass_re, mut ass_pr) = (0.0, 0.0, 0.0);
    for i in 0..ng {
        for j in 0..np {
            let tpa = matches[i][j];
            if tpa == 0 {
                continue;
            }
            let (tpa_f, gi, pj) = (tpa as f64, g.counts[i] as f64, p.counts[j] as f64);
            ass_a += tpa_f * tpa_f / (gi + pj - tpa_f);
            ass_re += tpa_f * tpa_f / gi;
            ass_pr += tpa_f * tpa_f / pj;
        }
    }
    let tp_f = tp as f64;
    let deta = ratio(tp_f, (tp + fn_ + fp) as f64);
    let assa = ratio(ass_a, tp_f);
    let metrics = Metrics {
        hota: (deta * assa).sqrt(),
        deta,
        assa,
        detre: ratio(tp_f, (tp + fn_) as f64),
        detpr: ratio(tp_f, (tp + fp) as f64),
        assre: ratio(ass_re, tp_f),
        asspr: ratio(ass_pr, tp_f),
        loca: if tp == 0 { 1.0 } else { loc_sum / tp_f },
    };
    AlphaResult { alpha, tp, fn_, fp, metrics }
}

/// Evaluate every `(ground truth, predictions)` pair and average the
/// per-expression metrics with equal weight.
pub fn evaluate_dataset(
    pairs: &[(ReferentGroundTruth, PredictionSet)],
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    cfg.validate()?;
    let evals: Vec<ExpressionEval> = pairs
        .par_iter()
        .map(|(gt, pred)| evaluate_expression(gt, pred, cfg))
        .collect::<Result<_, _>>()?;
    Ok(report_from(&evals))
}

pub fn report_from(evals: &[ExpressionEval]) -> EvalReport {
    let per_expression: Vec<ExpressionMetrics> = evals
        .iter()
        .map(|e| ExpressionMetrics {
            sequence_id: e.sequence_id.clone(),
            expression_id: e.expression_id,
            metrics: e.metrics,
        })
        .collect();
    let metrics = Metrics::mean(per_expression.iter().map(|e| &e.metrics)).unwrap_or(Metrics::uniform(0.0));
    EvalReport { metrics, per_expression }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

/// JSON document or a two-line table with values ×100 to two decimals.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => {
            let mut s = String::new();
            for name in Metrics::NAMES {
                let _ = write!(s, "{name:>8}");
            }
            s.push('\n');
            for v in report.metrics.to_array() {
                let _ = write!(s, "{:>8.2}", v * 100.0);
            }
            s.push('\n');
            s
        }
    }
}
