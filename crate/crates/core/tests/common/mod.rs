//! Independent reference implementations used by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rmot::data_model::{PredictionRow, PredictionSet};
use rmot::fusion::{FusionInput, Matrix};
use rmot::hota::{Metrics, ReferentGroundTruth};
use rmot::BBox;

/// Minimum total cost over all injections of the shorter side into the
/// longer one, by enumeration. Sums are taken in row order.
pub fn brute_min_cost(c: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = c.len();
    let cols = c.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, vec![]);
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transpose { c[j][i] } else { c[i][j] };
    let mut used = vec![false; m];
    let mut pick = Vec::with_capacity(n);
    fn rec(
        i: usize,
        n: usize,
        m: usize,
        at: &dyn Fn(usize, usize) -> f64,
        used: &mut [bool],
        pick: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if i == n {
            let total: f64 = pick.iter().enumerate().map(|(r, &c)| at(r, c)).sum();
            if total < best.0 {
                *best = (total, pick.clone());
            }
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                pick.push(j);
                rec(i + 1, n, m, at, used, pick, best);
                pick.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(0, n, m, &at, &mut used, &mut pick, &mut best);
    let mut pairs: Vec<(usize, usize)> =
        best.1.iter().enumerate().map(|(i, &j)| if transpose { (j, i) } else { (i, j) }).collect();
    pairs.sort();
    // Sum in row order, as the solver does.
    let total = pairs.iter().map(|&(r, col)| c[r][col]).sum();
    (total, pairs)
}

/// `visual + (Q Kᵀ / √d) V` with explicit loops.
pub fn naive_fuse(x: &FusionInput) -> Vec<Vec<f64>> {
    let (hw, l, d) = (x.visual.nrows(), x.linguistic.nrows(), x.visual.ncols());
    let proj = |src: &dyn Fn(usize, usize) -> f64, rows: usize, w: &Matrix| {
        let mut out = vec![vec![0.0; d]; rows];
        for r in 0..rows {
            for o in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    s += src(r, i) * w[(o, i)];
                }
                out[r][o] = s;
            }
        }
        out
    };
    let q = proj(&|r, i| x.visual[(r, i)] + x.pos_visual[(r, i)], hw, &x.w_q);
    let k = proj(&|r, i| x.linguistic[(r, i)] + x.pos_linguistic[(r, i)], l, &x.w_k);
    let v = proj(&|r, i| x.linguistic[(r, i)], l, &x.w_v);
    let scale = (d as f64).sqrt();
    let mut out = vec![vec![0.0; d]; hw];
    for p in 0..hw {
        for w in 0..l {
            let mut a = 0.0;
            for i in 0..d {
                a += q[p][i] * k[w][i];
            }
            a /= scale;
            for c in 0..d {
                out[p][c] += a * v[w][c];
            }
        }
        for c in 0..d {
            out[p][c] += x.visual[(p, c)];
        }
    }
    out
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// One α of the brute-force HOTA oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleAlpha {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub metrics: Metrics,
}

/// HOTA by exhaustive per-frame matching and per-TP definitions.
///
/// Each frame takes the matching of pairs with IoU ≥ α that is
/// lexicographically best on (pair count, Σ potential + 1e-6·Σ IoU).
pub fn brute_hota(gt: &ReferentGroundTruth, pred: &PredictionSet, alphas: &[f64], zero_zero: f64) -> Vec<OracleAlpha> {
    let t = gt.frames.len();
    let mut pf: Vec<Vec<(u32, BBox)>> = vec![Vec::new(); t];
    for r in &pred.rows {
        pf[r.frame as usize].push((r.track_id, r.bbox));
    }
    let mut g_count: HashMap<u32, f64> = HashMap::new();
    let mut p_count: HashMap<u32, f64> = HashMap::new();
    for f in &gt.frames {
        for (id, _) in f {
            *g_count.entry(*id).or_default() += 1.0;
        }
    }
    for f in &pf {
        for (id, _) in f {
            *p_count.entry(*id).or_default() += 1.0;
        }
    }
    let g_total: f64 = g_count.values().sum();
    let p_total: f64 = p_count.values().sum();

    alphas
        .iter()
        .map(|&alpha| {
            if g_total == 0.0 && p_total == 0.0 {
                return OracleAlpha { tp: 0, fn_: 0, fp: 0, metrics: Metrics::uniform(zero_zero) };
            }
            let mut overlap: HashMap<(u32, u32), f64> = HashMap::new();
            for f in 0..t {
                for (gi, gb) in &gt.frames[f] {
                    for (pj, pb) in &pf[f] {
                        if rmot::geometry::iou(gb, pb) >= alpha {
                            *overlap.entry((*gi, *pj)).or_default() += 1.0;
                        }
                    }
                }
            }
            let potential = |gi: u32, pj: u32| {
                let n = overlap.get(&(gi, pj)).copied().unwrap_or(0.0);
                n / (g_count[&gi] + p_count[&pj] - n)
            };

            // (gt id, pred id, iou) per TP
            let mut tps: Vec<(u32, u32, f64)> = Vec::new();
            for f in 0..t {
                let g = &gt.frames[f];
                let p = &pf[f];
                let mut best: (usize, f64, Vec<(usize, usize)>) = (0, f64::NEG_INFINITY, vec![]);
                let mut cur = Vec::new();
                let mut used = vec![false; p.len()];
                enumerate(0, g, p, alpha, &potential, &mut used, &mut cur, &mut best);
                for (r, c) in best.2 {
                    tps.push((g[r].0, p[c].0, rmot::geometry::iou(&g[r].1, &p[c].1)));
                }
            }

            let tp = tps.len() as f64;
            let fn_ = g_total - tp;
            let fp = p_total - tp;
            let mut pair_tp: HashMap<(u32, u32), f64> = HashMap::new();
            for (gi, pj, _) in &tps {
                *pair_tp.entry((*gi, *pj)).or_default() += 1.0;
            }
            let (mut a_sum, mut re_sum, mut pr_sum, mut loc_sum) = (0.0, 0.0, 0.0, 0.0);
            for (gi, pj, s) in &tps {
                let tpa = pair_tp[&(*gi, *pj)];
                let fna = g_count[gi] - tpa;
                let fpa = p_count[pj] - tpa;
                a_sum += tpa / (tpa + fna + fpa);
                re_sum += tpa / (tpa + fna);
                pr_sum += tpa / (tpa + fpa);
                loc_sum += s;
            }
            let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
            let deta = div(tp, tp + fn_ + fp);
            let assa = div(a_sum, tp);
            OracleAlpha {
                tp: tp as u64,
                fn_: fn_ as u64,
                fp: fp as u64,
                metrics: Metrics {
                    hota: (deta * assa).sqrt(),
                    deta,
                    assa,
                    detre: div(tp, tp + fn_),
                    detpr: div(tp, tp + fp),
                    assre: div(re_sum, tp),
                    asspr: div(pr_sum, tp),
                    loca: if tp == 0.0 { 1.0 } else { loc_sum / tp },
                },
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    r: usize,
    g: &[(u32, BBox)],
    p: &[(u32, BBox)],
    alpha: f64,
    potential: &dyn Fn(u32, u32) -> f64,
    used: &mut [bool],
    cur: &mut Vec<(usize, usize)>,
    best: &mut (usize, f64, Vec<(usize, usize)>),
) {
    if r == g.len() {
        let score: f64 = cur
            .iter()
            .map(|&(i, j)| potential(g[i].0, p[j].0) + 1e-6 * rmot::geometry::iou(&g[i].1, &p[j].1))
            .sum();
        if cur.len() > best.0 || (cur.len() == best.0 && score > best.1) {
            *best = (cur.len(), score, cur.clone());
        }
        return;
    }
    enumerate(r + 1, g, p, alpha, potential, used, cur, best);
    for j in 0..p.len() {
        if !used[j] && rmot::geometry::iou(&g[r].1, &p[j].1) >= alpha {
            used[j] = true;
            cur.push((r, j));
            enumerate(r + 1, g, p, alpha, potential, used, cur, best);
            cur.pop();
            used[j] = false;
        }
    }
}

/// Random instance with ≤3 frames, ≤4 ground-truth objects and ≤3 tracks.
/// Predicted boxes are mostly jittered copies of ground truth so IoUs
/// spread over the whole α grid.
pub fn random_micro_instance(rng: &mut impl Rng) -> (ReferentGroundTruth, PredictionSet) {
    let t = rng.random_range(1..=3);
    let n_obj = rng.random_range(0..=4u32);
    let n_trk = rng.random_range(0..=3u32);
    let base: Vec<(f64, f64)> = (0..n_obj).map(|_| (rng.random_range(0.0..60.0), rng.random_range(0.0..60.0))).collect();
    let mut frames = vec![Vec::new(); t];
    for (f, frame) in frames.iter_mut().enumerate() {
        for (id, &(x, y)) in base.iter().enumerate() {
            if rng.random_bool(0.75) {
                let dx = f as f64 * rng.random_range(0.0..4.0);
                frame.push((id as u32, BBox::new(x + dx, y, x + dx + 20.0, y + 20.0).unwrap()));
            }
        }
    }
    let gt = ReferentGroundTruth { sequence_id: "micro".into(), expression_id: 0, frames };
    let mut pred = PredictionSet::new("micro", 0);
    for f in 0..t {
        for trk in 0..n_trk {
            if !rng.random_bool(0.75) {
                continue;
            }
            let bbox = match gt.frames[f].is_empty() || rng.random_bool(0.15) {
                true => {
                    let (x, y) = (rng.random_range(0.0..60.0), rng.random_range(0.0..60.0));
                    BBox::new(x, y, x + rng.random_range(5.0..30.0), y + rng.random_range(5.0..30.0)).unwrap()
                }
                false => {
                    let (_, b) = gt.frames[f][rng.random_range(0..gt.frames[f].len())];
                    let s = rng.random_range(0.0..6.0);
                    let mut j = || rng.random_range(-s..=s);
                    let (x1, y1) = (b.x1() + j(), b.y1() + j());
                    BBox::new(x1, y1, (b.x2() + j()).max(x1 + 1.0), (b.y2() + j()).max(y1 + 1.0)).unwrap()
                }
            };
            pred.rows.push(PredictionRow { frame: f as u32, track_id: trk + 10, bbox, class_score: 1.0, ref_score: 1.0 });
        }
    }
    (gt, pred)
}

pub fn metric_pairs(a: &Metrics, b: &Metrics) -> BTreeMap<&'static str, (f64, f64)> {
    Metrics::NAMES.iter().copied().zip(a.to_array().into_iter().zip(b.to_array())).collect()
}

/// Scorer emitting random scores, with class and referring scores sitting
/// exactly on the default thresholds now and then. Every detect slot gets a
/// fresh key so track slots can be traced back to the slot that spawned them.
pub struct RandomScorer<R: Rng> {
    pub rng: R,
    pub detect_slots: usize,
    pub next_key: u64,
}

impl<R: Rng> RandomScorer<R> {
    fn score_value(&mut self, edge: f64) -> f64 {
        match self.rng.random_range(0..10) {
            0 => edge,
            1 => edge - 1e-9,
            _ => self.rng.random_range(0.0..=1.0),
        }
    }
}

impl<R: Rng> rmot::lifecycle::Scorer for RandomScorer<R> {
    fn score(
        &mut self,
        _frame: u32,
        state: &rmot::lifecycle::TrackerState,
    ) -> Result<rmot::lifecycle::FrameScores, rmot::lifecycle::ScorerError> {
        use rmot::lifecycle::{FrameScores, SlotScore};
        let bbox = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let mut out = FrameScores::default();
        for slot in &state.live_tracks {
            let class_score = self.score_value(0.7);
            let ref_score = self.score_value(0.4);
            out.track.push(SlotScore { class_score, ref_score, bbox, key: slot.key });
        }
        for _ in 0..self.detect_slots {
            // Mostly empty detect slots.
            let class_score = if self.rng.random_bool(0.2) { self.score_value(0.7) } else { 0.1 };
            let ref_score = self.score_value(0.4);
            out.detect.push(SlotScore { class_score, ref_score, bbox, key: self.next_key });
            self.next_key += 1;
        }
        Ok(out)
    }
}
