//! Track-query / detect-query bookkeeping for online referring tracking.
//!
//! Each frame is decoded from `N'` track slots (the survivors of the previous
//! frame) plus `N` detect slots. A slot whose class score reaches the class
//! threshold is a true object: track slots keep their identity, detect slots
//! spawn a new one. Survivors become the next frame's track slots, and the
//! referring score of each survivor decides, per frame, whether it is output
//! as a referent. The first frame starts with no track slots.
//!
//! The network that produces the scores sits behind [`Scorer`]; this module
//! only owns the state machine. [`OracleScorer`] replays ground truth and
//! [`iou_associate`] is a tracking-by-detection baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::{solve_max_score, CostMatrix};
use crate::data_model::{referent_frames, PredictionRow, PredictionSet, SequenceAnnotation};
use crate::error::{DataError, TrackError};
use crate::geometry::{iou, BBox};
use crate::synthetic::jitter_box;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Minimum class score for a slot to count as a true object.
    pub class_threshold: f64,
    /// Minimum referring score for a true object to be output as a referent.
    pub ref_threshold: f64,
    /// Number of detect slots `N`.
    pub detect_slots: usize,
    /// Frames a track slot may stay below the class threshold before it is
    /// removed. 0 removes it immediately.
    pub patience: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { class_threshold: 0.7, ref_threshold: 0.4, detect_slots: 300, patience: 0 }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        for (name, v) in [("class_threshold", self.class_threshold), ("ref_threshold", self.ref_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TrackError::Config(format!("{name} {v} not in [0,1]")));
            }
        }
        if self.detect_slots == 0 {
            return Err(TrackError::Config("detect_slots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Detect,
    Track,
}

/// Decoder output for one slot.
///
/// `key` is opaque state handed back to the scorer through the track slot
/// spawned from this output, standing in for the decoder embedding that
/// becomes the next frame's track query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotScore {
    pub class_score: f64,
    pub ref_score: f64,
    pub bbox: BBox,
    pub key: u64,
}

/// Scores for every slot of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameScores {
    /// One entry per live track, in `TrackerState::live_tracks` order.
    pub track: Vec<SlotScore>,
    /// One entry per detect slot.
    pub detect: Vec<SlotScore>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySlot {
    pub kind: SlotKind,
    pub identity: Option<u32>,
    pub class_score: f64,
    pub ref_score: f64,
    pub bbox: BBox,
    pub key: u64,
    /// Consecutive frames spent below the class threshold.
    pub misses: u32,
}

/// One surviving object at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputRow {
    pub frame: u32,
    pub track_id: u32,
    pub class_score: f64,
    pub ref_score: f64,
    pub bbox: BBox,
    pub referent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    /// Frame the next [`TrackerState::step`] processes.
    pub frame_index: u32,
    pub live_tracks: Vec<QuerySlot>,
    pub next_id: u32,
    pub config: TrackerConfig,
}

impl TrackerState {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackError> {
        config.validate()?;
        Ok(TrackerState { frame_index: 0, live_tracks: Vec::new(), next_id: 0, config })
    }

    /// Slots decoded this frame: `N' + N`.
    pub fn slot_count(&self) -> usize {
        self.live_tracks.len() + self.config.detect_slots
    }

    /// Advance one frame.
    pub fn step(&self, scores: &FrameScores) -> Result<(TrackerState, Vec<OutputRow>), TrackError> {
        let cfg = &self.config;
        if scores.track.len() != self.live_tracks.len() || scores.detect.len() != cfg.detect_slots {
            return Err(TrackError::ScoreLength {
                frame: self.frame_index,
                expected_track: self.live_tracks.len(),
                expected_detect: cfg.detect_slots,
                got_track: scores.track.len(),
                got_detect: scores.detect.len(),
            });
        }
        let frame = self.frame_index;
        let mut next = Vec::with_capacity(self.live_tracks.len());
        let mut rows = Vec::new();
        let emit = |slot: &QuerySlot, rows: &mut Vec<OutputRow>| {
            rows.push(OutputRow {
                frame,
                track_id: slot.identity.expect("track slots carry an identity"),
                class_score: slot.class_score,
                ref_score: slot.ref_score,
                bbox: slot.bbox,
                referent: slot.ref_score >= cfg.ref_threshold,
            });
        };

        for (slot, s) in self.live_tracks.iter().zip(&scores.track) {
            if s.class_score >= cfg.class_threshold {
                let kept = QuerySlot {
                    class_score: s.class_score,
                    ref_score: s.ref_score,
                    bbox: s.bbox,
                    key: s.key,
                    misses: 0,
                    ..*slot
                };
                emit(&kept, &mut rows);
                next.push(kept);
            } else if slot.misses < cfg.patience {
                next.push(QuerySlot {
                    class_score: s.class_score,
                    ref_score: s.ref_score,
                    misses: slot.misses + 1,
                    ..*slot
                });
            }
        }

        let mut next_id = self.next_id;
        for s in &scores.detect {
            if s.class_score >= cfg.class_threshold {
                let born = QuerySlot {
                    kind: SlotKind::Track,
                    identity: Some(next_id),
                    class_score: s.class_score,
                    ref_score: s.ref_score,
                    bbox: s.bbox,
                    key: s.key,
                    misses: 0,
                };
                next_id += 1;
                emit(&born, &mut rows);
                next.push(born);
            }
        }

        let state = TrackerState {
            frame_index: frame + 1,
            live_tracks: next,
            next_id,
            config: self.config,
        };
        Ok((state, rows))
    }
}

pub type ScorerError = Box<dyn std::error::Error + Send + Sync>;

/// Per-frame source of slot scores.
pub trait Scorer {
    fn score(&mut self, frame: u32, state: &TrackerState) -> Result<FrameScores, ScorerError>;
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Survivors flagged as referents.
    pub predictions: PredictionSet,
    /// Every survivor, with its referring score.
    pub survivors: PredictionSet,
}

/// Stream [`TrackerState::step`] over `frame_count` frames.
pub fn run(
    sequence_id: &str,
    expression_id: u32,
    frame_count: u32,
    scorer: &mut dyn Scorer,
    config: TrackerConfig,
) -> Result<RunOutput, TrackError> {
    let mut state = TrackerState::new(config)?;
    let mut predictions = PredictionSet::new(sequence_id, expression_id);
    let mut survivors = PredictionSet::new(sequence_id, expression_id);
    for frame in 0..frame_count {
        let scores = scorer
            .score(frame, &state)
            .map_err(|e| TrackError::Scorer { frame, message: e.to_string() })?;
        let (next, rows) = state.step(&scores)?;
        for r in rows {
            let row = PredictionRow {
                frame: r.frame,
                track_id: r.track_id,
                bbox: r.bbox,
                class_score: r.class_score,
                ref_score: r.ref_score,
            };
            if r.referent {
                predictions.rows.push(row);
            }
            survivors.rows.push(row);
        }
        state = next;
    }
    Ok(RunOutput { predictions, survivors })
}

/// Seeded corruption applied by [`OracleScorer`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleNoise {
    /// Standard deviation of per-coordinate Gaussian box jitter, pixels.
    pub box_sigma: f64,
    /// Probability of flipping the referring score of a visible object.
    pub flip_ref: f64,
    pub seed: u64,
}

/// Replays ground truth: every visible object is a true object (`c = 1`)
/// and `r = 1` exactly at its referent frames.
///
/// Visible objects that no live track follows are placed in detect slots in
/// ascending object-id order; the object id travels in the slot key.
pub struct OracleScorer {
    frames: Vec<Vec<(u32, BBox)>>,
    referents: BTreeMap<u32, BTreeSet<u32>>,
    detect_slots: usize,
    frame_w: f64,
    frame_h: f64,
    noise: OracleNoise,
    rng: ChaCha8Rng,
}

const EMPTY_KEY: u64 = u64::MAX;

impl OracleScorer {
    pub fn new(
        ann: &SequenceAnnotation,
        expression_id: u32,
        detect_slots: usize,
    ) -> Result<Self, DataError> {
        Self::with_noise(ann, expression_id, detect_slots, OracleNoise::default())
    }

    pub fn with_noise(
        ann: &SequenceAnnotation,
        expression_id: u32,
        detect_slots: usize,
        noise: OracleNoise,
    ) -> Result<Self, DataError> {
        let referents = referent_frames(ann, expression_id)?;
        let mut frames = vec![Vec::new(); ann.frame_count as usize];
        for obj in &ann.objects {
            for (&f, b) in &obj.boxes {
                frames[f as usize].push((obj.id, *b));
            }
        }
        for f in &mut frames {
            f.sort_by_key(|(id, _)| *id);
        }
        Ok(OracleScorer {
            frames,
            referents,
            detect_slots,
            frame_w: f64::from(ann.frame_w),
            frame_h: f64::from(ann.frame_h),
            noise,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
        })
    }

    fn jitter(&mut self, b: BBox) -> BBox {
        jitter_box(b, self.noise.box_sigma, self.frame_w, self.frame_h, &mut self.rng)
    }

    fn ref_score(&mut self, frame: u32, object_id: u32) -> f64 {
        let mut r = self.referents.get(&frame).is_some_and(|s| s.contains(&object_id));
        if self.noise.flip_ref > 0.0 && self.rng.random_bool(self.noise.flip_ref) {
            r = !r;
        }
        if r {
            1.0
        } else {
            0.0
        }
    }

    fn empty_slot(&self) -> SlotScore {
        SlotScore {
            class_score: 0.0,
            ref_score: 0.0,
            bbox: BBox::new(0.0, 0.0, self.frame_w, self.frame_h).expect("frame box"),
            key: EMPTY_KEY,
        }
    }
}

impl Scorer for OracleScorer {
    fn score(&mut self, frame: u32, state: &TrackerState) -> Result<FrameScores, ScorerError> {
        let visible = self
            .frames
            .get(frame as usize)
            .cloned()
            .ok_or_else(|| format!("frame {frame} beyond the annotation"))?;
        let lookup: BTreeMap<u32, BBox> = visible.iter().copied().collect();
        let mut followed = HashSet::new();
        let mut out = FrameScores::default();

        for slot in &state.live_tracks {
            let object_id = slot.key as u32;
            followed.insert(object_id);
            match lookup.get(&object_id) {
                Some(&b) if slot.key != EMPTY_KEY => {
                    let bbox = self.jitter(b);
                    let ref_score = self.ref_score(frame, object_id);
                    out.track.push(SlotScore { class_score: 1.0, ref_score, bbox, key: slot.key });
                }
                _ => out.track.push(SlotScore {
                    class_score: 0.0,
                    ref_score: 0.0,
                    bbox: slot.bbox,
                    key: slot.key,
                }),
            }
        }
        for (object_id, b) in visible {
            if out.detect.len() == self.detect_slots {
                break;
            }
            if followed.contains(&object_id) {
                continue;
            }
            let bbox = self.jitter(b);
            let ref_score = self.ref_score(frame, object_id);
            out.detect.push(SlotScore { class_score: 1.0, ref_score, bbox, key: u64::from(object_id) });
        }
        let empty = self.empty_slot();
        out.detect.resize(self.detect_slots, empty);
        Ok(out)
    }
}

/// One detector output fed to [`iou_associate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_score: f64,
    pub ref_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouAssociatorConfig {
    /// Minimum IoU between a track's last box and a detection.
    pub iou_threshold: f64,
    /// Frames an unmatched track is kept before it is dropped.
    pub patience: u32,
}

impl Default for IouAssociatorConfig {
    fn default() -> Self {
        IouAssociatorConfig { iou_threshold: 0.3, patience: 0 }
    }
}

/// Frame-to-frame IoU association. Each frame, live tracks and detections
/// are paired by maximum total IoU; pairs below the threshold are rejected,
/// unmatched detections open new ids and unmatched tracks are dropped once
/// they have been missing for more than `patience` frames.
///
/// Every detection appears in the output with its assigned id.
pub fn iou_associate(
    sequence_id: &str,
    expression_id: u32,
    frames: &[Vec<Detection>],
    cfg: IouAssociatorConfig,
) -> PredictionSet {
    struct Live {
        id: u32,
        bbox: BBox,
        misses: u32,
    }
    let mut live: Vec<Live> = Vec::new();
    let mut next_id = 0u32;
    let mut out = PredictionSet::new(sequence_id, expression_id);

    for (frame, dets) in frames.iter().enumerate() {
        let ious = CostMatrix::from_fn(live.len(), dets.len(), |t, d| iou(&live[t].bbox, &dets[d].bbox))
            .expect("IoU is finite");
        let matching = solve_max_score(&ious);
        let mut det_track: Vec<Option<usize>> = vec![None; dets.len()];
        let mut matched_track = vec![false; live.len()];
        for &(t, d) in &matching.pairs {
            let v = ious.get(t, d);
            if v > 0.0 && v >= cfg.iou_threshold {
                det_track[d] = Some(t);
                matched_track[t] = true;
            }
        }

        let mut next: Vec<Live> = Vec::with_capacity(live.len() + dets.len());
        for (t, tr) in live.iter().enumerate() {
            if matched_track[t] {
                let d = det_track.iter().position(|x| *x == Some(t)).expect("matched");
                next.push(Live { id: tr.id, bbox: dets[d].bbox, misses: 0 });
            } else if tr.misses < cfg.patience {
                next.push(Live { id: tr.id, bbox: tr.bbox, misses: tr.misses + 1 });
            }
        }
        for (d, det) in dets.iter().enumerate() {
            let id = match det_track[d] {
                Some(t) => live[t].id,
                None => {
                    let id = next_id;
                    next_id += 1;
                    next.push(Live { id, bbox: det.bbox, misses: 0 });
                    id
                }
            };
            out.rows.push(PredictionRow {
                frame: frame as u32,
                track_id: id,
                bbox: det.bbox,
                class_score: det.class_score,
                ref_score: det.ref_score,
            });
        }
        live = next;
    }
    out
}

/// Ground-truth boxes as detections: `c = 1` for every visible object and
/// `r = 1` at its referent frames.
pub fn gt_detections(
    ann: &SequenceAnnotation,
    expression_id: u32,
) -> Result<Vec<Vec<Detection>>, DataError> {
    let referents = referent_frames(ann, expression_id)?;
    Ok((0..ann.frame_count)
        .map(|f| {
            ann.visible_at(f)
                .map(|(o, b)| Detection {
                    bbox: *b,
                    class_score: 1.0,
                    ref_score: if referents.get(&f).is_some_and(|s| s.contains(&o.id)) { 1.0 } else { 0.0 },
                })
                .collect()
        })
        .collect())
}
