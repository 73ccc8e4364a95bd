use serde::{Deserialize, Serialize};

use super::{referent_frames, SequenceAnnotation};

/// Fixed-width histogram starting at zero. Values past the last bin are
/// counted in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn new(bin_width: f64, bins: usize) -> Self {
        Histogram { bin_width, counts: vec![0; bins] }
    }

    fn add(&mut self, value: f64) {
        let last = self.counts.len() - 1;
        let idx = ((value / self.bin_width).floor().max(0.0) as usize).min(last);
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Per-expression dataset statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sequences: usize,
    pub expressions_count: usize,
    pub mean_objects_per_expression: f64,
    pub max_objects_per_expression: usize,
    /// Distinct referent objects per expression, bins of 5.
    pub objects_per_expression_histogram: Histogram,
    /// Frames with at least one referent per expression, bins of 100.
    pub frame_length_histogram: Histogram,
    /// Referent-frame ratio per expression, bins of 0.1.
    pub temporal_ratio_histogram: Histogram,
    pub mean_temporal_ratio: f64,
}

/// Statistics over every expression of every sequence. An expression with
/// no referents contributes 0 objects and ratio 0.
pub fn compute_stats(sequences: &[SequenceAnnotation]) -> DatasetStats {
    let mut objects_hist = Histogram::new(5.0, 22);
    let mut length_hist = Histogram::new(100.0, 8);
    let mut ratio_hist = Histogram::new(0.1, 10);
    let (mut n, mut object_sum, mut ratio_sum, mut max_objects) = (0usize, 0usize, 0.0, 0usize);

    for ann in sequences {
        for expr in &ann.expressions {
            let objects = expr.referent_objects().len();
            let frames = referent_frames(ann, expr.id).map(|m| m.len()).unwrap_or(0);
            let ratio = frames as f64 / f64::from(ann.frame_count);
            n += 1;
            object_sum += objects;
            ratio_sum += ratio;
            max_objects = max_objects.max(objects);
            objects_hist.add(objects as f64);
            length_hist.add(frames as f64);
            ratio_hist.add(ratio);
        }
    }
    let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
    DatasetStats {
        sequences: sequences.len(),
        expressions_count: n,
        mean_objects_per_expression: mean(object_sum as f64),
        max_objects_per_expression: max_objects,
        objects_per_expression_histogram: objects_hist,
        frame_length_histogram: length_hist,
        temporal_ratio_histogram: ratio_hist,
        mean_temporal_ratio: mean(ratio_sum),
    }
}
