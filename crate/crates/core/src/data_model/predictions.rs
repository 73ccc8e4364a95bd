use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::DataError;
use crate::geometry::BBox;

use super::write_atomic;

/// Exact first line of every prediction CSV.
pub const PREDICTION_HEADER: &str = "frame,track_id,x1,y1,x2,y2,class_score,ref_score";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BBox,
    pub class_score: f64,
    pub ref_score: f64,
}

/// Tracker output for one (sequence, expression) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub sequence_id: String,
    pub expression_id: u32,
    pub rows: Vec<PredictionRow>,
}

impl PredictionSet {
    pub fn new(sequence_id: impl Into<String>, expression_id: u32) -> Self {
        PredictionSet { sequence_id: sequence_id.into(), expression_id, rows: Vec::new() }
    }

    /// Unique `(frame, track_id)` pairs and scores in `[0, 1]`.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = HashSet::new();
        for r in &self.rows {
            if !seen.insert((r.frame, r.track_id)) {
                return Err(DataError::Validation(format!(
                    "duplicate row for frame {} track_id {}",
                    r.frame, r.track_id
                )));
            }
            for (name, v) in [("class_score", r.class_score), ("ref_score", r.ref_score)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(DataError::Validation(format!(
                        "frame {} track_id {}: {name} {v} not in [0,1]",
                        r.frame, r.track_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Additionally require every frame to lie in `0..frame_count`.
    pub fn validate_frames(&self, frame_count: u32) -> Result<(), DataError> {
        self.validate()?;
        match self.rows.iter().find(|r| r.frame >= frame_count) {
            Some(r) => Err(DataError::Validation(format!(
                "frame {} outside 0..{frame_count}",
                r.frame
            ))),
            None => Ok(()),
        }
    }

    /// Rows whose referring score reaches `threshold`.
    pub fn referent_only(&self, threshold: f64) -> PredictionSet {
        PredictionSet {
            sequence_id: self.sequence_id.clone(),
            expression_id: self.expression_id,
            rows: self.rows.iter().filter(|r| r.ref_score >= threshold).copied().collect(),
        }
    }

    pub fn from_csv_str(
        text: &str,
        sequence_id: &str,
        expression_id: u32,
        origin: &Path,
    ) -> Result<Self, DataError> {
        let parse_err = |line: usize, message: String| DataError::Parse {
            path: origin.to_path_buf(),
            line,
            column: 0,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        match records.next() {
            Some(Ok(h)) if h.iter().collect::<Vec<_>>().join(",") == PREDICTION_HEADER => {}
            Some(Err(e)) => return Err(parse_err(1, e.to_string())),
            _ => return Err(parse_err(1, format!("header must be `{PREDICTION_HEADER}`"))),
        }
        let mut set = PredictionSet::new(sequence_id, expression_id);
        for rec in records {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 8 {
                return Err(parse_err(line, format!("expected 8 fields, got {}", rec.len())));
            }
            let int = |i: usize| {
                rec[i]
                    .parse::<u32>()
                    .map_err(|e| parse_err(line, format!("field {}: {e}", i + 1)))
            };
            let real = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("field {}: {e}", i + 1)))
            };
            let bbox = BBox::new(real(2)?, real(3)?, real(4)?, real(5)?)
                .map_err(|e| parse_err(line, e.to_string()))?;
            set.rows.push(PredictionRow {
                frame: int(0)?,
                track_id: int(1)?,
                bbox,
                class_score: real(6)?,
                ref_score: real(7)?,
            });
        }
        set.validate()?;
        Ok(set)
    }

    /// Canonical CSV: fixed header, LF line endings, rows in stored order,
    /// reals rounded to 6 fractional digits with trailing zeros dropped.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(PREDICTION_HEADER);
        out.push('\n');
        for r in &self.rows {
            let b = r.bbox.to_array();
            let fields = [
                r.frame.to_string(),
                r.track_id.to_string(),
                format_score(b[0]),
                format_score(b[1]),
                format_score(b[2]),
                format_score(b[3]),
                format_score(r.class_score),
                format_score(r.ref_score),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// At most 6 fractional digits, no trailing zeros, `.` separator.
pub fn format_score(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// `<sequence>_<expression>.csv`
pub fn prediction_file_name(sequence_id: &str, expression_id: u32) -> String {
    format!("{sequence_id}_{expression_id}.csv")
}

/// Load a prediction file named by the `<sequence>_<expression>.csv`
/// convention; ids are taken from the file name.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionSet, DataError> {
    let path = path.as_ref();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let (seq, expr) = stem
        .rsplit_once('_')
        .and_then(|(s, e)| e.parse::<u32>().ok().map(|e| (s, e)))
        .filter(|(s, _)| !s.is_empty())
        .ok_or_else(|| {
            DataError::Validation(format!(
                "{} does not follow <sequence>_<expression>.csv",
                path.display()
            ))
        })?;
    load_predictions_as(path, seq, expr)
}

/// Load a prediction file with explicitly given ids.
pub fn load_predictions_as(
    path: impl AsRef<Path>,
    sequence_id: &str,
    expression_id: u32,
) -> Result<PredictionSet, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    PredictionSet::from_csv_str(&text, sequence_id, expression_id, path)
}

pub fn save_predictions(set: &PredictionSet, path: impl AsRef<Path>) -> Result<(), DataError> {
    set.validate()?;
    write_atomic(path.as_ref(), set.to_csv_string().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_ROWS: &str = include_str!("../../tests/fixtures/tiny_0.csv");

    fn parse(s: &str) -> Result<PredictionSet, DataError> {
        PredictionSet::from_csv_str(s, "tiny", 0, Path::new("t.csv"))
    }

    #[test]
    fn header_only_is_empty() {
        let set = parse(&format!("{PREDICTION_HEADER}\n")).unwrap();
        assert!(set.rows.is_empty());
    }

    #[test]
    fn duplicate_row_rejected() {
        let text = format!("{PREDICTION_HEADER}\n0,1,0,0,5,5,0.9,0.8\n0,1,1,1,6,6,0.9,0.8\n");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, DataError::Validation(ref m) if m.contains("duplicate")), "{err}");
    }

    #[test]
    fn golden_rows_round_trip_bit_exactly() {
        let set = parse(FOUR_ROWS).unwrap();
        assert_eq!(set.rows.len(), 4);
        assert_eq!(set.to_csv_string(), FOUR_ROWS);
    }

    #[test]
    fn bad_header_and_fields() {
        assert!(parse("frame,track,x1,y1,x2,y2,class_score,ref_score\n").is_err());
        assert!(parse("").is_err());
        let e = parse(&format!("{PREDICTION_HEADER}\n0,1,0,0,5,5,0.9\n")).unwrap_err();
        assert!(matches!(e, DataError::Parse { line: 2, .. }), "{e:?}");
        assert!(parse(&format!("{PREDICTION_HEADER}\n0,1,5,0,5,5,0.9,0.1\n")).is_err());
        assert!(parse(&format!("{PREDICTION_HEADER}\n0,1,0,0,5,5,1.2,0.1\n")).is_err());
        assert!(parse(&format!("{PREDICTION_HEADER}\n-1,1,0,0,5,5,0.2,0.1\n")).is_err());
    }

    #[test]
    fn frame_bounds() {
        let set = parse(FOUR_ROWS).unwrap();
        assert!(set.validate_frames(3).is_ok());
        assert!(set.validate_frames(2).is_err());
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(10.0), "10");
        assert_eq!(format_score(0.9), "0.9");
        assert_eq!(format_score(1.0 / 3.0), "0.333333");
        assert_eq!(format_score(-0.0000001), "0");
        assert_eq!(format_score(12.5), "12.5");
    }

    #[test]
    fn file_name_convention() {
        let dir = tempfile::tempdir().unwrap();
        let set = parse(FOUR_ROWS).unwrap();
        let p = dir.path().join(prediction_file_name("seq_a", 3));
        save_predictions(&set, &p).unwrap();
        let back = load_predictions(&p).unwrap();
        assert_eq!(back.sequence_id, "seq_a");
        assert_eq!(back.expression_id, 3);
        assert_eq!(back.rows, set.rows);
        assert!(load_predictions(dir.path().join("nounderscore.csv")).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn canonical_csv_is_stable(rows in proptest::collection::vec(
                (0u32..50, 0u32..20, 0.0..500.0f64, 0.0..300.0f64, 1.0..80.0f64, 1.0..80.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
                0..20)) {
                let mut set = PredictionSet::new("s", 0);
                let mut seen = HashSet::new();
                for (f, t, x, y, w, h, c, r) in rows {
                    if seen.insert((f, t)) {
                        set.rows.push(PredictionRow { frame: f, track_id: t,
                            bbox: BBox::from_xywh(x, y, w, h).unwrap(), class_score: c, ref_score: r });
                    }
                }
                let once = set.to_csv_string();
                let reparsed = PredictionSet::from_csv_str(&once, "s", 0, Path::new("p.csv")).unwrap();
                prop_assert_eq!(reparsed.to_csv_string(), once);
            }
        }
    }
}
