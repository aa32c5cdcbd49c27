//! Pose sequences, sidecar feature tracks and their preprocessing.
//!
//! Preprocessing runs in three steps: gap filling with a not-a-knot cubic
//! spline across the whole sequence, Savitzky-Golay smoothing (window 11,
//! order 3, mirror-padded ends) and division of every coordinate by the
//! session-median neck to mid-hip distance.

pub mod align;
pub mod savgol;
pub mod spline;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math::{median, sqrt};
use crate::{Error, Result};

pub use align::{resample_nearest, speaking_from_intervals, SpeakerInterval};

/// One 2-D keypoint. Missing coordinates are stored as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: Option<f64>,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self {
            x,
            y,
            confidence: Some(confidence),
        }
    }

    pub fn missing() -> Self {
        Self {
            x: f64::NAN,
            y: f64::NAN,
            confidence: None,
        }
    }

    /// A point is observed when both coordinates are finite and the detector
    /// did not report zero confidence.
    pub fn is_observed(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.confidence != Some(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePose {
    pub t: usize,
    pub points: Vec<Keypoint>,
}

/// Body localizations over which movement statistics are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Localization {
    Overall,
    Hands,
    Head,
    Legs,
}

impl Localization {
    pub const LOCALIZED: [Localization; 3] = [Localization::Hands, Localization::Head, Localization::Legs];

    pub fn abbreviation(self) -> &'static str {
        match self {
            Localization::Overall => "O",
            Localization::Hands => "Hn",
            Localization::Head => "He",
            Localization::Legs => "L",
        }
    }
}

/// Named keypoint index groups. Limb segments are `[proximal, distal]` joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointSchema {
    pub hand_left: Vec<usize>,
    pub hand_right: Vec<usize>,
    pub face: Vec<usize>,
    pub head: Vec<usize>,
    pub forearm_left: [usize; 2],
    pub forearm_right: [usize; 2],
    pub upper_arm_left: [usize; 2],
    pub upper_arm_right: [usize; 2],
    pub upper_leg_left: [usize; 2],
    pub upper_leg_right: [usize; 2],
    pub lower_leg_left: [usize; 2],
    pub lower_leg_right: [usize; 2],
    pub neck: usize,
    pub mid_hip: usize,
    #[serde(default)]
    pub feet: Vec<usize>,
}

impl KeypointSchema {
    /// Checks that every index is below `count` and that semantically
    /// disjoint groups do not share keypoints.
    pub fn validate(&self, count: usize) -> Result<()> {
        let named: [(&str, &[usize]); 5] = [
            ("hand_left", &self.hand_left),
            ("hand_right", &self.hand_right),
            ("face", &self.face),
            ("head", &self.head),
            ("feet", &self.feet),
        ];
        for (name, group) in named {
            if let Some(&bad) = group.iter().find(|&&i| i >= count) {
                return Err(Error::Schema(format!(
                    "group {name} references keypoint {bad} but frames have {count} keypoints"
                )));
            }
        }
        for (name, group) in named.iter().take(4) {
            if group.is_empty() {
                return Err(Error::Schema(format!("group {name} is empty")));
            }
        }
        for (name, seg) in self.segments() {
            if seg.iter().any(|&i| i >= count) {
                return Err(Error::Schema(format!(
                    "segment {name} references a keypoint beyond {count}"
                )));
            }
        }
        if self.neck >= count || self.mid_hip >= count {
            return Err(Error::Schema("torso anchors out of range".into()));
        }
        let left: BTreeSet<usize> = self.hand_left.iter().copied().collect();
        if self.hand_right.iter().any(|i| left.contains(i)) {
            return Err(Error::Schema("hand_left and hand_right overlap".into()));
        }
        Ok(())
    }

    fn segments(&self) -> [(&'static str, [usize; 2]); 8] {
        [
            ("forearm_left", self.forearm_left),
            ("forearm_right", self.forearm_right),
            ("upper_arm_left", self.upper_arm_left),
            ("upper_arm_right", self.upper_arm_right),
            ("upper_leg_left", self.upper_leg_left),
            ("upper_leg_right", self.upper_leg_right),
            ("lower_leg_left", self.lower_leg_left),
            ("lower_leg_right", self.lower_leg_right),
        ]
    }

    /// Leg joints (hips, knees, ankles) plus any feet keypoints, sorted.
    pub fn leg_points(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for seg in [
            self.upper_leg_left,
            self.upper_leg_right,
            self.lower_leg_left,
            self.lower_leg_right,
        ] {
            set.extend(seg);
        }
        set.extend(self.feet.iter().copied());
        set.into_iter().collect()
    }

    /// Keypoint indices of a localization; `count` is needed for `Overall`.
    pub fn localization_points(&self, loc: Localization, count: usize) -> Vec<usize> {
        match loc {
            Localization::Overall => (0..count).collect(),
            Localization::Hands => {
                let mut v: BTreeSet<usize> = self.hand_left.iter().copied().collect();
                v.extend(self.hand_right.iter().copied());
                v.into_iter().collect()
            }
            Localization::Head => {
                let mut v: BTreeSet<usize> = self.head.iter().copied().collect();
                v.extend(self.face.iter().copied());
                v.into_iter().collect()
            }
            Localization::Legs => self.leg_points(),
        }
    }

    /// The group used as a fallback trajectory for a keypoint that is
    /// observed too rarely to interpolate.
    fn fallback_group(&self, point: usize, count: usize) -> Vec<usize> {
        for group in [&self.hand_left, &self.hand_right, &self.face, &self.head] {
            if group.contains(&point) {
                return group.clone();
            }
        }
        let legs = self.leg_points();
        if legs.contains(&point) {
            return legs;
        }
        (0..count).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence {
    pub fps: f64,
    pub frames: Vec<FramePose>,
    pub schema: KeypointSchema,
}

impl PoseSequence {
    pub fn new(fps: f64, frames: Vec<FramePose>, schema: KeypointSchema) -> Result<Self> {
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::invalid("fps must be positive"));
        }
        let count = frames.first().map_or(0, |f| f.points.len());
        for (i, f) in frames.iter().enumerate() {
            if f.points.len() != count {
                return Err(Error::Schema(format!(
                    "frame {i} has {} keypoints, expected {count}",
                    f.points.len()
                )));
            }
            for (p, kp) in f.points.iter().enumerate() {
                if let Some(c) = kp.confidence {
                    if !(0.0..=1.0).contains(&c) {
                        return Err(Error::invalid(format!(
                            "frame {i} keypoint {p}: confidence {c} outside [0, 1]"
                        )));
                    }
                }
                if kp.x.is_infinite() || kp.y.is_infinite() {
                    return Err(Error::NonFinite(format!("frame {i} keypoint {p}")));
                }
            }
        }
        if !frames.is_empty() {
            schema.validate(count)?;
        }
        Ok(Self { fps, frames, schema })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn keypoint_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.points.len())
    }

    #[inline]
    pub fn point(&self, t: usize, p: usize) -> (f64, f64) {
        let kp = &self.frames[t].points[p];
        (kp.x, kp.y)
    }

    pub fn is_complete(&self) -> bool {
        self.frames
            .iter()
            .all(|f| f.points.iter().all(|kp| kp.x.is_finite() && kp.y.is_finite()))
    }

    fn coordinate(&self, p: usize, axis: usize) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| if axis == 0 { f.points[p].x } else { f.points[p].y })
            .collect()
    }

    fn set_coordinate(&mut self, p: usize, axis: usize, values: &[f64]) {
        for (f, v) in self.frames.iter_mut().zip(values) {
            if axis == 0 {
                f.points[p].x = *v;
            } else {
                f.points[p].y = *v;
            }
        }
    }

    /// Per-frame distance between the neck and mid-hip anchors.
    pub fn torso_lengths(&self) -> Vec<f64> {
        let (a, b) = (self.schema.neck, self.schema.mid_hip);
        (0..self.len())
            .map(|t| {
                let (x0, y0) = self.point(t, a);
                let (x1, y1) = self.point(t, b);
                sqrt((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0))
            })
            .collect()
    }
}

/// Sidecar feature groups with their fixed per-frame dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrackKind {
    #[serde(rename = "AUs")]
    Aus,
    Gaze,
    #[serde(rename = "MFCCs")]
    Mfccs,
}

impl TrackKind {
    pub const ALL: [TrackKind; 3] = [TrackKind::Aus, TrackKind::Gaze, TrackKind::Mfccs];

    pub fn dim(self) -> usize {
        match self {
            TrackKind::Aus => 35,
            TrackKind::Gaze => 8,
            TrackKind::Mfccs => 13,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrackKind::Aus => "AUs",
            TrackKind::Gaze => "Gaze",
            TrackKind::Mfccs => "MFCCs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TrackKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A sidecar track aligned to video frames: `values` is `dim x N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrack {
    pub kind: TrackKind,
    pub values: Matrix,
}

impl FeatureTrack {
    pub fn new(kind: TrackKind, values: Matrix) -> Result<Self> {
        if values.rows() != kind.dim() {
            return Err(Error::DimensionMismatch {
                what: "feature track dimension",
                expected: kind.dim(),
                got: values.rows(),
            });
        }
        Ok(Self { kind, values })
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    /// Spline-fills NaN entries of every row. Rows with fewer than four
    /// observed frames fall back to the row mean (zero when nothing is
    /// observed); the number of such rows is returned.
    pub fn fill_gaps(&mut self) -> usize {
        let mut fallbacks = 0;
        for r in 0..self.values.rows() {
            let row = self.values.row_mut(r);
            let observed: Vec<bool> = row.iter().map(|v| v.is_finite()).collect();
            if observed.iter().all(|&o| o) {
                continue;
            }
            if !spline::fill_gaps(row, &observed) {
                fallbacks += 1;
                let seen: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
                let fill = crate::math::mean(&seen);
                for v in row.iter_mut().filter(|v| !v.is_finite()) {
                    *v = fill;
                }
            }
        }
        fallbacks
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakingTrack {
    pub speaking: Vec<bool>,
}

/// Keypoints that were filled from a group centroid because they were
/// observed fewer than four times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapWarning {
    pub keypoint: usize,
    pub observed: usize,
    pub message: String,
}

/// Fills every missing coordinate.
///
/// Interior gaps use a not-a-knot cubic spline through all observed frames of
/// that keypoint; gaps at the sequence ends repeat the nearest observation.
/// Keypoints observed fewer than four times are replaced by the centroid
/// trajectory of their group and reported as warnings.
pub fn interpolate_missing(seq: &PoseSequence) -> Result<(PoseSequence, Vec<GapWarning>)> {
    let mut out = seq.clone();
    let count = seq.keypoint_count();
    let n = seq.len();
    let mut warnings = Vec::new();
    let mut under_observed = Vec::new();

    for p in 0..count {
        let observed: Vec<bool> = seq.frames.iter().map(|f| f.points[p].is_observed()).collect();
        let seen = observed.iter().filter(|&&o| o).count();
        if seen == n {
            continue;
        }
        if seen < spline::MIN_KNOTS {
            under_observed.push((p, seen));
            continue;
        }
        for axis in 0..2 {
            let mut values = seq.coordinate(p, axis);
            spline::fill_gaps(&mut values, &observed);
            out.set_coordinate(p, axis, &values);
        }
        for (f, &o) in out.frames.iter_mut().zip(&observed) {
            if !o {
                f.points[p].confidence = None;
            }
        }
    }

    let poor: BTreeSet<usize> = under_observed.iter().map(|&(p, _)| p).collect();
    for &(p, seen) in &under_observed {
        let mut group: Vec<usize> = seq
            .schema
            .fallback_group(p, count)
            .into_iter()
            .filter(|q| !poor.contains(q))
            .collect();
        if group.is_empty() {
            group = (0..count).filter(|q| !poor.contains(q)).collect();
        }
        if group.is_empty() {
            return Err(Error::invalid(
                "no keypoint is observed often enough to interpolate the sequence",
            ));
        }
        for t in 0..n {
            let (mut sx, mut sy) = (0.0, 0.0);
            for &q in &group {
                sx += out.frames[t].points[q].x;
                sy += out.frames[t].points[q].y;
            }
            let kp = &mut out.frames[t].points[p];
            kp.x = sx / group.len() as f64;
            kp.y = sy / group.len() as f64;
            kp.confidence = None;
        }
        warnings.push(GapWarning {
            keypoint: p,
            observed: seen,
            message: format!(
                "keypoint {p} observed in {seen} frames; filled with the centroid of {} group keypoints",
                group.len()
            ),
        });
    }
    Ok((out, warnings))
}

/// Savitzky-Golay smoothing of every coordinate trajectory.
pub fn smooth(seq: &PoseSequence, window: usize, polyorder: usize) -> Result<PoseSequence> {
    let coeffs = savgol::coefficients(window, polyorder)?;
    if seq.len() < window {
        return Err(Error::SequenceTooShort {
            len: seq.len(),
            window,
        });
    }
    if !seq.is_complete() {
        return Err(Error::invalid("smoothing requires a gap-free sequence"));
    }
    let mut out = seq.clone();
    for p in 0..seq.keypoint_count() {
        for axis in 0..2 {
            let smoothed = savgol::apply(&seq.coordinate(p, axis), &coeffs);
            out.set_coordinate(p, axis, &smoothed);
        }
    }
    Ok(out)
}

/// Divides every coordinate by the session-median torso length and returns
/// the scale used.
pub fn normalize_scale(seq: &PoseSequence) -> Result<(PoseSequence, f64)> {
    let torso = median(&seq.torso_lengths());
    if !(torso > 0.0) || !torso.is_finite() {
        return Err(Error::invalid("median neck to mid-hip distance is zero"));
    }
    let mut out = seq.clone();
    for f in &mut out.frames {
        for kp in &mut f.points {
            kp.x /= torso;
            kp.y /= torso;
        }
    }
    Ok((out, torso))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub window: usize,
    pub polyorder: usize,
    pub normalize: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            window: savgol::DEFAULT_WINDOW,
            polyorder: savgol::DEFAULT_POLYORDER,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub seq: PoseSequence,
    pub warnings: Vec<String>,
    pub torso_length: f64,
}

/// Gap filling, smoothing and scale normalization in sequence. Sequences
/// shorter than the smoothing window skip smoothing with a warning.
pub fn preprocess(seq: &PoseSequence, opts: &PreprocessOptions) -> Result<Preprocessed> {
    let (filled, gaps) = interpolate_missing(seq)?;
    let mut warnings: Vec<String> = gaps.into_iter().map(|w| w.message).collect();
    let smoothed = match smooth(&filled, opts.window, opts.polyorder) {
        Ok(s) => s,
        Err(Error::SequenceTooShort { len, window }) => {
            warnings.push(format!(
                "sequence of {len} frames is shorter than window {window}; smoothing skipped"
            ));
            filled
        }
        Err(e) => return Err(e),
    };
    let (seq, torso_length) = if opts.normalize {
        normalize_scale(&smoothed)?
    } else {
        (smoothed, 1.0)
    };
    Ok(Preprocessed {
        seq,
        warnings,
        torso_length,
    })
}

/// Builds per-frame keypoints from coordinate columns; used by tests and the
/// synthetic generator. `xs[t][p]`, `ys[t][p]`.
pub fn frames_from_coordinates(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Vec<FramePose> {
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(t, (fx, fy))| FramePose {
            t,
            points: fx
                .iter()
                .zip(fy)
                .map(|(&x, &y)| Keypoint::new(x, y, 1.0))
                .collect(),
        })
        .collect()
}

/// A minimal schema over `count >= 8` keypoints, for tests of modules that
/// only need a handful of named groups.
pub fn compact_schema() -> KeypointSchema {
    KeypointSchema {
        hand_left: vec![0],
        hand_right: vec![1],
        face: vec![2],
        head: vec![2],
        forearm_left: [3, 0],
        forearm_right: [4, 1],
        upper_arm_left: [5, 3],
        upper_arm_right: [6, 4],
        upper_leg_left: [7, 7],
        upper_leg_right: [7, 7],
        lower_leg_left: [7, 7],
        lower_leg_right: [7, 7],
        neck: 5,
        mid_hip: 7,
        feet: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_from(values: &[f64]) -> PoseSequence {
        // eight keypoints; keypoint 0 carries the signal, neck/mid-hip fixed
        let frames = values
            .iter()
            .enumerate()
            .map(|(t, &v)| FramePose {
                t,
                points: (0..8)
                    .map(|p| match p {
                        0 => Keypoint::new(v, 2.0 * v, 1.0),
                        5 => Keypoint::new(0.0, 0.0, 1.0),
                        7 => Keypoint::new(0.0, 1.0, 1.0),
                        _ => Keypoint::new(p as f64, 0.5, 1.0),
                    })
                    .collect(),
            })
            .collect();
        PoseSequence::new(26.0, frames, compact_schema()).unwrap()
    }

    #[test]
    fn rejects_inconsistent_keypoint_counts() {
        let mut s = seq_from(&[0.0; 3]);
        s.frames[1].points.pop();
        let err = PoseSequence::new(26.0, s.frames, s.schema).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let mut s = seq_from(&[0.0; 3]);
        s.frames[0].points[0].confidence = Some(1.5);
        assert!(PoseSequence::new(26.0, s.frames, s.schema).is_err());
    }

    #[test]
    fn schema_rejects_shared_hand_points() {
        let mut schema = compact_schema();
        schema.hand_right = vec![0];
        assert!(schema.validate(8).is_err());
        assert!(compact_schema().validate(7).is_err());
    }

    #[test]
    fn fully_observed_is_unchanged() {
        let s = seq_from(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (filled, warnings) = interpolate_missing(&s).unwrap();
        assert_eq!(filled, s);
        assert!(warnings.is_empty());
    }

    #[test]
    fn zero_confidence_counts_as_missing() {
        let vals: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let mut s = seq_from(&vals);
        s.frames[4].points[0].x = 99.0;
        s.frames[4].points[0].confidence = Some(0.0);
        let (filled, _) = interpolate_missing(&s).unwrap();
        assert!((filled.frames[4].points[0].x - 4.0).abs() < 1e-9);
    }

    #[test]
    fn trailing_gap_is_held_constant() {
        let vals: Vec<f64> = (0..10).map(|t| (t * t) as f64).collect();
        let mut s = seq_from(&vals);
        for t in 7..10 {
            s.frames[t].points[0] = Keypoint::missing();
        }
        let (filled, _) = interpolate_missing(&s).unwrap();
        for t in 7..10 {
            assert_eq!(filled.frames[t].points[0].x, 36.0);
            assert_eq!(filled.frames[t].points[0].y, 72.0);
        }
    }

    #[test]
    fn rarely_observed_point_uses_group_centroid() {
        let vals: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let mut s = seq_from(&vals);
        // hand_left is only keypoint 0, so the fallback is the whole body
        for t in 0..8 {
            s.frames[t].points[0] = Keypoint::missing();
        }
        let (filled, warnings) = interpolate_missing(&s).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].keypoint, 0);
        assert!(filled.is_complete());
    }

    #[test]
    fn smoothing_too_short_is_an_error_and_preprocess_skips() {
        let s = seq_from(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(smooth(&s, 11, 3), Err(Error::SequenceTooShort { .. })));
        let p = preprocess(&s, &PreprocessOptions::default()).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn normalization_divides_by_median_torso() {
        let s = seq_from(&[2.0; 12]);
        let mut scaled = s.clone();
        for f in &mut scaled.frames {
            for kp in &mut f.points {
                kp.x *= 3.0;
                kp.y *= 3.0;
            }
        }
        let (a, ta) = normalize_scale(&s).unwrap();
        let (b, tb) = normalize_scale(&scaled).unwrap();
        assert!((ta - 1.0).abs() < 1e-12 && (tb - 3.0).abs() < 1e-12);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (pa, pb) in fa.points.iter().zip(&fb.points) {
                assert!((pa.x - pb.x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn track_gap_fill() {
        let mut m = Matrix::zeros(8, 10);
        for c in 0..10 {
            for r in 0..8 {
                m.set(r, c, c as f64);
            }
        }
        m.set(0, 5, f64::NAN);
        for c in 0..8 {
            m.set(1, c, f64::NAN);
        }
        let mut track = FeatureTrack::new(TrackKind::Gaze, m).unwrap();
        let fallbacks = track.fill_gaps();
        assert_eq!(fallbacks, 1);
        assert!((track.values.get(0, 5) - 5.0).abs() < 1e-9);
        assert_eq!(track.values.get(1, 0), 8.5);
        assert!(FeatureTrack::new(TrackKind::Aus, Matrix::zeros(3, 2)).is_err());
    }
}
