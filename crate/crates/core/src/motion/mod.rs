//! Trajectory slices under location events and their DYNAMIC/STATIC labels.

pub mod classifier;
pub mod spectrum;

use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::adaptors::{runs, HandCode, LegCode, LocationTimeline};
use crate::ingest::PoseSequence;
use crate::linalg::Matrix;

pub use classifier::{
    classify_slice, train_action_classifier, ActionClassifier, ActionModelKind, CvReport, FoldScore,
};
pub use spectrum::{band_grid, slice_features, SliceFeatures, BAND_POINTS};

pub const SLICE_LEN: usize = 100;
pub const SLICE_STEP: usize = 50;

/// The four slice families; each gets its own classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Both,
    Left,
    Right,
    Leg,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Both, Category::Left, Category::Right, Category::Leg];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Both => "BOTH",
            Category::Left => "LEFT",
            Category::Right => "RIGHT",
            Category::Leg => "LEG",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Keypoints whose trajectories feed this category's slices.
    pub fn keypoints(self, seq: &PoseSequence) -> Vec<usize> {
        let s = &seq.schema;
        match self {
            Category::Both => {
                let mut v = s.hand_left.clone();
                v.extend(&s.hand_right);
                v
            }
            Category::Left => s.hand_left.clone(),
            Category::Right => s.hand_right.clone(),
            Category::Leg => s.leg_points(),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocationCode {
    Hand(HandCode),
    Leg(LegCode),
}

impl fmt::Display for LocationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocationCode::Hand(c) => c.fmt(f),
            LocationCode::Leg(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActionLabel {
    Dynamic,
    Static,
}

impl ActionLabel {
    pub fn is_dynamic(self) -> bool {
        self == ActionLabel::Dynamic
    }

    pub fn from_dynamic(dynamic: bool) -> Self {
        if dynamic {
            ActionLabel::Dynamic
        } else {
            ActionLabel::Static
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionLabel::Dynamic => "DYNAMIC",
            ActionLabel::Static => "STATIC",
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fixed-length window of keypoint trajectories inside one location run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySlice {
    pub category: Category,
    pub code: LocationCode,
    /// The location run `[start, end)` the slice was cut from.
    pub run: (usize, usize),
    pub start: usize,
    /// Rows `x0, y0, x1, y1, ...`; one column per frame.
    pub trajectories: Matrix,
}

impl TrajectorySlice {
    pub fn end(&self) -> usize {
        self.start + SLICE_LEN
    }
}

/// Window starts `run_start, run_start + 50, ...` that fit inside the run.
pub fn window_starts(run_start: usize, run_end: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = run_start;
    while s + SLICE_LEN <= run_end {
        out.push(s);
        s += SLICE_STEP;
    }
    out
}

fn cut(seq: &PoseSequence, points: &[usize], start: usize) -> Matrix {
    let mut m = Matrix::zeros(2 * points.len(), SLICE_LEN);
    for (i, &p) in points.iter().enumerate() {
        for k in 0..SLICE_LEN {
            let (x, y) = seq.point(start + k, p);
            m.set(2 * i, k, x);
            m.set(2 * i + 1, k, y);
        }
    }
    m
}

/// Cuts every full window under every location run, per category. Hand
/// channels yield `Both` slices for H2H runs and side slices otherwise.
pub fn slice_sessions(seq: &PoseSequence, timeline: &LocationTimeline) -> Vec<TrajectorySlice> {
    let mut out = Vec::new();
    let mut push_runs = |category: Category, runs: Vec<(LocationCode, usize, usize)>| {
        let points = category.keypoints(seq);
        for (code, a, b) in runs {
            for start in window_starts(a, b) {
                out.push(TrajectorySlice {
                    category,
                    code,
                    run: (a, b),
                    start,
                    trajectories: cut(seq, &points, start),
                });
            }
        }
    };

    let both = runs(&timeline.left)
        .into_iter()
        .filter(|r| r.0 == HandCode::H2H)
        .map(|(c, a, b)| (LocationCode::Hand(c), a, b))
        .collect();
    push_runs(Category::Both, both);
    for (category, channel) in [(Category::Left, &timeline.left), (Category::Right, &timeline.right)] {
        let side = runs(channel)
            .into_iter()
            .filter(|r| r.0 != HandCode::H2H)
            .map(|(c, a, b)| (LocationCode::Hand(c), a, b))
            .collect();
        push_runs(category, side);
    }
    let legs = runs(&timeline.legs)
        .into_iter()
        .map(|(c, a, b)| (LocationCode::Leg(c), a, b))
        .collect();
    push_runs(Category::Leg, legs);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{compact_schema, frames_from_coordinates};
    use alloc::vec;

    fn timeline(left: Vec<HandCode>, right: Vec<HandCode>) -> LocationTimeline {
        let n = left.len();
        LocationTimeline {
            left,
            right,
            legs: vec![LegCode::L2G; n],
        }
    }

    fn still(n: usize) -> PoseSequence {
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|p| p as f64).collect()).collect();
        let ys = xs.clone();
        PoseSequence::new(26.0, frames_from_coordinates(&xs, &ys), compact_schema()).unwrap()
    }

    fn count(slices: &[TrajectorySlice], c: Category) -> Vec<usize> {
        slices.iter().filter(|s| s.category == c).map(|s| s.start).collect()
    }

    #[test]
    fn window_arithmetic() {
        assert_eq!(window_starts(0, 100), vec![0]);
        assert_eq!(window_starts(0, 200), vec![0, 50, 100]);
        assert!(window_starts(0, 99).is_empty());
        assert_eq!(window_starts(30, 180), vec![30, 80]);
    }

    #[test]
    fn h2h_run_yields_both_slices_only() {
        let n = 100;
        let slices = slice_sessions(&still(n), &timeline(vec![HandCode::H2H; n], vec![HandCode::H2H; n]));
        assert_eq!(count(&slices, Category::Both), vec![0]);
        assert!(count(&slices, Category::Left).is_empty());
        assert_eq!(count(&slices, Category::Leg), vec![0]);
        let b = slices.iter().find(|s| s.category == Category::Both).unwrap();
        assert_eq!((b.trajectories.rows(), b.trajectories.cols()), (4, SLICE_LEN));
    }

    #[test]
    fn side_runs_sliced_per_code() {
        let mut right = vec![HandCode::HF; 300];
        for c in &mut right[50..250] {
            *c = HandCode::H2L;
        }
        let slices = slice_sessions(&still(300), &timeline(vec![HandCode::HF; 300], right));
        let h2l: Vec<usize> = slices
            .iter()
            .filter(|s| s.code == LocationCode::Hand(HandCode::H2L))
            .map(|s| s.start)
            .collect();
        assert_eq!(h2l, vec![50, 100, 150]);
        // the 50-frame free runs either side cannot fill a window
        assert_eq!(count(&slices, Category::Right).len(), 3);
        assert_eq!(count(&slices, Category::Left), vec![0, 50, 100, 150, 200]);
    }
}
