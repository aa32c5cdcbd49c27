//! Self-adaptor location detection from limb boxes.
//!
//! Per frame, hand-to-hand contact is checked first and preempts every other
//! hand code. Otherwise each hand takes the first overlapping target in the
//! order face, contralateral arm, leg, and is free when nothing overlaps.
//! Legs are crossed when any left leg box overlaps any right leg box. Hand
//! events shorter than the minimum duration become free, except
//! hand-to-face which is kept at any length; short crossed-leg runs revert
//! to both-legs-on-ground.

pub mod geometry;

use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

pub use geometry::LimbBox;

use crate::ingest::{FramePose, KeypointSchema, PoseSequence};
use crate::math::{median, round};

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HandCode {
    H2H,
    H2A,
    H2L,
    H2F,
    HF,
}

impl HandCode {
    pub fn as_str(self) -> &'static str {
        match self {
            HandCode::H2H => "H2H",
            HandCode::H2A => "H2A",
            HandCode::H2L => "H2L",
            HandCode::H2F => "H2F",
            HandCode::HF => "HF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [HandCode::H2H, HandCode::H2A, HandCode::H2L, HandCode::H2F, HandCode::HF]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

impl fmt::Display for HandCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LegCode {
    L2G,
    L2L,
}

impl LegCode {
    pub fn as_str(self) -> &'static str {
        match self {
            LegCode::L2G => "L2G",
            LegCode::L2L => "L2L",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "L2G" => Some(LegCode::L2G),
            "L2L" => Some(LegCode::L2L),
            _ => None,
        }
    }
}

impl fmt::Display for LegCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationTimeline {
    pub left: Vec<HandCode>,
    pub right: Vec<HandCode>,
    pub legs: Vec<LegCode>,
}

impl LocationTimeline {
    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }
}

/// Maximal runs of equal values as `(value, start, end_exclusive)`.
pub fn runs<T: Copy + PartialEq>(codes: &[T]) -> Vec<(T, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=codes.len() {
        if i == codes.len() || codes[i] != codes[start] {
            if i > start {
                out.push((codes[start], start, i));
            }
            start = i;
        }
    }
    out
}

/// Full widths of the arm and leg segment boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbWidths {
    pub arm: f64,
    pub leg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbBoxes {
    pub hand_left: LimbBox,
    pub hand_right: LimbBox,
    pub face: LimbBox,
    pub forearm_left: LimbBox,
    pub forearm_right: LimbBox,
    pub upper_arm_left: LimbBox,
    pub upper_arm_right: LimbBox,
    pub upper_leg_left: LimbBox,
    pub upper_leg_right: LimbBox,
    pub lower_leg_left: LimbBox,
    pub lower_leg_right: LimbBox,
}

fn group_box(frame: &FramePose, idx: &[usize]) -> LimbBox {
    LimbBox::bounding(idx.iter().map(|&i| (frame.points[i].x, frame.points[i].y)))
        .expect("schema groups are validated non-empty")
}

fn seg_box(frame: &FramePose, seg: [usize; 2], width: f64) -> LimbBox {
    let a = &frame.points[seg[0]];
    let b = &frame.points[seg[1]];
    LimbBox::segment((a.x, a.y), (b.x, b.y), width)
}

/// Boxes of every tracked body part in one frame.
pub fn limb_boxes(frame: &FramePose, schema: &KeypointSchema, widths: &LimbWidths) -> LimbBoxes {
    LimbBoxes {
        hand_left: group_box(frame, &schema.hand_left),
        hand_right: group_box(frame, &schema.hand_right),
        face: group_box(frame, &schema.face),
        forearm_left: seg_box(frame, schema.forearm_left, widths.arm),
        forearm_right: seg_box(frame, schema.forearm_right, widths.arm),
        upper_arm_left: seg_box(frame, schema.upper_arm_left, widths.arm),
        upper_arm_right: seg_box(frame, schema.upper_arm_right, widths.arm),
        upper_leg_left: seg_box(frame, schema.upper_leg_left, widths.leg),
        upper_leg_right: seg_box(frame, schema.upper_leg_right, widths.leg),
        lower_leg_left: seg_box(frame, schema.lower_leg_left, widths.leg),
        lower_leg_right: seg_box(frame, schema.lower_leg_right, widths.leg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WidthRule {
    /// Multiple of the session-median hand-box diagonal.
    HandDiagonal(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptorOptions {
    pub arm_width: WidthRule,
    pub leg_width: WidthRule,
    /// Minimum event length in frames; `None` scales 100 frames by fps / 26.
    pub min_duration: Option<usize>,
}

impl Default for AdaptorOptions {
    fn default() -> Self {
        Self {
            arm_width: WidthRule::HandDiagonal(0.5),
            leg_width: WidthRule::HandDiagonal(1.0),
            min_duration: None,
        }
    }
}

pub const REFERENCE_MIN_DURATION: usize = 100;
pub const REFERENCE_FPS: f64 = 26.0;

impl AdaptorOptions {
    pub fn min_duration_frames(&self, fps: f64) -> usize {
        self.min_duration
            .unwrap_or_else(|| round(REFERENCE_MIN_DURATION as f64 * fps / REFERENCE_FPS) as usize)
    }

    /// Resolves relative widths against a sequence.
    pub fn widths(&self, seq: &PoseSequence) -> LimbWidths {
        let diag = || {
            let diags: Vec<f64> = seq
                .frames
                .iter()
                .map(|f| {
                    (group_box(f, &seq.schema.hand_left).diagonal()
                        + group_box(f, &seq.schema.hand_right).diagonal())
                        / 2.0
                })
                .collect();
            median(&diags)
        };
        let resolve = |rule: WidthRule| match rule {
            WidthRule::Absolute(w) => w,
            WidthRule::HandDiagonal(k) => k * diag(),
        };
        LimbWidths {
            arm: resolve(self.arm_width),
            leg: resolve(self.leg_width),
        }
    }
}

fn hand_target(hand: &LimbBox, face: &LimbBox, other_arm: [&LimbBox; 2], legs: [&LimbBox; 4]) -> HandCode {
    if hand.overlaps(face) {
        HandCode::H2F
    } else if other_arm.iter().any(|b| hand.overlaps(b)) {
        HandCode::H2A
    } else if legs.iter().any(|b| hand.overlaps(b)) {
        HandCode::H2L
    } else {
        HandCode::HF
    }
}

/// Raw per-frame codes before duration filtering.
pub fn classify_frame(boxes: &LimbBoxes) -> (HandCode, HandCode, LegCode) {
    let legs = [
        &boxes.upper_leg_left,
        &boxes.upper_leg_right,
        &boxes.lower_leg_left,
        &boxes.lower_leg_right,
    ];
    let (left, right) = if boxes.hand_left.overlaps(&boxes.hand_right) {
        (HandCode::H2H, HandCode::H2H)
    } else {
        (
            hand_target(
                &boxes.hand_left,
                &boxes.face,
                [&boxes.forearm_right, &boxes.upper_arm_right],
                legs,
            ),
            hand_target(
                &boxes.hand_right,
                &boxes.face,
                [&boxes.forearm_left, &boxes.upper_arm_left],
                legs,
            ),
        )
    };
    let crossed = [&boxes.upper_leg_left, &boxes.lower_leg_left]
        .iter()
        .any(|l| [&boxes.upper_leg_right, &boxes.lower_leg_right].iter().any(|r| l.overlaps(r)));
    (left, right, if crossed { LegCode::L2L } else { LegCode::L2G })
}

/// Relabels hand event runs shorter than `min_duration` as free. Hand-to-face
/// runs are kept at any length.
pub fn filter_hand_runs(codes: &mut [HandCode], min_duration: usize) {
    for (code, a, b) in runs(codes) {
        if code != HandCode::HF && code != HandCode::H2F && b - a < min_duration {
            for c in &mut codes[a..b] {
                *c = HandCode::HF;
            }
        }
    }
}

pub fn filter_leg_runs(codes: &mut [LegCode], min_duration: usize) {
    for (code, a, b) in runs(codes) {
        if code == LegCode::L2L && b - a < min_duration {
            for c in &mut codes[a..b] {
                *c = LegCode::L2G;
            }
        }
    }
}

/// Per-frame location codes of a preprocessed sequence.
pub fn detect_locations(seq: &PoseSequence, opts: &AdaptorOptions) -> LocationTimeline {
    let widths = opts.widths(seq);
    let n = seq.len();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut legs = Vec::with_capacity(n);
    for frame in &seq.frames {
        let (l, r, g) = classify_frame(&limb_boxes(frame, &seq.schema, &widths));
        left.push(l);
        right.push(r);
        legs.push(g);
    }
    let min = opts.min_duration_frames(seq.fps);
    filter_hand_runs(&mut left, min);
    filter_hand_runs(&mut right, min);
    filter_leg_runs(&mut legs, min);
    LocationTimeline { left, right, legs }
}

/// Frame-level agreement of detected location codes with a reference.
///
/// Contact frames are positives: any hand code other than HF and the L2L leg
/// code. A true positive is a positive frame where both timelines carry the
/// same code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub detected: usize,
    pub reference: usize,
}

impl DetectionScore {
    pub fn compare(detected: &LocationTimeline, reference: &LocationTimeline) -> Self {
        let mut s = Self::default();
        let hands = detected
            .left
            .iter()
            .zip(&reference.left)
            .chain(detected.right.iter().zip(&reference.right));
        for (d, r) in hands {
            s.count(*d != HandCode::HF, *r != HandCode::HF, d == r);
        }
        for (d, r) in detected.legs.iter().zip(&reference.legs) {
            s.count(*d == LegCode::L2L, *r == LegCode::L2L, true);
        }
        s
    }

    fn count(&mut self, d: bool, r: bool, same: bool) {
        self.detected += d as usize;
        self.reference += r as usize;
        self.true_positives += (d && r && same) as usize;
    }

    pub fn merge(&mut self, other: &DetectionScore) {
        self.true_positives += other.true_positives;
        self.detected += other.detected;
        self.reference += other.reference;
    }

    /// 1 when nothing was detected.
    pub fn precision(&self) -> f64 {
        if self.detected == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.detected as f64
        }
    }

    /// 1 when the reference has no contacts.
    pub fn recall(&self) -> f64 {
        if self.reference == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.reference as f64
        }
    }
}
