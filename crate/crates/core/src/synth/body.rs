//! Seated-body geometry in torso units (neck to mid-hip = 1, y down).
//!
//! Keypoints follow the 25-point body layout followed by two 21-point hands.
//! The subject faces the camera, so their right side sits at negative x.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ingest::KeypointSchema;

pub const BODY_POINTS: usize = 25;
pub const HAND_POINTS: usize = 21;
pub const KEYPOINTS: usize = BODY_POINTS + 2 * HAND_POINTS;
pub const LEFT_HAND_OFFSET: usize = BODY_POINTS;
pub const RIGHT_HAND_OFFSET: usize = BODY_POINTS + HAND_POINTS;

pub const NOSE: usize = 0;
pub const NECK: usize = 1;
pub const R_SHOULDER: usize = 2;
pub const R_ELBOW: usize = 3;
pub const R_WRIST: usize = 4;
pub const L_SHOULDER: usize = 5;
pub const L_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;
pub const MID_HIP: usize = 8;
pub const R_HIP: usize = 9;
pub const R_KNEE: usize = 10;
pub const R_ANKLE: usize = 11;
pub const L_HIP: usize = 12;
pub const L_KNEE: usize = 13;
pub const L_ANKLE: usize = 14;
pub const R_EYE: usize = 15;
pub const L_EYE: usize = 16;
pub const R_EAR: usize = 17;
pub const L_EAR: usize = 18;
pub const L_FOOT: [usize; 3] = [19, 20, 21];
pub const R_FOOT: [usize; 3] = [22, 23, 24];

const FACE: [usize; 5] = [NOSE, R_EYE, L_EYE, R_EAR, L_EAR];

/// Schema of the generated 67-point layout.
pub fn schema() -> KeypointSchema {
    KeypointSchema {
        hand_left: (LEFT_HAND_OFFSET..LEFT_HAND_OFFSET + HAND_POINTS).collect(),
        hand_right: (RIGHT_HAND_OFFSET..RIGHT_HAND_OFFSET + HAND_POINTS).collect(),
        face: FACE.to_vec(),
        head: FACE.to_vec(),
        forearm_left: [L_ELBOW, L_WRIST],
        forearm_right: [R_ELBOW, R_WRIST],
        upper_arm_left: [L_SHOULDER, L_ELBOW],
        upper_arm_right: [R_SHOULDER, R_ELBOW],
        upper_leg_left: [L_HIP, L_KNEE],
        upper_leg_right: [R_HIP, R_KNEE],
        lower_leg_left: [L_KNEE, L_ANKLE],
        lower_leg_right: [R_KNEE, R_ANKLE],
        neck: NECK,
        mid_hip: MID_HIP,
        feet: L_FOOT.iter().chain(R_FOOT.iter()).copied().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// +1 on the subject's left (image right).
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    fn shoulder(self) -> usize {
        match self {
            Side::Left => L_SHOULDER,
            Side::Right => R_SHOULDER,
        }
    }

    fn elbow(self) -> usize {
        match self {
            Side::Left => L_ELBOW,
            Side::Right => R_ELBOW,
        }
    }

    fn wrist(self) -> usize {
        match self {
            Side::Left => L_WRIST,
            Side::Right => R_WRIST,
        }
    }

    fn hip(self) -> usize {
        match self {
            Side::Left => L_HIP,
            Side::Right => R_HIP,
        }
    }

    fn knee(self) -> usize {
        match self {
            Side::Left => L_KNEE,
            Side::Right => R_KNEE,
        }
    }

    fn ankle(self) -> usize {
        match self {
            Side::Left => L_ANKLE,
            Side::Right => R_ANKLE,
        }
    }

    fn foot(self) -> [usize; 3] {
        match self {
            Side::Left => L_FOOT,
            Side::Right => R_FOOT,
        }
    }

    fn hand_offset(self) -> usize {
        match self {
            Side::Left => LEFT_HAND_OFFSET,
            Side::Right => RIGHT_HAND_OFFSET,
        }
    }
}

pub type Point = (f64, f64);

/// Hand template relative to the hand center: wrist on top, four joints per
/// finger below it. Box is 0.14 wide and 0.2 tall.
fn hand_template() -> [Point; HAND_POINTS] {
    let mut out = [(0.0, -0.1); HAND_POINTS];
    for finger in 0..5 {
        for joint in 1..=4 {
            out[1 + finger * 4 + (joint - 1)] = ((finger as f64 - 2.0) * 0.035, -0.1 + 0.05 * joint as f64);
        }
    }
    out
}

pub const HAND_REST: Point = (0.65, 1.05);
pub const H2H_CENTER: Point = (0.035, 0.75);
pub const FACE_CENTER: Point = (0.06, -0.36);
/// Fraction along the contralateral forearm, from the elbow, where a
/// hand-to-arm contact lands.
const ARM_GRIP: f64 = 0.4;

/// Mirrors a left-side point to `side`.
pub fn sided(side: Side, p: Point) -> Point {
    (side.sign() * p.0, p.1)
}

/// A body pose under construction.
#[derive(Debug, Clone)]
pub struct Body {
    pub points: Vec<Point>,
}

impl Body {
    /// Upright seated pose with both hands resting beside the thighs.
    pub fn rest() -> Self {
        let mut p = vec![(0.0, 0.0); KEYPOINTS];
        p[NOSE] = (0.0, -0.35);
        p[NECK] = (0.0, 0.0);
        p[L_EYE] = (0.06, -0.42);
        p[R_EYE] = (-0.06, -0.42);
        p[L_EAR] = (0.14, -0.38);
        p[R_EAR] = (-0.14, -0.38);
        p[MID_HIP] = (0.0, 1.0);
        let mut body = Self { points: p };
        for side in [Side::Left, Side::Right] {
            body.points[side.shoulder()] = sided(side, (0.4, 0.05));
            body.points[side.hip()] = sided(side, (0.2, 1.0));
            body.set_leg(side, sided(side, (0.25, 1.35)), sided(side, (0.25, 2.1)));
            body.set_hand(side, sided(side, HAND_REST));
        }
        body
    }

    /// Places knee and ankle; the foot follows the ankle.
    pub fn set_leg(&mut self, side: Side, knee: Point, ankle: Point) {
        self.points[side.knee()] = knee;
        self.points[side.ankle()] = ankle;
        let s = side.sign();
        let [big, small, heel] = side.foot();
        self.points[big] = (ankle.0 - s * 0.03, ankle.1 + 0.12);
        self.points[small] = (ankle.0 + s * 0.06, ankle.1 + 0.1);
        self.points[heel] = (ankle.0, ankle.1 + 0.05);
    }

    /// The knee of `side` swung over the other leg.
    pub fn cross_leg(&mut self, side: Side) {
        self.set_leg(side, sided(side, (-0.1, 1.3)), sided(side, (-0.2, 2.05)));
    }

    pub fn shift_leg(&mut self, side: Side, dx: f64) {
        for i in [side.knee(), side.ankle()].into_iter().chain(side.foot()) {
            self.points[i].0 += dx;
        }
    }

    /// Midpoint of the upper leg of `side`.
    pub fn thigh_center(&self, side: Side) -> Point {
        mid(self.points[side.hip()], self.points[side.knee()])
    }

    /// Contact point on the forearm of `side`.
    pub fn forearm_grip(&self, side: Side) -> Point {
        let e = self.points[side.elbow()];
        let w = self.points[side.wrist()];
        (e.0 + ARM_GRIP * (w.0 - e.0), e.1 + ARM_GRIP * (w.1 - e.1))
    }

    /// Moves the hand so its center is at `center`; wrist and elbow follow.
    pub fn set_hand(&mut self, side: Side, center: Point) {
        let off = side.hand_offset();
        for (i, (dx, dy)) in hand_template().into_iter().enumerate() {
            self.points[off + i] = (center.0 + dx, center.1 + dy);
        }
        let wrist = self.points[off];
        let shoulder = self.points[side.shoulder()];
        self.points[side.wrist()] = wrist;
        self.points[side.elbow()] = (
            (shoulder.0 + wrist.0) / 2.0 + side.sign() * 0.12,
            (shoulder.1 + wrist.1) / 2.0 + 0.05,
        );
    }

    pub fn hand_center(&self, side: Side) -> Point {
        let w = self.points[side.hand_offset()];
        (w.0, w.1 + 0.1)
    }
}

fn mid(a: Point, b: Point) -> Point {
    ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptors::{classify_frame, limb_boxes, HandCode, LegCode, LimbWidths};
    use crate::ingest::{FramePose, Keypoint};

    fn codes(body: &Body) -> (HandCode, HandCode, LegCode) {
        let frame = FramePose {
            t: 0,
            points: body.points.iter().map(|&(x, y)| Keypoint::new(x, y, 1.0)).collect(),
        };
        let diag = libm::sqrt(0.14 * 0.14 + 0.2 * 0.2);
        let widths = LimbWidths {
            arm: 0.5 * diag,
            leg: diag,
        };
        classify_frame(&limb_boxes(&frame, &schema(), &widths))
    }

    #[test]
    fn schema_is_valid() {
        schema().validate(KEYPOINTS).unwrap();
    }

    #[test]
    fn rest_pose_is_free() {
        assert_eq!(codes(&Body::rest()), (HandCode::HF, HandCode::HF, LegCode::L2G));
    }

    #[test]
    fn every_contact_is_seen_by_the_detector() {
        for side in [Side::Left, Side::Right] {
            let pick = |(l, r, _): (HandCode, HandCode, LegCode)| if side == Side::Left { (l, r) } else { (r, l) };

            let mut b = Body::rest();
            b.set_hand(side, b.thigh_center(side));
            assert_eq!(pick(codes(&b)), (HandCode::H2L, HandCode::HF));

            let mut b = Body::rest();
            b.set_hand(side, sided(side, FACE_CENTER));
            assert_eq!(pick(codes(&b)), (HandCode::H2F, HandCode::HF));

            let mut b = Body::rest();
            let grip = b.forearm_grip(side.other());
            b.set_hand(side, grip);
            assert_eq!(pick(codes(&b)), (HandCode::H2A, HandCode::HF));

            let mut b = Body::rest();
            b.cross_leg(side);
            assert_eq!(codes(&b), (HandCode::HF, HandCode::HF, LegCode::L2L));
            b.set_hand(side, b.thigh_center(side));
            assert_eq!(pick(codes(&b)).0, HandCode::H2L);
        }
        let mut b = Body::rest();
        b.set_hand(Side::Left, H2H_CENTER);
        b.set_hand(Side::Right, sided(Side::Right, H2H_CENTER));
        assert_eq!(codes(&b).0, HandCode::H2H);
    }
}
