//! Deterministic synthetic sessions with exact ground truth.
//!
//! A [`Script`] lists contact events per body channel. [`generate`] renders
//! them on a seated stick body in torso units, adds Gaussian jitter, maps to
//! pixels and draws sidecar tracks as cohort-shifted Gaussian noise.

pub mod benchmark;
pub mod body;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adaptors::{HandCode, LegCode, LocationTimeline};
use crate::fidgets::{attach_speaking, FidgetMatrix, PURE_ROWS};
use crate::ingest::{
    speaking_from_intervals, FeatureTrack, FramePose, Keypoint, PoseSequence, SpeakerInterval, SpeakingTrack,
    TrackKind,
};
use crate::linalg::Matrix;
use crate::math::{round, sin};
use crate::motion::{ActionLabel, Category, SLICE_LEN};
use crate::{Error, Result};

pub use benchmark::{benchmark_scripts, BenchmarkParticipant, BENCHMARK_DURATION, BENCHMARK_FPS};
pub use body::Side;
use body::{sided, Body, FACE_CENTER, H2H_CENTER};

/// Positional jitter in torso units.
pub const JITTER: f64 = 0.005;
pub const PARTICIPANT_SPEAKER: &str = "participant";
pub const INTERVIEWER_SPEAKER: &str = "interviewer";
pub const MIN_OSCILLATION_HZ: f64 = 0.5;
pub const MAX_OSCILLATION_HZ: f64 = 2.5;

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    H2H,
    H2A,
    H2L,
    H2F,
    /// Legs crossed.
    L2L,
    /// Legs apart; only meaningful with oscillation.
    L2G,
}

impl EventKind {
    pub fn is_leg(self) -> bool {
        matches!(self, EventKind::L2L | EventKind::L2G)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Still,
    /// Horizontal sinusoid; `amp` in torso units.
    Oscillate { freq: f64, amp: f64 },
}

impl Motion {
    pub fn is_dynamic(self) -> bool {
        matches!(self, Motion::Oscillate { .. })
    }

    /// Displacement `frames` after the event start.
    fn offset(self, frames: usize, fps: f64) -> f64 {
        match self {
            Motion::Still => 0.0,
            Motion::Oscillate { freq, amp } => amp * sin(2.0 * PI * freq * frames as f64 / fps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEvent {
    #[serde(rename = "type")]
    pub kind: EventKind,
    /// Acting hand, or crossing/moving leg. Absent for H2H; legs default to
    /// the left.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    /// Seconds.
    pub start: f64,
    pub end: f64,
    pub motion: Motion,
}

impl ScriptEvent {
    pub fn channels(&self) -> Vec<Channel> {
        match (self.kind, self.side) {
            (EventKind::H2H, _) => vec![Channel::Left, Channel::Right],
            (k, _) if k.is_leg() => vec![Channel::Legs],
            (_, Some(Side::Right)) => vec![Channel::Right],
            _ => vec![Channel::Left],
        }
    }

    /// Half-open frame range.
    pub fn frames(&self, fps: f64) -> (usize, usize) {
        (to_frame(self.start, fps), to_frame(self.end, fps))
    }
}

fn to_frame(seconds: f64, fps: f64) -> usize {
    round(seconds * fps).max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Left,
    Right,
    Legs,
}

/// Probability that a scheduled contact of each kind oscillates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidgetRates {
    pub hand_hand: f64,
    pub hand_arm: f64,
    pub hand_leg: f64,
    pub hand_face: f64,
    pub leg: f64,
}

impl FidgetRates {
    pub fn uniform(hand: f64, leg: f64) -> Self {
        Self {
            hand_hand: hand,
            hand_arm: hand,
            hand_leg: hand,
            hand_face: hand,
            leg,
        }
    }

    pub fn for_kind(&self, kind: EventKind) -> f64 {
        match kind {
            EventKind::H2H => self.hand_hand,
            EventKind::H2A => self.hand_arm,
            EventKind::H2L => self.hand_leg,
            EventKind::H2F => self.hand_face,
            EventKind::L2L | EventKind::L2G => self.leg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortParams {
    pub name: String,
    pub fidget_rates: FidgetRates,
    /// Mean of the sidecar noise along a fixed +/-1 pattern, in standard
    /// deviations.
    pub sidecar_shift: f64,
}

impl Default for CohortParams {
    fn default() -> Self {
        Self {
            name: "neutral".into(),
            fidget_rates: FidgetRates::uniform(0.0, 0.0),
            sidecar_shift: 0.0,
        }
    }
}

/// Pixel mapping of torso units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub scale: f64,
    pub origin: [f64; 2],
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            scale: 200.0,
            origin: [640.0, 180.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub seed: u64,
    pub fps: f64,
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
    #[serde(default)]
    pub cohort: CohortParams,
    /// Participant speaking intervals `[start_s, end_s)`; the interviewer
    /// holds the gaps.
    #[serde(default)]
    pub speaking: Vec<[f64; 2]>,
    #[serde(default)]
    pub camera: Camera,
    /// Per-keypoint probability of a zero-confidence detection.
    #[serde(default)]
    pub dropout: f64,
}

impl Script {
    pub fn frames(&self) -> usize {
        to_frame(self.duration, self.fps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Script(msg));
        if !(self.fps > 5.0 && self.fps.is_finite()) {
            return bad(format!("fps {} must be finite and above 5", self.fps));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} must be positive", self.duration));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.camera.scale > 0.0 && self.camera.scale.is_finite()) || self.camera.origin.iter().any(|v| !v.is_finite()) {
            return bad("camera scale must be positive and origin finite".into());
        }
        if !self.cohort.sidecar_shift.is_finite() {
            return bad("sidecar shift must be finite".into());
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.start >= 0.0 && e.start < e.end && e.end <= self.duration) {
                return bad(format!(
                    "event {i} ({:?}) spans [{}, {}) outside [0, {}] or is empty",
                    e.kind, e.start, e.end, self.duration
                ));
            }
            match (e.kind, e.side) {
                (EventKind::H2H, Some(_)) => return bad(format!("event {i}: H2H takes no side")),
                (k, None) if !k.is_leg() && k != EventKind::H2H => {
                    return bad(format!("event {i}: {k:?} needs a side"));
                }
                _ => {}
            }
            if let Motion::Oscillate { freq, amp } = e.motion {
                if !(MIN_OSCILLATION_HZ..=MAX_OSCILLATION_HZ).contains(&freq) {
                    return bad(format!("event {i}: oscillation {freq} Hz outside [0.5, 2.5]"));
                }
                if !(amp > 0.0 && amp <= 0.1) {
                    return bad(format!("event {i}: amplitude {amp} outside (0, 0.1]"));
                }
            }
            let (a, b) = e.frames(self.fps);
            if a == b {
                return bad(format!("event {i} is shorter than one frame"));
            }
        }
        for channel in [Channel::Left, Channel::Right, Channel::Legs] {
            let mut spans: Vec<(usize, usize, usize)> = self
                .events
                .iter()
                .enumerate()
                .filter(|(_, e)| e.channels().contains(&channel))
                .map(|(i, e)| {
                    let (a, b) = e.frames(self.fps);
                    (a, b, i)
                })
                .collect();
            spans.sort();
            for w in spans.windows(2) {
                if w[1].0 < w[0].1 {
                    return bad(format!(
                        "events {} and {} overlap on the {:?} channel",
                        w[0].2, w[1].2, channel
                    ));
                }
            }
        }
        // a hand gripping an arm needs the other arm placed first
        let grips: Vec<(usize, usize)> = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::H2A)
            .map(|e| e.frames(self.fps))
            .collect();
        for (i, a) in grips.iter().enumerate() {
            if grips[i + 1..].iter().any(|b| a.0 < b.1 && b.0 < a.1) {
                return bad("two hand-to-arm events overlap in time".into());
            }
        }
        for (i, s) in self.speaking.iter().enumerate() {
            if !(s[0] >= 0.0 && s[0] < s[1] && s[1] <= self.duration) {
                return bad(format!("speaking interval {i} [{}, {}) is invalid", s[0], s[1]));
            }
        }
        let mut sp = self.speaking.clone();
        sp.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if sp.windows(2).any(|w| w[1][0] < w[0][1]) {
            return bad("speaking intervals overlap".into());
        }
        Ok(())
    }

    /// Participant intervals plus interviewer turns in the gaps.
    pub fn diarization(&self) -> Vec<SpeakerInterval> {
        let mut sp = self.speaking.clone();
        sp.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for s in sp {
            if s[0] > cursor {
                out.push(SpeakerInterval {
                    start_s: cursor,
                    end_s: s[0],
                    speaker: INTERVIEWER_SPEAKER.to_string(),
                });
            }
            out.push(SpeakerInterval {
                start_s: s[0],
                end_s: s[1],
                speaker: PARTICIPANT_SPEAKER.to_string(),
            });
            cursor = s[1];
        }
        if cursor < self.duration {
            out.push(SpeakerInterval {
                start_s: cursor,
                end_s: self.duration,
                speaker: INTERVIEWER_SPEAKER.to_string(),
            });
        }
        out
    }
}

/// One scripted event in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub kind: EventKind,
    pub side: Option<Side>,
    pub start: usize,
    pub end: usize,
    pub dynamic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub timeline: LocationTimeline,
    pub dynamic_left: Vec<bool>,
    pub dynamic_right: Vec<bool>,
    pub dynamic_legs: Vec<bool>,
    pub events: Vec<TruthEvent>,
}

impl GroundTruth {
    fn flags(&self, category: Category) -> &[bool] {
        match category {
            Category::Both | Category::Left => &self.dynamic_left,
            Category::Right => &self.dynamic_right,
            Category::Leg => &self.dynamic_legs,
        }
    }

    /// Majority truth over a slice window.
    pub fn slice_label(&self, category: Category, start: usize) -> ActionLabel {
        let flags = self.flags(category);
        let end = (start + SLICE_LEN).min(flags.len());
        let moving = flags[start.min(end)..end].iter().filter(|&&d| d).count();
        ActionLabel::from_dynamic(2 * moving > end - start.min(end))
    }

    /// The pure fidget matrix implied by the script.
    pub fn fidgets(&self) -> FidgetMatrix {
        let n = self.timeline.len();
        let mut rows = vec![vec![0u8; n]; PURE_ROWS];
        let side_row = |c: HandCode| match c {
            HandCode::H2L => Some(1),
            HandCode::H2A => Some(3),
            HandCode::H2F => Some(5),
            _ => None,
        };
        for t in 0..n {
            if self.timeline.left[t] == HandCode::H2H {
                rows[0][t] = self.dynamic_left[t] as u8;
            } else {
                if let Some(r) = side_row(self.timeline.left[t]) {
                    rows[r][t] = self.dynamic_left[t] as u8;
                }
                if let Some(r) = side_row(self.timeline.right[t]) {
                    rows[r + 1][t] = self.dynamic_right[t] as u8;
                }
            }
            rows[7][t] = self.dynamic_legs[t] as u8;
        }
        FidgetMatrix { rows }
    }
}

/// Everything `generate` produces for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub pose: PoseSequence,
    /// AUs, Gaze and MFCCs, aligned to video frames.
    pub tracks: Vec<FeatureTrack>,
    pub diarization: Vec<SpeakerInterval>,
    pub speaking: SpeakingTrack,
    pub truth: GroundTruth,
}

impl Session {
    pub fn track(&self, kind: TrackKind) -> &FeatureTrack {
        self.tracks.iter().find(|t| t.kind == kind).expect("generate emits every track kind")
    }

    pub fn fidgets_with_speaking(&self) -> Result<FidgetMatrix> {
        attach_speaking(&self.truth.fidgets(), &self.speaking)
    }
}

fn hand_code(kind: EventKind) -> HandCode {
    match kind {
        EventKind::H2H => HandCode::H2H,
        EventKind::H2A => HandCode::H2A,
        EventKind::H2L => HandCode::H2L,
        _ => HandCode::H2F,
    }
}

/// +1, -1 or 0 per sidecar dimension, fixed across sessions.
fn sidecar_pattern(d: usize) -> f64 {
    match d % 3 {
        0 => 1.0,
        1 => -1.0,
        _ => 0.0,
    }
}

/// Coordinates are rounded to 0.01 px and sidecar values to 1e-4 so written
/// files stay compact and load back bit-exactly.
fn quantize(v: f64, step: f64) -> f64 {
    round(v / step) * step
}

pub fn generate(script: &Script) -> Result<Session> {
    script.validate()?;
    let n = script.frames();
    let fps = script.fps;
    let mut active: [Vec<Option<usize>>; 3] = [vec![None; n], vec![None; n], vec![None; n]];
    let mut events = Vec::with_capacity(script.events.len());
    for (i, e) in script.events.iter().enumerate() {
        let (a, b) = e.frames(fps);
        let b = b.min(n);
        for ch in e.channels() {
            for slot in &mut active[ch as usize][a.min(b)..b] {
                *slot = Some(i);
            }
        }
        events.push(TruthEvent {
            kind: e.kind,
            side: if e.kind.is_leg() { Some(e.side.unwrap_or(Side::Left)) } else { e.side },
            start: a,
            end: b,
            dynamic: e.motion.is_dynamic(),
        });
    }

    let mut truth = GroundTruth {
        timeline: LocationTimeline {
            left: vec![HandCode::HF; n],
            right: vec![HandCode::HF; n],
            legs: vec![LegCode::L2G; n],
        },
        dynamic_left: vec![false; n],
        dynamic_right: vec![false; n],
        dynamic_legs: vec![false; n],
        events,
    };

    let mut jitter = ChaCha8Rng::seed_from_u64(script.seed);
    let mut drops = ChaCha8Rng::seed_from_u64(script.seed);
    drops.set_stream(2);
    let offset = |i: usize, t: usize| {
        let e = &script.events[i];
        e.motion.offset(t - e.frames(fps).0, fps)
    };
    let cam = script.camera;
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let mut body = Body::rest();
        let mut leg_motion = None;
        if let Some(i) = active[2][t] {
            let e = &script.events[i];
            let side = e.side.unwrap_or(Side::Left);
            if e.kind == EventKind::L2L {
                body.cross_leg(side);
                truth.timeline.legs[t] = LegCode::L2L;
            }
            truth.dynamic_legs[t] = e.motion.is_dynamic();
            leg_motion = Some((side, offset(i, t)));
        }
        let mut grips = Vec::new();
        for side in [Side::Left, Side::Right] {
            let ch = side as usize;
            let Some(i) = active[ch][t] else { continue };
            let e = &script.events[i];
            let dx = offset(i, t);
            let center = match e.kind {
                EventKind::H2H => sided(side, H2H_CENTER),
                EventKind::H2L => body.thigh_center(side),
                EventKind::H2F => sided(side, FACE_CENTER),
                _ => {
                    grips.push((side, dx));
                    continue;
                }
            };
            body.set_hand(side, (center.0 + dx, center.1));
        }
        for (side, dx) in grips {
            let g = body.forearm_grip(side.other());
            body.set_hand(side, (g.0 + dx, g.1));
        }
        for (side, codes, flags) in [
            (Side::Left, &mut truth.timeline.left, &mut truth.dynamic_left),
            (Side::Right, &mut truth.timeline.right, &mut truth.dynamic_right),
        ] {
            if let Some(i) = active[side as usize][t] {
                let e = &script.events[i];
                codes[t] = hand_code(e.kind);
                flags[t] = e.motion.is_dynamic();
            }
        }
        if let Some((side, dx)) = leg_motion {
            body.shift_leg(side, dx);
        }

        let points = body
            .points
            .iter()
            .map(|&(x, y)| {
                let jx: f64 = jitter.sample(StandardNormal);
                let jy: f64 = jitter.sample(StandardNormal);
                if script.dropout > 0.0 && drops.random::<f64>() < script.dropout {
                    return Keypoint::new(0.0, 0.0, 0.0);
                }
                Keypoint::new(
                    quantize(cam.origin[0] + cam.scale * (x + JITTER * jx), 0.01),
                    quantize(cam.origin[1] + cam.scale * (y + JITTER * jy), 0.01),
                    1.0,
                )
            })
            .collect();
        frames.push(FramePose { t, points });
    }
    let pose = PoseSequence::new(fps, frames, body::schema())?;

    let mut noise = ChaCha8Rng::seed_from_u64(script.seed);
    noise.set_stream(1);
    let mut tracks = Vec::with_capacity(TrackKind::ALL.len());
    for kind in TrackKind::ALL {
        let mut values = Matrix::zeros(kind.dim(), n);
        for d in 0..kind.dim() {
            let shift = script.cohort.sidecar_shift * sidecar_pattern(d);
            for t in 0..n {
                let z: f64 = noise.sample(StandardNormal);
                values.set(d, t, quantize(shift + z, 1e-4));
            }
        }
        tracks.push(FeatureTrack::new(kind, values)?);
    }

    let diarization = script.diarization();
    let speaking = speaking_from_intervals(&diarization, PARTICIPANT_SPEAKER, fps, n)?;
    Ok(Session {
        pose,
        tracks,
        diarization,
        speaking,
        truth,
    })
}
