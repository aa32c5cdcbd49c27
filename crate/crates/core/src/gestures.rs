//! Generic statistical body-gesture features.
//!
//! Per-frame movement of a localization is the mean L2 displacement of its
//! keypoints between consecutive frames. Movement is averaged over
//! non-overlapping windows of `l` frames and a gesture is the span from the
//! first supra-threshold window to just before `n` consecutive
//! sub-threshold windows.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ingest::{Localization, PoseSequence};
use crate::math::{percentile, sqrt, std_dev};
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_END_RUN: usize = 3;
pub const DEFAULT_PERCENTILE: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementSeries {
    pub localization: Localization,
    /// `values[t]` is the movement between frames `t` and `t + 1`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureInterval {
    pub start_window: usize,
    /// Inclusive.
    pub end_window: usize,
    pub localization: Localization,
}

impl GestureInterval {
    pub fn windows(&self) -> usize {
        self.end_window - self.start_window + 1
    }

    /// Movement-entry range `[start, end)` covered by the gesture.
    pub fn frame_range(&self, window: usize) -> (usize, usize) {
        (self.start_window * window, (self.end_window + 1) * window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// Percentile of the window averages of the session and localization.
    Percentile(f64),
    Absolute(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Percentile(DEFAULT_PERCENTILE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureOptions {
    pub window: usize,
    pub end_run: usize,
    pub threshold: Threshold,
}

impl Default for GestureOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            end_run: DEFAULT_END_RUN,
            threshold: Threshold::default(),
        }
    }
}

/// Mean per-frame displacement of the localization's keypoints.
pub fn frame_movement(seq: &PoseSequence, localization: Localization) -> Result<MovementSeries> {
    let points = seq
        .schema
        .localization_points(localization, seq.keypoint_count());
    if points.is_empty() {
        return Err(Error::invalid("localization has no keypoints"));
    }
    let values = (1..seq.len())
        .map(|t| {
            points
                .iter()
                .map(|&p| {
                    let (x0, y0) = seq.point(t - 1, p);
                    let (x1, y1) = seq.point(t, p);
                    sqrt((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0))
                })
                .sum::<f64>()
                / points.len() as f64
        })
        .collect();
    Ok(MovementSeries {
        localization,
        values,
    })
}

/// Non-overlapping window means; a trailing partial window is dropped.
pub fn window_movement(movement: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window length must be positive");
    movement
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect()
}

/// Runs the gesture state machine over window averages.
pub fn detect_gestures(
    windows: &[f64],
    threshold: f64,
    end_run: usize,
    localization: Localization,
) -> Vec<GestureInterval> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut last_active = 0usize;
    let mut quiet = 0usize;
    for (i, &w) in windows.iter().enumerate() {
        let active = w > threshold;
        match open {
            None if active => {
                open = Some(i);
                last_active = i;
                quiet = 0;
            }
            None => {}
            Some(start) => {
                if active {
                    last_active = i;
                    quiet = 0;
                } else {
                    quiet += 1;
                    if quiet >= end_run {
                        out.push(GestureInterval {
                            start_window: start,
                            end_window: last_active,
                            localization,
                        });
                        open = None;
                    }
                }
            }
        }
    }
    if let Some(start) = open {
        out.push(GestureInterval {
            start_window: start,
            end_window: last_active,
            localization,
        });
    }
    out
}

/// Average gesture surprise: gesture-free fraction divided by gesture count,
/// or 1.0 when no gesture occurred.
pub fn gesture_surprise(free_fraction: f64, gestures: usize) -> f64 {
    if gestures == 0 {
        1.0
    } else {
        free_fraction / gestures as f64
    }
}

/// Feature names in descriptor order.
pub const FEATURE_NAMES: [&str; 20] = [
    "O-FM", "O-GM", "O-GS", "O-GD", "O-GN", "Hn-GL", "Hn-GA", "Hn-GT", "Hn-GS", "Hn-GN", "He-GL", "He-GA",
    "He-GT", "He-GS", "He-GN", "L-GL", "L-GA", "L-GT", "L-GS", "L-GN",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalizedFeatures {
    /// Average gesture length, as a fraction of the session.
    pub length: f64,
    /// Average per-frame movement within gestures.
    pub average: f64,
    /// Total movement within gestures, per session frame.
    pub total: f64,
    pub surprise: f64,
    /// Gesture count per session frame.
    pub count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureFeatureVector {
    pub frame_movement: f64,
    pub gesture_movement_share: f64,
    pub surprise: f64,
    pub movement_std: f64,
    pub count: f64,
    pub hands: LocalizedFeatures,
    pub head: LocalizedFeatures,
    pub legs: LocalizedFeatures,
}

impl GestureFeatureVector {
    pub fn to_array(&self) -> [f64; 20] {
        let mut out = [0.0; 20];
        out[..5].copy_from_slice(&[
            self.frame_movement,
            self.gesture_movement_share,
            self.surprise,
            self.movement_std,
            self.count,
        ]);
        for (i, l) in [self.hands, self.head, self.legs].iter().enumerate() {
            out[5 + 5 * i..10 + 5 * i].copy_from_slice(&[l.length, l.average, l.total, l.surprise, l.count]);
        }
        out
    }
}

/// Everything the descriptor is computed from, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureAnalysis {
    pub features: GestureFeatureVector,
    pub gestures: Vec<GestureInterval>,
    pub thresholds: [f64; 3],
}

/// Computes the 20-value descriptor of a preprocessed sequence.
///
/// Frame counts are the number of movement entries (`N - 1`). Sum-type
/// features are divided by that count, per-gesture averages by the gesture
/// count.
pub fn body_gesture_features(seq: &PoseSequence, opts: &GestureOptions) -> Result<GestureAnalysis> {
    if seq.len() < 2 {
        return Err(Error::invalid("gesture features need at least two frames"));
    }
    let overall = frame_movement(seq, Localization::Overall)?;
    let frames = overall.values.len();
    let total_overall: f64 = overall.values.iter().sum();

    let mut in_any = vec![false; frames];
    let mut all_gestures = Vec::new();
    let mut std_sum = 0.0;
    let mut localized = [LocalizedFeatures::default(); 3];
    let mut thresholds = [0.0; 3];

    for (slot, loc) in Localization::LOCALIZED.into_iter().enumerate() {
        let movement = frame_movement(seq, loc)?;
        let windows = window_movement(&movement.values, opts.window);
        let threshold = match opts.threshold {
            Threshold::Percentile(q) => percentile(&windows, q),
            Threshold::Absolute(v) => v,
        };
        thresholds[slot] = threshold;
        let gestures = detect_gestures(&windows, threshold, opts.end_run, loc);

        let mut covered = vec![false; frames];
        let (mut length, mut average, mut total) = (0.0, 0.0, 0.0);
        for g in &gestures {
            let (a, b) = g.frame_range(opts.window);
            let span = &movement.values[a..b];
            length += span.len() as f64;
            total += span.iter().sum::<f64>();
            average += span.iter().sum::<f64>() / span.len() as f64;
            std_sum += std_dev(span);
            for c in &mut covered[a..b] {
                *c = true;
            }
        }
        let free = covered.iter().filter(|&&c| !c).count() as f64 / frames as f64;
        let count = gestures.len();
        localized[slot] = if count == 0 {
            LocalizedFeatures {
                surprise: 1.0,
                ..LocalizedFeatures::default()
            }
        } else {
            LocalizedFeatures {
                length: length / frames as f64 / count as f64,
                average: average / count as f64,
                total: total / frames as f64,
                surprise: gesture_surprise(free, count),
                count: count as f64 / frames as f64,
            }
        };
        for (any, c) in in_any.iter_mut().zip(&covered) {
            *any |= *c;
        }
        all_gestures.extend(gestures);
    }

    let gesture_count = all_gestures.len();
    let in_gesture: f64 = overall
        .values
        .iter()
        .zip(&in_any)
        .filter(|(_, &g)| g)
        .map(|(v, _)| v)
        .sum();
    let free = in_any.iter().filter(|&&g| !g).count() as f64 / frames as f64;

    let features = GestureFeatureVector {
        frame_movement: total_overall / frames as f64,
        gesture_movement_share: if total_overall > 0.0 {
            in_gesture / total_overall
        } else {
            0.0
        },
        surprise: gesture_surprise(free, gesture_count),
        movement_std: if gesture_count == 0 {
            0.0
        } else {
            std_sum / gesture_count as f64
        },
        count: localized.iter().map(|l| l.count).sum(),
        hands: localized[0],
        head: localized[1],
        legs: localized[2],
    };
    Ok(GestureAnalysis {
        features,
        gestures: all_gestures,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{compact_schema, FramePose, Keypoint};

    fn moving_seq(step: (f64, f64), n: usize) -> PoseSequence {
        let frames = (0..n)
            .map(|t| FramePose {
                t,
                points: (0..8)
                    .map(|p| {
                        if p == 0 {
                            Keypoint::new(step.0 * t as f64, step.1 * t as f64, 1.0)
                        } else if p == 1 {
                            Keypoint::new(3.0 * t as f64, 0.0, 1.0)
                        } else {
                            Keypoint::new(p as f64, 1.0, 1.0)
                        }
                    })
                    .collect(),
            })
            .collect();
        PoseSequence::new(26.0, frames, compact_schema()).unwrap()
    }

    #[test]
    fn pythagorean_movement() {
        let s = moving_seq((3.0, 4.0), 5);
        let mut schema = s.schema.clone();
        schema.hand_right = vec![];
        let hands = frame_movement(&PoseSequence { schema, ..s.clone() }, Localization::Hands).unwrap();
        assert!(hands.values.iter().all(|&v| (v - 5.0).abs() < 1e-12));
        assert_eq!(hands.values.len(), 4);
    }

    #[test]
    fn mean_of_two_points() {
        let s = moving_seq((1.0, 0.0), 4);
        let m = frame_movement(&s, Localization::Hands).unwrap();
        assert!(m.values.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn stationary_is_zero() {
        let s = moving_seq((0.0, 0.0), 4);
        let m = frame_movement(&s, Localization::Head).unwrap();
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn windows_drop_trailing_partial() {
        assert_eq!(window_movement(&[2.0; 25], 10), vec![2.0, 2.0]);
        let mut f = vec![1.0; 10];
        f.extend([0.0; 10]);
        assert_eq!(window_movement(&f, 10), vec![1.0, 0.0]);
    }

    #[test]
    fn state_machine_cases() {
        let l = Localization::Hands;
        assert!(detect_gestures(&[0.1, 0.2, 0.3], 0.5, 3, l).is_empty());
        let g = detect_gestures(&[1.0, 0.0, 0.0, 0.0, 0.0], 0.5, 3, l);
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].start_window, g[0].end_window), (0, 0));
        let g = detect_gestures(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 0.5, 3, l);
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].start_window, g[0].end_window), (0, 3));
        // open at the end of the session closes at the last active window
        let g = detect_gestures(&[0.0, 1.0, 1.0, 0.0], 0.5, 3, l);
        assert_eq!((g[0].start_window, g[0].end_window), (1, 2));
    }

    #[test]
    fn surprise_examples() {
        assert!((gesture_surprise(0.8, 2) - 0.4).abs() < 1e-15);
        assert!((gesture_surprise(0.8, 100) - 0.008).abs() < 1e-15);
        assert_eq!(gesture_surprise(0.3, 0), 1.0);
    }

    #[test]
    fn motionless_session_has_no_gestures() {
        let s = moving_seq((0.0, 0.0), 60);
        let mut still = s.clone();
        for f in &mut still.frames {
            f.points[1].x = 0.0;
        }
        let a = body_gesture_features(&still, &GestureOptions::default()).unwrap();
        let f = a.features;
        assert_eq!(f.frame_movement, 0.0);
        assert_eq!(f.count, 0.0);
        assert_eq!(f.gesture_movement_share, 0.0);
        assert_eq!(f.surprise, 1.0);
        assert!(a.gestures.is_empty());
    }

    #[test]
    fn feature_names_match_layout() {
        assert_eq!(FEATURE_NAMES.len(), 20);
        assert_eq!(FEATURE_NAMES[9], "Hn-GN");
        assert_eq!(FEATURE_NAMES[19], "L-GN");
    }
}
