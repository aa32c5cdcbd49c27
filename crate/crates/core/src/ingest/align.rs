//! Alignment of sidecar tracks and diarization intervals to video frames.

use alloc::string::String;
use alloc::vec;
use serde::{Deserialize, Serialize};

use crate::ingest::SpeakingTrack;
use crate::linalg::Matrix;
use crate::math::ceil;
use crate::{Error, Result};

/// Resamples a track to `n_frames` video frames at `fps` by taking, for
/// every frame time `t / fps`, the sample with the nearest timestamp (the
/// earlier one on ties).
///
/// `samples` holds one row per timestamp; the result is `dim x n_frames`.
pub fn resample_nearest(timestamps: &[f64], samples: &Matrix, fps: f64, n_frames: usize) -> Result<Matrix> {
    if timestamps.len() != samples.rows() {
        return Err(Error::DimensionMismatch {
            what: "track timestamps",
            expected: samples.rows(),
            got: timestamps.len(),
        });
    }
    if timestamps.is_empty() {
        return Err(Error::invalid("feature track has no samples"));
    }
    if timestamps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("track timestamps must be non-decreasing"));
    }
    let dim = samples.cols();
    let mut out = Matrix::zeros(dim, n_frames);
    let mut j = 0usize;
    for t in 0..n_frames {
        let time = t as f64 / fps;
        while j + 1 < timestamps.len() && timestamps[j + 1] <= time {
            j += 1;
        }
        let pick = if j + 1 < timestamps.len() && (timestamps[j + 1] - time) < (time - timestamps[j]) {
            j + 1
        } else {
            j
        };
        for d in 0..dim {
            out.set(d, t, samples.get(pick, d));
        }
    }
    Ok(out)
}

/// One diarization row: `[start_s, end_s)` attributed to `speaker`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub speaker: String,
}

/// First frame index whose time `t / fps` is at or after `seconds`.
fn frame_at_or_after(seconds: f64, fps: f64) -> usize {
    let raw = seconds * fps;
    // absorb representation error so 2.0 s at 26 fps lands on frame 52
    let f = ceil(raw - 1e-9);
    if f <= 0.0 {
        0
    } else {
        f as usize
    }
}

/// Frame-level speaking flags for the participant: frame `t` is speaking when
/// `t / fps` falls in a half-open interval labeled with `participant`.
pub fn speaking_from_intervals(
    intervals: &[SpeakerInterval],
    participant: &str,
    fps: f64,
    n_frames: usize,
) -> Result<SpeakingTrack> {
    let mut speaking = vec![false; n_frames];
    for iv in intervals {
        if !(iv.end_s >= iv.start_s) {
            return Err(Error::invalid("diarization interval ends before it starts"));
        }
        if iv.speaker != participant {
            continue;
        }
        let a = frame_at_or_after(iv.start_s, fps).min(n_frames);
        let b = frame_at_or_after(iv.end_s, fps).min(n_frames);
        for s in &mut speaking[a..b] {
            *s = true;
        }
    }
    Ok(SpeakingTrack { speaking })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use alloc::string::ToString;

    #[test]
    fn participant_interval_maps_to_frames() {
        let ivs = [
            SpeakerInterval {
                start_s: 0.0,
                end_s: 2.0,
                speaker: "interviewer".to_string(),
            },
            SpeakerInterval {
                start_s: 2.0,
                end_s: 4.0,
                speaker: "participant".to_string(),
            },
        ];
        let s = speaking_from_intervals(&ivs, "participant", 26.0, 200).unwrap();
        let on: Vec<usize> = (0..200).filter(|&t| s.speaking[t]).collect();
        assert_eq!(on.first(), Some(&52));
        assert_eq!(on.last(), Some(&103));
        assert_eq!(on.len(), 52);
    }

    #[test]
    fn nearest_picks_closest_timestamp() {
        let ts = [0.0, 0.1, 0.2];
        let samples = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        // frames at 0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.24 s at 25 fps
        let out = resample_nearest(&ts, &samples, 25.0, 7).unwrap();
        assert_eq!(out.row(0), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn unsorted_timestamps_rejected() {
        let samples = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        assert!(resample_nearest(&[0.2, 0.1], &samples, 25.0, 3).is_err());
    }
}
