//! Band spectrum, spread and level features of a trajectory slice.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::TrajectorySlice;
use crate::math::{cos, mean, sin, sqrt, std_dev, PI};
use crate::{Error, Result};

pub const BAND_POINTS: usize = 41;
pub const BAND_LOW_HZ: f64 = 0.5;
pub const BAND_STEP_HZ: f64 = 0.05;

/// `0.50, 0.55, ..., 2.50` Hz.
pub fn band_grid() -> [f64; BAND_POINTS] {
    core::array::from_fn(|i| (10 + i) as f64 / 20.0)
}

/// Amplitude spectrum `2/L * |sum x_n e^{-2 pi i f n / fps}|` of the
/// mean-removed signal at each grid frequency, without a taper.
///
/// When `fps / 0.05` is an integer this is exactly the zero-padded FFT of
/// length `fps / 0.05` read at the grid bins.
pub fn band_spectrum(signal: &[f64], fps: f64) -> [f64; BAND_POINTS] {
    let m = mean(signal);
    let scale = 2.0 / signal.len().max(1) as f64;
    let grid = band_grid();
    core::array::from_fn(|i| {
        let w = 2.0 * PI * grid[i] / fps;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &x) in signal.iter().enumerate() {
            let v = x - m;
            re += v * cos(w * n as f64);
            im -= v * sin(w * n as f64);
        }
        scale * sqrt(re * re + im * im)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFeatures {
    /// Band spectrum averaged across trajectories; always 41 values.
    pub fft: Vec<f64>,
    /// Per-trajectory population standard deviation of the raw signal.
    pub std: Vec<f64>,
    pub mean: Vec<f64>,
}

impl SliceFeatures {
    /// `fft ++ std ++ mean`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(BAND_POINTS + 2 * self.std.len());
        v.extend_from_slice(&self.fft);
        v.extend_from_slice(&self.std);
        v.extend_from_slice(&self.mean);
        v
    }

    pub fn dim(&self) -> usize {
        BAND_POINTS + 2 * self.std.len()
    }
}

pub fn slice_features(slice: &TrajectorySlice, fps: f64) -> Result<SliceFeatures> {
    trajectory_features(
        (0..slice.trajectories.rows()).map(|r| slice.trajectories.row(r)),
        fps,
    )
}

/// Features of any set of equal-rate trajectories.
pub fn trajectory_features<'a, I>(trajectories: I, fps: f64) -> Result<SliceFeatures>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if !(fps > 5.0) {
        return Err(Error::invalid("slice features need fps > 5"));
    }
    let mut fft = alloc::vec![0.0; BAND_POINTS];
    let mut std = Vec::new();
    let mut means = Vec::new();
    for row in trajectories {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("slice trajectory".into()));
        }
        let spec = band_spectrum(row, fps);
        for (acc, v) in fft.iter_mut().zip(spec) {
            *acc += v;
        }
        std.push(std_dev(row));
        means.push(mean(row));
    }
    if !std.is_empty() {
        let k = std.len() as f64;
        for v in &mut fft {
            *v /= k;
        }
    }
    Ok(SliceFeatures { fft, std, mean: means })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    fn sine(freq: f64, fps: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n).map(|t| amp * sin(2.0 * PI * freq * t as f64 / fps)).collect()
    }

    /// Zero-padded FFT read at the grid bins.
    fn fft_oracle(signal: &[f64], fps: f64) -> Vec<f64> {
        let padded = libm::ceil(fps / BAND_STEP_HZ - 1e-9) as usize;
        let m = mean(signal);
        let mut buf: Vec<Complex<f64>> = (0..padded)
            .map(|i| Complex::new(if i < signal.len() { signal[i] - m } else { 0.0 }, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
        band_grid()
            .iter()
            .map(|f| {
                let k = libm::round(f * padded as f64 / fps) as usize;
                2.0 / signal.len() as f64 * buf[k].norm()
            })
            .collect()
    }

    #[test]
    fn grid_shape() {
        let g = band_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[40], 2.5);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_padded_fft() {
        for fps in [26.0, 30.0, 25.0] {
            let s: Vec<f64> = (0..100).map(|t| sin(0.37 * t as f64) + 0.1 * (t % 7) as f64).collect();
            let ours = band_spectrum(&s, fps);
            let oracle = fft_oracle(&s, fps);
            for (a, b) in ours.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9, "{fps}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn one_hertz_peaks_at_one_hertz() {
        let s = sine(1.0, 26.0, 1.0, 100);
        let spec = fft_oracle(&s, 26.0);
        let argmax = (0..41).max_by(|&a, &b| spec[a].total_cmp(&spec[b])).unwrap();
        assert!((band_grid()[argmax] - 1.0).abs() <= 0.05 + 1e-12);
        let ours = band_spectrum(&s, 26.0);
        let argmax = (0..41).max_by(|&a, &b| ours[a].total_cmp(&ours[b])).unwrap();
        assert_eq!(band_grid()[argmax], 1.0);
    }

    #[test]
    fn constant_trajectories() {
        let a = vec![3.0; 100];
        let b = vec![-1.5; 100];
        let f = trajectory_features([a.as_slice(), b.as_slice()], 26.0).unwrap();
        assert!(f.fft.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(f.std, vec![0.0, 0.0]);
        assert_eq!(f.mean, vec![3.0, -1.5]);
        assert_eq!(f.dim(), 45);
    }

    #[test]
    fn averaging_across_trajectories() {
        let a = sine(1.0, 26.0, 1.0, 100);
        let b = sine(2.0, 26.0, 0.5, 100);
        let sa = band_spectrum(&a, 26.0);
        let sb = band_spectrum(&b, 26.0);
        let f = trajectory_features([a.as_slice(), b.as_slice()], 26.0).unwrap();
        for i in 0..41 {
            assert!((f.fft[i] - (sa[i] + sb[i]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn low_fps_rejected() {
        assert!(trajectory_features([[0.0; 10].as_slice()], 4.0).is_err());
    }

    proptest! {
        #[test]
        fn in_band_sinusoid_peaks_near_frequency(step in 0usize..41, fps in 20.0f64..40.0) {
            let f0 = (10 + step) as f64 / 20.0;
            let s = sine(f0, fps, 1.0, 100);
            let spec = band_spectrum(&s, fps);
            let argmax = (0..41).max_by(|&a, &b| spec[a].total_cmp(&spec[b])).unwrap();
            // one grid step, widened where the main lobe clips the band edge
            prop_assert!((band_grid()[argmax] - f0).abs() <= 0.05 + 1e-9
                || (f0 < 0.6 && argmax == 0) || (f0 > 2.4 && argmax == 40));
        }

        #[test]
        fn offset_changes_only_mean(offset in -50.0f64..50.0, phase in 0.0f64..6.0) {
            let a: Vec<f64> = (0..100).map(|t| sin(0.4 * t as f64 + phase)).collect();
            let b: Vec<f64> = a.iter().map(|v| v + offset).collect();
            let fa = trajectory_features([a.as_slice()], 26.0).unwrap();
            let fb = trajectory_features([b.as_slice()], 26.0).unwrap();
            for i in 0..41 {
                prop_assert!((fa.fft[i] - fb.fft[i]).abs() < 1e-9);
            }
            prop_assert!((fa.std[0] - fb.std[0]).abs() < 1e-9);
            prop_assert!((fb.mean[0] - fa.mean[0] - offset).abs() < 1e-9);
        }
    }
}
