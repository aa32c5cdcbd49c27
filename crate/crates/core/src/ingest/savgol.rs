//! Savitzky-Golay smoothing with mirror padding at the sequence ends.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::solve_spd;
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 11;
pub const DEFAULT_POLYORDER: usize = 3;

/// Convolution weights that evaluate the least-squares polynomial fit of the
/// window at its center sample.
pub fn coefficients(window: usize, polyorder: usize) -> Result<Vec<f64>> {
    check_params(window, polyorder)?;
    let half = (window / 2) as i64;
    let p = polyorder + 1;
    let powers = |offset: i64| -> Vec<f64> {
        let mut row = Vec::with_capacity(p);
        let mut v = 1.0;
        for _ in 0..p {
            row.push(v);
            v *= offset as f64;
        }
        row
    };

    let mut gram = vec![0.0; p * p];
    for offset in -half..=half {
        let row = powers(offset);
        for a in 0..p {
            for b in 0..p {
                gram[a * p + b] += row[a] * row[b];
            }
        }
    }
    let mut e0 = vec![0.0; p];
    e0[0] = 1.0;
    let z = solve_spd(&gram, p, &e0, 0.0)
        .ok_or_else(|| Error::invalid("singular Savitzky-Golay design"))?;
    Ok((-half..=half)
        .map(|offset| powers(offset).iter().zip(&z).map(|(a, b)| a * b).sum())
        .collect())
}

fn check_params(window: usize, polyorder: usize) -> Result<()> {
    if window % 2 == 0 || window < 3 {
        return Err(Error::invalid("smoothing window must be odd and at least 3"));
    }
    if polyorder >= window {
        return Err(Error::invalid("polynomial order must be below the window length"));
    }
    Ok(())
}

/// Index into `0..n` after reflecting about the end samples (the end sample
/// itself is not repeated).
#[inline]
fn mirror(i: i64, n: i64) -> usize {
    let mut i = i;
    let period = 2 * (n - 1);
    if period == 0 {
        return 0;
    }
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Applies precomputed coefficients to one signal.
pub fn apply(signal: &[f64], coeffs: &[f64]) -> Vec<f64> {
    let n = signal.len() as i64;
    let half = (coeffs.len() / 2) as i64;
    (0..n)
        .map(|t| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * signal[mirror(t + k as i64 - half, n)])
                .sum()
        })
        .collect()
}

/// Smooths one signal. Errors when the signal is shorter than the window.
pub fn smooth_signal(signal: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>> {
    let coeffs = coefficients(window, polyorder)?;
    if signal.len() < window {
        return Err(Error::SequenceTooShort {
            len: signal.len(),
            window,
        });
    }
    Ok(apply(signal, &coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_sum_to_one_and_are_symmetric() {
        let c = coefficients(11, 3).unwrap();
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..5 {
            assert!((c[k] - c[10 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn five_point_quadratic_table() {
        // Classic tabulated weights (-3, 12, 17, 12, -3) / 35.
        let c = coefficients(5, 2).unwrap();
        let table = [-3.0, 12.0, 17.0, 12.0, -3.0];
        for (a, b) in c.iter().zip(table) {
            assert!((a - b / 35.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(coefficients(10, 3).is_err());
        assert!(coefficients(5, 5).is_err());
        assert!(matches!(
            smooth_signal(&[1.0; 5], 11, 3),
            Err(Error::SequenceTooShort { len: 5, window: 11 })
        ));
    }

    #[test]
    fn mirror_reflects_without_repeating_edge() {
        assert_eq!(mirror(-1, 5), 1);
        assert_eq!(mirror(-2, 5), 2);
        assert_eq!(mirror(5, 5), 3);
        assert_eq!(mirror(6, 5), 2);
    }
}
