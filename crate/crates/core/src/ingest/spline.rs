//! Not-a-knot cubic spline interpolation over irregularly spaced samples.
//!
//! The not-a-knot end condition makes the interpolant reproduce any cubic
//! polynomial exactly, which natural end conditions do not.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::solve_tridiagonal;
use crate::{Error, Result};

/// Minimum number of knots for a not-a-knot spline.
pub const MIN_KNOTS: usize = 4;

#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// Fits a spline through `(xs[i], ys[i])`. `xs` must be strictly increasing.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::DimensionMismatch {
                what: "spline knots",
                expected: n,
                got: ys.len(),
            });
        }
        if n < MIN_KNOTS {
            return Err(Error::invalid("cubic spline needs at least 4 knots"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spline knots must be strictly increasing"));
        }

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        // Unknowns are the interior second derivatives M[1..n-1]; the end
        // values follow from third-derivative continuity at x[1] and x[n-2].
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for row in 0..m {
            let i = row + 1;
            lower[row] = h[i - 1];
            diag[row] = 2.0 * (h[i - 1] + h[i]);
            upper[row] = h[i];
            rhs[row] = 6.0 * (slope[i] - slope[i - 1]);
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        upper[0] -= h0 * h0 / h1;
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[m - 1] += hb * (ha + hb) / ha;
        lower[m - 1] -= hb * hb / ha;

        let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut second = vec![0.0; n];
        second[1..n - 1].copy_from_slice(&interior);
        second[0] = ((h0 + h1) * second[1] - h0 * second[2]) / h1;
        second[n - 1] = ((ha + hb) * second[n - 2] - hb * second[n - 3]) / ha;

        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        })
    }

    /// Evaluates the spline. Outside the knot range the end polynomials are
    /// extended; callers wanting constant extrapolation clamp beforehand.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = x1 - x;
        let b = x - x0;
        m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (self.ys[i] / h - m0 * h / 6.0) * a
            + (self.ys[i + 1] / h - m1 * h / 6.0) * b
    }
}

/// Fills the entries of `values` whose `observed` flag is false.
///
/// Interior gaps are spline-interpolated through all observed samples;
/// leading and trailing gaps repeat the nearest observed value. Observed
/// samples are never written. Returns `false` (and leaves `values` untouched)
/// when fewer than [`MIN_KNOTS`] samples are observed.
pub fn fill_gaps(values: &mut [f64], observed: &[bool]) -> bool {
    debug_assert_eq!(values.len(), observed.len());
    let knots: Vec<usize> = (0..values.len()).filter(|&i| observed[i]).collect();
    if knots.len() < MIN_KNOTS {
        return false;
    }
    if knots.len() == values.len() {
        return true;
    }
    let xs: Vec<f64> = knots.iter().map(|&i| i as f64).collect();
    let ys: Vec<f64> = knots.iter().map(|&i| values[i]).collect();
    let spline = match CubicSpline::fit(&xs, &ys) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let first = knots[0];
    let last = knots[knots.len() - 1];
    for i in 0..values.len() {
        if observed[i] {
            continue;
        }
        values[i] = if i < first {
            values[first]
        } else if i > last {
            values[last]
        } else {
            spline.eval(i as f64)
        };
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_on_irregular_knots() {
        let f = |x: f64| 0.5 * x * x * x - 2.0 * x * x + x - 3.0;
        let xs = [0.0, 0.7, 1.5, 3.0, 3.2, 5.0, 6.1];
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::fit(&xs, &ys).unwrap();
        for k in 0..=60 {
            let x = k as f64 * 0.1;
            assert!((s.eval(x) - f(x)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn four_knots_give_the_interpolating_cubic() {
        let f = |x: f64| x * x * x;
        let xs = [0.0, 1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::fit(&xs, &ys).unwrap();
        assert!((s.eval(3.0) - 27.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_too_few_knots() {
        assert!(CubicSpline::fit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn boundary_gaps_are_constant() {
        let mut v = [f64::NAN, 1.0, 2.0, 4.0, 8.0, f64::NAN, f64::NAN];
        let obs: Vec<bool> = v.iter().map(|x| x.is_finite()).collect();
        assert!(fill_gaps(&mut v, &obs));
        assert_eq!(v[0], 1.0);
        assert_eq!(v[5], 8.0);
        assert_eq!(v[6], 8.0);
    }

    #[test]
    fn under_observed_is_reported() {
        let mut v = [1.0, f64::NAN, 2.0, 3.0, f64::NAN];
        let obs: Vec<bool> = v.iter().map(|x| x.is_finite()).collect();
        assert!(!fill_gaps(&mut v, &obs));
        assert!(v[1].is_nan());
    }
}
