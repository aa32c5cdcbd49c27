//! Least-squares regression on 0/1 targets, thresholded at 0.5.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::folds::participant_folds;
use crate::linalg::{solve_spd, Matrix};
use crate::math::{mean, std_dev};
use crate::metrics::Confusion;
use crate::{Error, Result};

/// Added to the normal equations when they are not positive definite.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Normal equations of one training set on centered features.
#[derive(Debug, Clone)]
pub(crate) struct NormalSystem {
    pub p: usize,
    pub gram: Vec<f64>,
    pub rhs: Vec<f64>,
    pub means: Vec<f64>,
    pub y_mean: f64,
}

impl NormalSystem {
    pub fn new(x: &Matrix, y: &[f64]) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let means: Vec<f64> = (0..p).map(|j| mean(&x.column(j))).collect();
        let y_mean = mean(y);
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        let mut c = vec![0.0; p];
        for r in 0..n {
            for (j, v) in x.row(r).iter().enumerate() {
                c[j] = v - means[j];
            }
            let yc = y[r] - y_mean;
            for a in 0..p {
                rhs[a] += c[a] * yc;
                for b in a..p {
                    gram[a * p + b] += c[a] * c[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[a * p + b] = gram[b * p + a];
            }
        }
        Self {
            p,
            gram,
            rhs,
            means,
            y_mean,
        }
    }

    /// Coefficients restricted to the columns in `subset`.
    pub fn solve(&self, subset: &[usize], ridge: f64) -> Vec<f64> {
        let k = subset.len();
        let mut g = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for (i, &a) in subset.iter().enumerate() {
            b[i] = self.rhs[a];
            for (j, &c) in subset.iter().enumerate() {
                g[i * k + j] = self.gram[a * self.p + c];
            }
        }
        solve_spd(&g, k, &b, 0.0)
            .or_else(|| solve_spd(&g, k, &b, ridge))
            .unwrap_or_else(|| vec![0.0; k])
    }

    pub fn predict(&self, subset: &[usize], coefficients: &[f64], row: &[f64]) -> f64 {
        self.y_mean
            + subset
                .iter()
                .zip(coefficients)
                .map(|(&j, w)| w * (row[j] - self.means[j]))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Equals the mean training target; the intercept is not penalized.
    pub intercept: f64,
    pub means: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl LinearFit {
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "regression targets",
                expected: x.rows(),
                got: y.len(),
            });
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("regression features".into()));
        }
        let sys = NormalSystem::new(x, y);
        let all: Vec<usize> = (0..x.cols()).collect();
        Ok(Self {
            intercept: sys.y_mean,
            coefficients: sys.solve(&all, DEFAULT_RIDGE),
            means: sys.means,
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.means)
                .zip(&self.coefficients)
                .map(|((v, m), w)| w * (v - m))
                .sum::<f64>()
    }

    pub fn classify(&self, row: &[f64]) -> bool {
        self.predict(row) > 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    pub f1_mean: f64,
    pub f1_std: f64,
    pub fold_f1: Vec<f64>,
    /// `coefficients[fold][feature]`
    pub coefficients: Vec<Vec<f64>>,
}

/// Test-row indices of each fold, stratified by label. Rows are participants.
pub(crate) fn row_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let ids: Vec<usize> = (0..labels.len()).collect();
    participant_folds(&ids, Some(labels), folds, seed)
}

pub(crate) fn targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()
}

/// Participant-independent cross-validated least-squares classification.
pub fn linear_classify(x: &Matrix, labels: &[bool], folds: usize, seed: u64) -> Result<LinearReport> {
    if x.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "participant labels",
            expected: x.rows(),
            got: labels.len(),
        });
    }
    let y = targets(labels);
    let mut fold_f1 = Vec::new();
    let mut coefficients = Vec::new();
    for test in row_folds(labels, folds, seed)? {
        let train: Vec<usize> = (0..x.rows()).filter(|i| !test.contains(i)).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let fit = LinearFit::fit(&x.select_rows(&train), &ty)?;
        let truth: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        let predicted: Vec<bool> = test.iter().map(|&i| fit.classify(x.row(i))).collect();
        fold_f1.push(Confusion::from_predictions(&truth, &predicted).f1());
        coefficients.push(fit.coefficients);
    }
    Ok(LinearReport {
        f1_mean: mean(&fold_f1),
        f1_std: std_dev(&fold_f1),
        fold_f1,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{polarity, Polarity, DEFAULT_TOLERANCE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                vec![
                    if l { 1.0 } else { -1.0 } + 0.2 * rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    3.0,
                ]
            })
            .collect();
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn separable_is_perfect_and_constant_is_neutral() {
        let (x, y) = data(12, 1);
        let r = linear_classify(&x, &y, 3, 0).unwrap();
        assert_eq!(r.f1_mean, 1.0);
        assert!(r.coefficients.iter().all(|c| c[2] == 0.0));
        let p = polarity(&r.coefficients, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(p[0], Polarity::Positive);
        assert_eq!(p[2], Polarity::Neutral);
    }

    #[test]
    fn exact_fit_on_linear_targets() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let f = LinearFit::fit(&x, &[0.0, 0.5, 1.0, 1.5]).unwrap();
        assert!((f.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((f.predict(&[4.0]) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rescaling_a_feature_rescales_its_weight(scale in 0.01f64..100.0, seed in 0u64..50) {
            let (x, y) = data(15, seed);
            let x = x.select_cols(&[0, 1]);
            let mut xs = x.clone();
            for r in 0..xs.rows() {
                let v = xs.get(r, 1) * scale;
                xs.set(r, 1, v);
            }
            let a = linear_classify(&x, &y, 3, 0).unwrap();
            let b = linear_classify(&xs, &y, 3, 0).unwrap();
            prop_assert_eq!(&a.fold_f1, &b.fold_f1);
            for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((ca[1] - cb[1] * scale).abs() < 1e-8 * (1.0 + ca[1].abs()));
                prop_assert!((ca[0] - cb[0]).abs() < 1e-8 * (1.0 + ca[0].abs()));
            }
        }
    }
}
