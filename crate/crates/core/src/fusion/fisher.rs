//! Improved Fisher Vector encoding of a frame set under a diagonal GMM.

use alloc::vec;
use alloc::vec::Vec;

use super::gmm::GmmModel;
use crate::linalg::Matrix;
use crate::math::{l2_norm, sqrt};
use crate::{Error, Result};

/// Length of the encoding: a mean block and a variance block per component.
pub fn embedding_len(k: usize, d: usize) -> usize {
    2 * k * d
}

/// Raw gradient blocks, laid out as `[mean_0 .. mean_{K-1}, var_0 .. var_{K-1}]`
/// with `d` values each:
///
/// ```text
/// G_mu[k]    = 1 / (T sqrt(w_k))   * sum_t g_tk (x_t - mu_k) / sigma_k
/// G_sigma[k] = 1 / (T sqrt(2 w_k)) * sum_t g_tk ((x_t - mu_k)^2 / sigma_k^2 - 1)
/// ```
pub fn fisher_gradients(x: &Matrix, gmm: &GmmModel) -> Result<Vec<f64>> {
    let (k, d) = (gmm.components(), gmm.dim());
    if x.cols() != d {
        return Err(Error::DimensionMismatch {
            what: "latent width",
            expected: d,
            got: x.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::invalid("Fisher Vector of an empty frame set"));
    }
    let mut out = vec![0.0; embedding_len(k, d)];
    let (mean_block, var_block) = out.split_at_mut(k * d);
    let (posteriors, _) = gmm.posterior_matrix(x);
    let sigma: Vec<f64> = gmm.variances.as_slice().iter().map(|&v| sqrt(v)).collect();
    for t in 0..x.rows() {
        let row = x.row(t);
        let gamma = posteriors.row(t);
        for c in 0..k {
            let g = gamma[c];
            if g == 0.0 {
                continue;
            }
            let mu = gmm.means.row(c);
            for j in 0..d {
                let u = (row[j] - mu[j]) / sigma[c * d + j];
                mean_block[c * d + j] += g * u;
                var_block[c * d + j] += g * (u * u - 1.0);
            }
        }
    }
    let t = x.rows() as f64;
    for c in 0..k {
        let w = gmm.weights[c];
        let (a, b) = (1.0 / (t * sqrt(w)), 1.0 / (t * sqrt(2.0 * w)));
        for j in 0..d {
            mean_block[c * d + j] *= a;
            var_block[c * d + j] *= b;
        }
    }
    Ok(out)
}

/// Signed square root followed by L2 normalization. An all-zero vector is
/// returned unchanged.
pub fn improve(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.signum() * sqrt(x.abs());
    }
    let norm = l2_norm(v);
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Fixed-length session embedding of length `2 K d`.
pub fn fisher_vector(x: &Matrix, gmm: &GmmModel) -> Result<Vec<f64>> {
    let mut v = fisher_gradients(x, gmm)?;
    improve(&mut v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::gmm::{fit_gmm, GmmOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect())
    }

    /// Textbook formulas with explicit densities, no shared helpers.
    fn brute_force(x: &Matrix, g: &GmmModel) -> Vec<f64> {
        let (k, d, t) = (g.components(), g.dim(), x.rows());
        let mut gm = vec![vec![0.0; d]; k];
        let mut gs = vec![vec![0.0; d]; k];
        for r in 0..t {
            let dens: Vec<f64> = (0..k)
                .map(|c| {
                    let mut p = g.weights[c];
                    for j in 0..d {
                        let v = g.variances.get(c, j);
                        let z = x.get(r, j) - g.means.get(c, j);
                        p *= libm::exp(-z * z / (2.0 * v)) / libm::sqrt(2.0 * core::f64::consts::PI * v);
                    }
                    p
                })
                .collect();
            let total: f64 = dens.iter().sum();
            for c in 0..k {
                let gamma = dens[c] / total;
                for j in 0..d {
                    let s = libm::sqrt(g.variances.get(c, j));
                    let u = (x.get(r, j) - g.means.get(c, j)) / s;
                    gm[c][j] += gamma * u / (t as f64 * libm::sqrt(g.weights[c]));
                    gs[c][j] += gamma * (u * u - 1.0) / (t as f64 * libm::sqrt(2.0 * g.weights[c]));
                }
            }
        }
        let mut v: Vec<f64> = gm.into_iter().flatten().chain(gs.into_iter().flatten()).collect();
        for e in &mut v {
            *e = if *e < 0.0 { -libm::sqrt(-*e) } else { libm::sqrt(*e) };
        }
        let n = libm::sqrt(v.iter().map(|e| e * e).sum::<f64>());
        v.iter().map(|e| e / n).collect()
    }

    #[test]
    fn matches_brute_force() {
        let x = random(50, 4, 9);
        let (g, _) = fit_gmm(&x, 2, &GmmOptions::default()).unwrap();
        let ours = fisher_vector(&x, &g).unwrap();
        let oracle = brute_force(&x, &g);
        assert_eq!(ours.len(), 16);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((l2_norm(&ours) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lengths() {
        for (k, d) in [(1, 2), (16, 8), (32, 16)] {
            let x = random(4 * k + 10, d, k as u64);
            let (g, _) = fit_gmm(&x, k, &GmmOptions { max_iter: 3, ..GmmOptions::default() }).unwrap();
            assert_eq!(fisher_vector(&x, &g).unwrap().len(), 2 * k * d);
        }
    }

    #[test]
    fn frames_at_mean_zero_mean_block() {
        let g = GmmModel {
            weights: vec![1.0],
            means: Matrix::from_rows(&[vec![1.0, -2.0]]),
            variances: Matrix::from_rows(&[vec![0.5, 2.0]]),
        };
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![1.0, -2.0]]);
        let raw = fisher_gradients(&x, &g).unwrap();
        assert!(raw[..2].iter().all(|&v| v == 0.0));
        assert!(raw[2..].iter().all(|&v| v < 0.0));
    }

    #[test]
    fn signed_sqrt_is_not_idempotent() {
        let x = random(30, 3, 4);
        let (g, _) = fit_gmm(&x, 2, &GmmOptions::default()).unwrap();
        let once = fisher_vector(&x, &g).unwrap();
        let mut twice = once.clone();
        improve(&mut twice);
        assert!(once.iter().zip(&twice).any(|(a, b)| (a - b).abs() > 1e-6));
    }
}
