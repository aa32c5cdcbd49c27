//! Diagonal-covariance Gaussian mixtures fitted by EM.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math::{abs, exp, ln, PI};
use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const DEFAULT_COMPONENTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
    pub max_frames: usize,
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-5,
            max_frames: 50_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// `K x d`
    pub means: Matrix,
    /// `K x d`, every entry at least the variance floor.
    pub variances: Matrix,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// `ln(w_k) + ln N(x | mu_k, diag(var_k))` for every component.
    pub fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        Terms::new(self).log_densities(self, x, out);
    }

    /// Posterior responsibilities of every component for `x`; returns the
    /// log-likelihood of `x`.
    pub fn posteriors(&self, x: &[f64], out: &mut [f64]) -> f64 {
        Terms::new(self).posteriors(self, x, out)
    }

    /// Posteriors of every row, `rows x K`, with the total log-likelihood.
    pub fn posterior_matrix(&self, x: &Matrix) -> (Matrix, f64) {
        let terms = Terms::new(self);
        let k = self.components();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut total = 0.0;
        for r in 0..x.rows() {
            total += terms.posteriors(self, x.row(r), out.row_mut(r));
        }
        (out, total)
    }

    /// Mean per-row log-likelihood.
    pub fn mean_log_likelihood(&self, x: &Matrix) -> f64 {
        let terms = Terms::new(self);
        let mut buf = vec![0.0; self.components()];
        let total: f64 = (0..x.rows()).map(|r| terms.posteriors(self, x.row(r), &mut buf)).sum();
        total / x.rows().max(1) as f64
    }
}

/// Per-component constants hoisted out of the per-row loop.
struct Terms {
    inv_var: Vec<f64>,
    offset: Vec<f64>,
}

impl Terms {
    fn new(m: &GmmModel) -> Self {
        let d = m.dim();
        let inv_var = m.variances.as_slice().iter().map(|v| 1.0 / v).collect();
        let offset = (0..m.components())
            .map(|k| {
                let logdet: f64 = m.variances.row(k).iter().map(|&v| ln(2.0 * PI * v)).sum();
                ln(m.weights[k]) - 0.5 * logdet
            })
            .collect();
        debug_assert_eq!(m.variances.as_slice().len(), m.components() * d);
        Self { inv_var, offset }
    }

    fn log_densities(&self, m: &GmmModel, x: &[f64], out: &mut [f64]) {
        let d = m.dim();
        let means = m.means.as_slice();
        for (k, slot) in out.iter_mut().enumerate() {
            let mu = &means[k * d..(k + 1) * d];
            let iv = &self.inv_var[k * d..(k + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                let diff = x[j] - mu[j];
                s += diff * diff * iv[j];
            }
            *slot = self.offset[k] - 0.5 * s;
        }
    }

    fn posteriors(&self, m: &GmmModel, x: &[f64], out: &mut [f64]) -> f64 {
        self.log_densities(m, x, out);
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in out.iter_mut() {
            *v = exp(*v - max);
            sum += *v;
        }
        for v in out.iter_mut() {
            *v /= sum;
        }
        max + ln(sum)
    }
}

/// k-means++ style seeding: first center uniform, later ones with
/// probability proportional to squared distance to the nearest chosen one.
fn seed_means(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    let mut dist: Vec<f64> = (0..n).map(|i| sq(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a center; pick any unused row
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut r = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if r < *d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        };
        chosen.push(next);
        for i in 0..n {
            dist[i] = dist[i].min(sq(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

/// Fits a `k`-component diagonal GMM. Returns the model and the mean
/// log-likelihood of the model entering every EM iteration; the loop stops
/// without a further update once that changes by less than `tol`.
pub fn fit_gmm(x: &Matrix, k: usize, opts: &GmmOptions) -> Result<(GmmModel, Vec<f64>)> {
    if k == 0 {
        return Err(Error::invalid("GMM needs at least one component"));
    }
    if x.rows() < k {
        return Err(Error::invalid(alloc::format!(
            "GMM with {k} components needs at least {k} rows, got {}",
            x.rows()
        )));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("GMM inputs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let data = if x.rows() > opts.max_frames.max(k) {
        let mut idx = sample(&mut rng, x.rows(), opts.max_frames.max(k)).into_vec();
        idx.sort_unstable();
        x.select_rows(&idx)
    } else {
        x.clone()
    };
    let (n, d) = (data.rows(), data.cols());

    let mut global_var = vec![0.0; d];
    for j in 0..d {
        let col = data.column(j);
        global_var[j] = crate::math::variance(&col).max(VARIANCE_FLOOR);
    }
    let means = seed_means(&data, k, &mut rng);
    let mut variances = Matrix::zeros(k, d);
    for r in 0..k {
        variances.row_mut(r).copy_from_slice(&global_var);
    }
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means,
        variances,
    };

    let mut history: Vec<f64> = Vec::new();
    let mut resp = vec![0.0; k];
    for _ in 0..opts.max_iter {
        let mut nk = vec![0.0; k];
        let mut sx = Matrix::zeros(k, d);
        let mut sxx = Matrix::zeros(k, d);
        let terms = Terms::new(&model);
        let mut ll = 0.0;
        for r in 0..n {
            let row = data.row(r);
            ll += terms.posteriors(&model, row, &mut resp);
            for c in 0..k {
                let g = resp[c];
                if g < 1e-300 {
                    continue;
                }
                nk[c] += g;
                let a = sx.row_mut(c);
                for j in 0..d {
                    a[j] += g * row[j];
                }
                let s2 = sxx.row_mut(c);
                for j in 0..d {
                    s2[j] += g * row[j] * row[j];
                }
            }
        }
        let ll = ll / n as f64;
        let done = history.last().is_some_and(|&prev| abs(ll - prev) < opts.tol);
        history.push(ll);
        if done {
            break;
        }
        for c in 0..k {
            if nk[c] < 1e-10 {
                // empty component: keep its mean, reset spread, tiny weight
                model.weights[c] = 1e-10;
                model.variances.row_mut(c).copy_from_slice(&global_var);
                continue;
            }
            model.weights[c] = nk[c] / n as f64;
            for j in 0..d {
                let mu = sx.get(c, j) / nk[c];
                let var = (sxx.get(c, j) / nk[c] - mu * mu).max(VARIANCE_FLOOR);
                model.means.set(c, j, mu);
                model.variances.set(c, j, var);
            }
        }
        let wsum: f64 = model.weights.iter().sum();
        for w in &mut model.weights {
            *w /= wsum;
        }
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn two_blobs(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { [-5.0, 0.0] } else { [5.0, 3.0] };
                vec![
                    c[0] + 0.5 * rng.sample::<f64, _>(StandardNormal),
                    c[1] + 0.5 * rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn recovers_separated_means() {
        let x = two_blobs(2000, 1);
        let (m, _) = fit_gmm(&x, 2, &GmmOptions::default()).unwrap();
        let mut mus: Vec<(f64, f64)> = (0..2).map(|k| (m.means.get(k, 0), m.means.get(k, 1))).collect();
        mus.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((mus[0].0 + 5.0).abs() < 0.1 && mus[0].1.abs() < 0.1, "{mus:?}");
        assert!((mus[1].0 - 5.0).abs() < 0.1 && (mus[1].1 - 3.0).abs() < 0.1, "{mus:?}");
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_component_is_ml_estimate() {
        let x = two_blobs(101, 2);
        let (m, _) = fit_gmm(&x, 1, &GmmOptions::default()).unwrap();
        for j in 0..2 {
            let col = x.column(j);
            assert!((m.means.get(0, j) - crate::math::mean(&col)).abs() < 1e-9);
            assert!((m.variances.get(0, j) - crate::math::variance(&col)).abs() < 1e-9);
        }
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn log_likelihood_monotone() {
        let x = two_blobs(500, 3);
        let opts = GmmOptions {
            tol: 0.0,
            max_iter: 40,
            ..GmmOptions::default()
        };
        let (_, hist) = fit_gmm(&x, 4, &opts).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{hist:?}");
        }
    }

    #[test]
    fn degenerate_component_floored() {
        // three identical rows force a zero-variance component
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![4.0, 2.0]]);
        let (m, _) = fit_gmm(&x, 2, &GmmOptions::default()).unwrap();
        assert!(m.variances.as_slice().iter().all(|&v| v >= VARIANCE_FLOOR));
    }

    #[test]
    fn too_few_rows() {
        assert!(fit_gmm(&Matrix::zeros(3, 2), 4, &GmmOptions::default()).is_err());
    }
}
