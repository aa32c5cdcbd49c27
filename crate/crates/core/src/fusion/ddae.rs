//! Multi-input denoising auto-encoder.
//!
//! Each feature group gets its own tanh encoder of width `ceil(d/2)`. The
//! group codes are concatenated into a shared tanh bottleneck of width
//! `ceil(D/4)` (`D` the total input width), decoded by a shared tanh layer
//! back to the concatenated code width, and split into linear per-group
//! output layers.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::classify::Standardizer;
use crate::linalg::Matrix;
use crate::math::{ceil, pow, sqrt, tanh};
use crate::{Error, Result};

pub const DEFAULT_NOISE: f64 = 0.1;
pub const FIDGET_WEIGHT: f64 = 0.35;
pub const OTHER_WEIGHT: f64 = 0.1;

/// Layer widths derived from the group input widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub inputs: Vec<usize>,
    pub encoders: Vec<usize>,
    pub latent: usize,
}

impl Architecture {
    pub fn new(inputs: &[usize]) -> Result<Self> {
        if inputs.is_empty() || inputs.contains(&0) {
            return Err(Error::invalid("every feature group needs at least one column"));
        }
        let total: usize = inputs.iter().sum();
        Ok(Self {
            inputs: inputs.to_vec(),
            encoders: inputs.iter().map(|&d| ceil(0.5 * d as f64) as usize).collect(),
            latent: ceil(0.25 * total as f64) as usize,
        })
    }

    pub fn input_width(&self) -> usize {
        self.inputs.iter().sum()
    }

    /// Width of the concatenated group codes, also the shared decoder width.
    pub fn code_width(&self) -> usize {
        self.encoders.iter().sum()
    }

    pub fn parameter_count(&self) -> usize {
        let e = self.code_width();
        let per_group: usize = self.inputs.iter().zip(&self.encoders).map(|(d, h)| 2 * d * h + h + d).sum();
        per_group + 2 * e * self.latent + self.latent + e
    }
}

/// Offsets into the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    enc_w: Vec<usize>,
    enc_b: Vec<usize>,
    z_w: usize,
    z_b: usize,
    u_w: usize,
    u_b: usize,
    dec_w: Vec<usize>,
    dec_b: Vec<usize>,
    in_off: Vec<usize>,
    code_off: Vec<usize>,
}

impl Layout {
    fn new(a: &Architecture) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let mut enc_w = Vec::new();
        let mut enc_b = Vec::new();
        for (d, h) in a.inputs.iter().zip(&a.encoders) {
            enc_w.push(take(d * h));
            enc_b.push(take(*h));
        }
        let e = a.code_width();
        let z_w = take(a.latent * e);
        let z_b = take(a.latent);
        let u_w = take(e * a.latent);
        let u_b = take(e);
        let mut dec_w = Vec::new();
        let mut dec_b = Vec::new();
        for (d, h) in a.inputs.iter().zip(&a.encoders) {
            dec_w.push(take(d * h));
            dec_b.push(take(*d));
        }
        let prefix = |v: &[usize]| {
            let mut acc = 0;
            v.iter()
                .map(|x| {
                    let o = acc;
                    acc += x;
                    o
                })
                .collect::<Vec<_>>()
        };
        Self {
            enc_w,
            enc_b,
            z_w,
            z_b,
            u_w,
            u_b,
            dec_w,
            dec_b,
            in_off: prefix(&a.inputs),
            code_off: prefix(&a.encoders),
        }
    }
}

struct Activations {
    h: Vec<f64>,
    z: Vec<f64>,
    u: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdaeOptions {
    pub noise: f64,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub holdout: f64,
    /// Frames beyond this are subsampled away before training.
    pub max_frames: usize,
    pub seed: u64,
}

impl Default for DdaeOptions {
    fn default() -> Self {
        Self {
            noise: DEFAULT_NOISE,
            epochs: 30,
            batch: 64,
            learning_rate: 3e-3,
            patience: 10,
            holdout: 0.1,
            max_frames: 4000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Weighted MSE on all (standardized, clean) training frames.
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
    pub best_validation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdaeModel {
    pub architecture: Architecture,
    /// Loss weight per group.
    pub weights: Vec<f64>,
    pub standardizer: Standardizer,
    params: Vec<f64>,
}

impl DdaeModel {
    /// Xavier-uniform weights, zero biases, identity standardization.
    pub fn init(architecture: Architecture, weights: Vec<f64>, seed: u64) -> Result<Self> {
        if weights.len() != architecture.inputs.len() {
            return Err(Error::DimensionMismatch {
                what: "group loss weights",
                expected: architecture.inputs.len(),
                got: weights.len(),
            });
        }
        let layout = Layout::new(&architecture);
        let mut params = vec![0.0; architecture.parameter_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |off: usize, fan_out: usize, fan_in: usize| {
            let a = sqrt(6.0 / (fan_in + fan_out) as f64);
            for p in &mut params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-a..a);
            }
        };
        let e = architecture.code_width();
        for g in 0..architecture.inputs.len() {
            fill(layout.enc_w[g], architecture.encoders[g], architecture.inputs[g]);
        }
        fill(layout.z_w, architecture.latent, e);
        fill(layout.u_w, e, architecture.latent);
        for g in 0..architecture.inputs.len() {
            fill(layout.dec_w[g], architecture.inputs[g], architecture.encoders[g]);
        }
        let d = architecture.input_width();
        Ok(Self {
            architecture,
            weights,
            standardizer: Standardizer {
                mean: vec![0.0; d],
                scale: vec![1.0; d],
            },
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn latent_dim(&self) -> usize {
        self.architecture.latent
    }

    fn forward(&self, layout: &Layout, x: &[f64]) -> Activations {
        let a = &self.architecture;
        let p = &self.params;
        let e = a.code_width();
        let mut h = vec![0.0; e];
        for g in 0..a.inputs.len() {
            let (d, w) = (a.inputs[g], a.encoders[g]);
            let xg = &x[layout.in_off[g]..layout.in_off[g] + d];
            for i in 0..w {
                let row = &p[layout.enc_w[g] + i * d..layout.enc_w[g] + (i + 1) * d];
                let s: f64 = row.iter().zip(xg).map(|(a, b)| a * b).sum();
                h[layout.code_off[g] + i] = tanh(s + p[layout.enc_b[g] + i]);
            }
        }
        let z: Vec<f64> = (0..a.latent)
            .map(|i| {
                let row = &p[layout.z_w + i * e..layout.z_w + (i + 1) * e];
                tanh(p[layout.z_b + i] + row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect();
        let u: Vec<f64> = (0..e)
            .map(|i| {
                let row = &p[layout.u_w + i * a.latent..layout.u_w + (i + 1) * a.latent];
                tanh(p[layout.u_b + i] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect();
        let mut y = vec![0.0; a.input_width()];
        for g in 0..a.inputs.len() {
            let (d, w) = (a.inputs[g], a.encoders[g]);
            let ug = &u[layout.code_off[g]..layout.code_off[g] + w];
            for k in 0..d {
                let row = &p[layout.dec_w[g] + k * w..layout.dec_w[g] + (k + 1) * w];
                y[layout.in_off[g] + k] = p[layout.dec_b[g] + k] + row.iter().zip(ug).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Activations { h, z, u, y }
    }

    fn sample_loss(&self, layout: &Layout, y: &[f64], clean: &[f64]) -> f64 {
        let a = &self.architecture;
        (0..a.inputs.len())
            .map(|g| {
                let o = layout.in_off[g];
                let se: f64 = (o..o + a.inputs[g]).map(|i| (y[i] - clean[i]) * (y[i] - clean[i])).sum();
                self.weights[g] * se / a.inputs[g] as f64
            })
            .sum()
    }

    /// Weighted loss and its parameter gradient over a batch, both averaged
    /// over rows. Inputs are already standardized; `noisy` feeds the encoder
    /// and `clean` is the reconstruction target.
    pub fn loss_and_gradient(&self, clean: &Matrix, noisy: &Matrix) -> (f64, Vec<f64>) {
        let layout = Layout::new(&self.architecture);
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let inv = 1.0 / clean.rows().max(1) as f64;
        for r in 0..clean.rows() {
            loss += self.accumulate(&layout, clean.row(r), noisy.row(r), inv, &mut grad);
        }
        (loss * inv, grad)
    }

    fn accumulate(&self, layout: &Layout, clean: &[f64], noisy: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let a = &self.architecture;
        let p = &self.params;
        let e = a.code_width();
        let act = self.forward(layout, noisy);

        let mut du = vec![0.0; e];
        for g in 0..a.inputs.len() {
            let (d, w) = (a.inputs[g], a.encoders[g]);
            let coef = 2.0 * self.weights[g] / d as f64 * scale;
            for k in 0..d {
                let i = layout.in_off[g] + k;
                let dy = coef * (act.y[i] - clean[i]);
                grad[layout.dec_b[g] + k] += dy;
                for j in 0..w {
                    let c = layout.code_off[g] + j;
                    grad[layout.dec_w[g] + k * w + j] += dy * act.u[c];
                    du[c] += p[layout.dec_w[g] + k * w + j] * dy;
                }
            }
        }
        let mut dz = vec![0.0; a.latent];
        for i in 0..e {
            let pre = du[i] * (1.0 - act.u[i] * act.u[i]);
            grad[layout.u_b + i] += pre;
            for j in 0..a.latent {
                grad[layout.u_w + i * a.latent + j] += pre * act.z[j];
                dz[j] += p[layout.u_w + i * a.latent + j] * pre;
            }
        }
        let mut dh = vec![0.0; e];
        for i in 0..a.latent {
            let pre = dz[i] * (1.0 - act.z[i] * act.z[i]);
            grad[layout.z_b + i] += pre;
            for j in 0..e {
                grad[layout.z_w + i * e + j] += pre * act.h[j];
                dh[j] += p[layout.z_w + i * e + j] * pre;
            }
        }
        for g in 0..a.inputs.len() {
            let (d, w) = (a.inputs[g], a.encoders[g]);
            for i in 0..w {
                let c = layout.code_off[g] + i;
                let pre = dh[c] * (1.0 - act.h[c] * act.h[c]);
                grad[layout.enc_b[g] + i] += pre;
                for j in 0..d {
                    grad[layout.enc_w[g] + i * d + j] += pre * noisy[layout.in_off[g] + j];
                }
            }
        }
        self.sample_loss(layout, &act.y, clean)
    }

    /// Weighted reconstruction loss of raw frames without input noise.
    pub fn weighted_mse(&self, frames: &Matrix) -> Result<f64> {
        self.check_width(frames)?;
        let z = self.standardizer.transform(frames);
        Ok(self.standardized_loss(&z))
    }

    fn standardized_loss(&self, z: &Matrix) -> f64 {
        let layout = Layout::new(&self.architecture);
        let total: f64 = (0..z.rows())
            .map(|r| {
                let act = self.forward(&layout, z.row(r));
                self.sample_loss(&layout, &act.y, z.row(r))
            })
            .sum();
        total / z.rows().max(1) as f64
    }

    fn check_width(&self, frames: &Matrix) -> Result<()> {
        if frames.cols() != self.architecture.input_width() {
            return Err(Error::DimensionMismatch {
                what: "frame bundle width",
                expected: self.architecture.input_width(),
                got: frames.cols(),
            });
        }
        if !frames.all_finite() {
            return Err(Error::NonFinite("frame bundle".into()));
        }
        Ok(())
    }

    /// Noise-free bottleneck activations, one row per frame.
    pub fn encode(&self, frames: &Matrix) -> Result<Matrix> {
        self.check_width(frames)?;
        let layout = Layout::new(&self.architecture);
        let mut out = Matrix::zeros(frames.rows(), self.architecture.latent);
        for r in 0..frames.rows() {
            let x = self.standardizer.transform_row(frames.row(r));
            let act = self.forward(&layout, &x);
            out.row_mut(r).copy_from_slice(&act.z);
        }
        Ok(out)
    }
}

/// Default loss weights: the first group is the fidget group.
pub fn default_weights(groups: usize) -> Vec<f64> {
    (0..groups).map(|g| if g == 0 { FIDGET_WEIGHT } else { OTHER_WEIGHT }).collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - pow(B1, self.t as f64);
        let c2 = 1.0 - pow(B2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= lr * (self.m[i] / c1) / (sqrt(self.v[i] / c2) + 1e-8);
        }
    }
}

/// Trains on the rows of `frames` (columns ordered group by group).
/// Stops early when the held-out loss has not improved for `patience`
/// epochs and returns the best parameters seen.
pub fn train_ddae(
    frames: &Matrix,
    group_dims: &[usize],
    weights: &[f64],
    opts: &DdaeOptions,
) -> Result<(DdaeModel, TrainingLog)> {
    let arch = Architecture::new(group_dims)?;
    if frames.cols() != arch.input_width() {
        return Err(Error::DimensionMismatch {
            what: "frame bundle width",
            expected: arch.input_width(),
            got: frames.cols(),
        });
    }
    if frames.rows() < 2 {
        return Err(Error::invalid("auto-encoder needs at least two frames"));
    }
    if !frames.all_finite() {
        return Err(Error::NonFinite("auto-encoder training frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = DdaeModel::init(arch, weights.to_vec(), rng.random())?;
    model.standardizer = Standardizer::fit(frames);

    let mut idx: Vec<usize> = (0..frames.rows()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(opts.max_frames.max(2));
    let data = model.standardizer.transform(&frames.select_rows(&idx));
    let n_val = ((data.rows() as f64 * opts.holdout) as usize).clamp(1, data.rows() - 1);
    let val = data.select_rows(&(0..n_val).collect::<Vec<_>>());
    let train = data.select_rows(&(n_val..data.rows()).collect::<Vec<_>>());

    let initial_loss = model.standardized_loss(&data);
    let mut adam = Adam {
        m: vec![0.0; model.params.len()],
        v: vec![0.0; model.params.len()],
        t: 0,
    };
    let mut best = (model.standardized_loss(&val), model.params.clone());
    let mut stale = 0;
    let mut epochs = 0;
    let mut order: Vec<usize> = (0..train.rows()).collect();
    for _ in 0..opts.epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        for batch in order.chunks(opts.batch.max(1)) {
            let clean = train.select_rows(batch);
            let mut noisy = clean.clone();
            for v in noisy.as_mut_slice() {
                *v += opts.noise * rng.sample::<f64, _>(StandardNormal);
            }
            let (_, grad) = model.loss_and_gradient(&clean, &noisy);
            adam.step(&mut model.params, &grad, opts.learning_rate);
        }
        let v = model.standardized_loss(&val);
        if v < best.0 {
            best = (v, model.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
    }
    model.params = best.1;
    let final_loss = model.standardized_loss(&data);
    Ok((
        model,
        TrainingLog {
            initial_loss,
            final_loss,
            epochs,
            best_validation: best.0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_arithmetic() {
        let a = Architecture::new(&[40]).unwrap();
        assert_eq!(a.encoders, vec![20]);
        assert_eq!(a.latent, 10);
        let a = Architecture::new(&[9, 8, 35, 13]).unwrap();
        assert_eq!(a.encoders, vec![5, 4, 18, 7]);
        assert_eq!(a.code_width(), 34);
        assert_eq!(a.latent, 17);
        let m = DdaeModel::init(a.clone(), default_weights(4), 1).unwrap();
        assert_eq!(m.params().len(), a.parameter_count());
    }

    fn toy_frames(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(-1.0..1.0);
                let v: f64 = rng.random_range(-1.0..1.0);
                vec![u, 0.5 * u + 0.1 * v, v, -u, u * v]
            })
            .collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let arch = Architecture::new(&[2, 1]).unwrap();
        let mut m = DdaeModel::init(arch, vec![0.35, 0.1], 3).unwrap();
        let clean = Matrix::from_rows(&[vec![0.3, -0.7, 0.5], vec![-0.2, 0.4, 0.9]]);
        let noisy = Matrix::from_rows(&[vec![0.35, -0.6, 0.45], vec![-0.25, 0.5, 1.0]]);
        let (_, grad) = m.loss_and_gradient(&clean, &noisy);
        let h = 1e-6;
        for i in 0..m.params().len() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let up = m.loss_and_gradient(&clean, &noisy).0;
            m.params_mut()[i] = orig - h;
            let down = m.loss_and_gradient(&clean, &noisy).0;
            m.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = numeric.abs().max(grad[i].abs()).max(1e-8);
            assert!((numeric - grad[i]).abs() / denom < 1e-4, "param {i}: {numeric} vs {}", grad[i]);
        }
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let frames = toy_frames(1000, 5);
        let opts = DdaeOptions {
            epochs: 10,
            ..DdaeOptions::default()
        };
        let (m, log) = train_ddae(&frames, &[2, 3], &[0.35, 0.1], &opts).unwrap();
        assert!(log.final_loss < log.initial_loss, "{log:?}");
        let (m2, _) = train_ddae(&frames, &[2, 3], &[0.35, 0.1], &opts).unwrap();
        assert_eq!(m, m2);
        let a = m.encode(&frames).unwrap();
        assert_eq!(a, m.encode(&frames).unwrap());
        assert_eq!(a.cols(), 2);
        let zero = m.encode(&Matrix::zeros(1, 5)).unwrap();
        assert!(zero.all_finite());
        assert!(m.encode(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn noiseless_low_rank_toy_is_reconstructed() {
        // two perfectly correlated columns fit through a one-unit bottleneck
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let u = -1.0 + 2.0 * i as f64 / 399.0;
                vec![u, u]
            })
            .collect();
        let frames = Matrix::from_rows(&rows);
        let opts = DdaeOptions {
            noise: 0.0,
            epochs: 400,
            patience: 400,
            learning_rate: 1e-2,
            batch: 32,
            ..DdaeOptions::default()
        };
        let (m, log) = train_ddae(&frames, &[1, 1], &[1.0, 1.0], &opts).unwrap();
        let per_group = m.weighted_mse(&frames).unwrap() / 2.0;
        assert!(per_group < 1e-3, "{log:?}");
    }

    #[test]
    fn non_finite_rejected() {
        let mut f = toy_frames(10, 1);
        f.set(3, 2, f64::NAN);
        assert!(matches!(
            train_ddae(&f, &[2, 3], &[0.35, 0.1], &DdaeOptions::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
