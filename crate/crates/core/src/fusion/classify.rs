//! Distress classifiers: logistic regression and a one-hidden-layer MLP
//! trained on label-smoothed softmax targets.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{solve_spd, Matrix};
use crate::math::{exp, ln, sigmoid, sqrt, tanh};
use crate::{Error, Result};

/// `L * (1 - s) + s / n` applied to a one-hot vector of `n` classes.
pub fn smooth_labels(one_hot: &[f64], s: f64) -> Vec<f64> {
    let n = one_hot.len() as f64;
    one_hot.iter().map(|l| l * (1.0 - s) + s / n).collect()
}

/// Smoothed two-class softmax target `[negative, positive]`.
pub fn smoothed_target(positive: bool, s: f64) -> [f64; 2] {
    let one_hot = if positive { [0.0, 1.0] } else { [1.0, 0.0] };
    let v = smooth_labels(&one_hot, s);
    [v[0], v[1]]
}

/// Per-column z-scoring fitted on training rows. Constant columns get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

fn column_moments(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows().max(1) as f64;
    let p = x.cols();
    let mut mean = vec![0.0; p];
    for r in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; p];
    for r in 0..x.rows() {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = var.into_iter().map(|s| sqrt(s / n)).collect();
    (mean, sd)
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (mean, sd) = column_moments(x);
        let scale = sd.into_iter().map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Self { mean, scale }
    }

    /// Like [`Standardizer::fit`], but scales below the median non-constant
    /// column standard deviation are raised to it. With few training rows a
    /// near-constant column would otherwise blow up unseen inputs.
    pub fn fit_floored(x: &Matrix) -> Self {
        let (mean, sd) = column_moments(x);
        let mut spread: Vec<f64> = sd.iter().copied().filter(|&s| s > 1e-12).collect();
        spread.sort_by(f64::total_cmp);
        let floor = spread.get(spread.len() / 2).copied().unwrap_or(1.0);
        let scale = sd.into_iter().map(|s| s.max(floor)).collect();
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..x.rows() {
            let row = self.transform_row(x.row(r));
            out.row_mut(r).copy_from_slice(&row);
        }
        out
    }
}

fn check_training(x: &Matrix, y: &[bool], what: &str) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "classifier labels",
            expected: x.rows(),
            got: y.len(),
        });
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClass(what.into()));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// L2 penalty on the weights (not the intercept), on the summed loss.
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            l2: 1.0,
            max_iter: 50,
            tol: 1e-8,
        }
    }
}

/// L2-regularized logistic regression on standardized inputs, fitted by
/// Newton's method. Predicts positive when the probability exceeds 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticRegression {
    pub fn fit(x: &Matrix, y: &[bool], opts: &LogisticOptions) -> Result<Self> {
        check_training(x, y, "logistic regression")?;
        let targets: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        Self::fit_soft(x, &targets, opts)
    }

    /// Fits to targets in `[0, 1]`.
    pub fn fit_soft(x: &Matrix, targets: &[f64], opts: &LogisticOptions) -> Result<Self> {
        let standardizer = Standardizer::fit_floored(x);
        let z = standardizer.transform(x);
        let n = z.rows();
        let p = z.cols() + 1;
        let mut beta = vec![0.0; p];
        let mut xi = vec![0.0; p];
        for _ in 0..opts.max_iter {
            let mut grad = vec![0.0; p];
            let mut hess = vec![0.0; p * p];
            for r in 0..n {
                xi[0] = 1.0;
                xi[1..].copy_from_slice(z.row(r));
                let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let mu = sigmoid(eta);
                let w = (mu * (1.0 - mu)).max(1e-10);
                let e = mu - targets[r];
                for a in 0..p {
                    grad[a] += e * xi[a];
                    let wa = w * xi[a];
                    for b in a..p {
                        hess[a * p + b] += wa * xi[b];
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    hess[a * p + b] = hess[b * p + a];
                }
            }
            for a in 1..p {
                grad[a] += opts.l2 * beta[a];
                hess[a * p + a] += opts.l2;
            }
            hess[0] += 1e-8;
            let step = solve_spd(&hess, p, &grad, 0.0)
                .or_else(|| solve_spd(&hess, p, &grad, 1e-6))
                .ok_or_else(|| Error::invalid("logistic Hessian is not positive definite"))?;
            let mut change = 0.0f64;
            for (b, s) in beta.iter_mut().zip(&step) {
                *b -= s;
                change = change.max(s.abs());
            }
            if change < opts.tol {
                break;
            }
        }
        Ok(Self {
            standardizer,
            intercept: beta[0],
            weights: beta[1..].to_vec(),
        })
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let z = self.standardizer.transform_row(row);
        sigmoid(self.intercept + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpOptions {
    pub hidden: usize,
    pub smoothing: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        Self {
            hidden: 64,
            smoothing: 0.4,
            epochs: 300,
            learning_rate: 0.01,
            weight_decay: 1e-2,
            seed: 0,
        }
    }
}

/// Inputs -> tanh hidden layer -> two-way softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub standardizer: Standardizer,
    /// `hidden x inputs`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `2 x hidden`
    pub w2: Matrix,
    pub b2: [f64; 2],
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - libm::pow(B1, self.t as f64);
        let c2 = 1.0 - libm::pow(B2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= lr * (self.m[i] / c1) / (sqrt(self.v[i] / c2) + 1e-8);
        }
    }
}

impl Mlp {
    pub fn fit(x: &Matrix, y: &[bool], opts: &MlpOptions) -> Result<Self> {
        check_training(x, y, "MLP")?;
        if !(0.0..1.0).contains(&opts.smoothing) {
            return Err(Error::invalid("label smoothing must lie in [0, 1)"));
        }
        let standardizer = Standardizer::fit_floored(x);
        let z = standardizer.transform(x);
        let (n, p, h) = (z.rows(), z.cols(), opts.hidden.max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let a1 = sqrt(6.0 / (p + h) as f64);
        let a2 = sqrt(6.0 / (h + 2) as f64);
        // parameters flattened: w1 (h*p), b1 (h), w2 (2*h), b2 (2)
        let total = h * p + h + 2 * h + 2;
        let mut params = vec![0.0; total];
        for v in &mut params[..h * p] {
            *v = rng.random_range(-a1..a1);
        }
        for v in &mut params[h * p + h..h * p + h + 2 * h] {
            *v = rng.random_range(-a2..a2);
        }
        let targets: Vec<[f64; 2]> = y.iter().map(|&v| smoothed_target(v, opts.smoothing)).collect();
        let mut adam = Adam::new(total);
        let mut grads = vec![0.0; total];
        let mut hidden = vec![0.0; h];
        for _ in 0..opts.epochs {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for r in 0..n {
                let xr = z.row(r);
                let (w1, rest) = params.split_at(h * p);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(2 * h);
                for j in 0..h {
                    let s: f64 = w1[j * p..(j + 1) * p].iter().zip(xr).map(|(a, b)| a * b).sum();
                    hidden[j] = tanh(s + b1[j]);
                }
                let logits = [
                    b2[0] + w2[..h].iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>(),
                    b2[1] + w2[h..].iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>(),
                ];
                let probs = softmax2(logits);
                let d_logit = [probs[0] - targets[r][0], probs[1] - targets[r][1]];
                let (gw1, rest) = grads.split_at_mut(h * p);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(2 * h);
                for k in 0..2 {
                    gb2[k] += d_logit[k];
                    for j in 0..h {
                        gw2[k * h + j] += d_logit[k] * hidden[j];
                    }
                }
                for j in 0..h {
                    let dh = (d_logit[0] * w2[j] + d_logit[1] * w2[h + j]) * (1.0 - hidden[j] * hidden[j]);
                    gb1[j] += dh;
                    for (g, xv) in gw1[j * p..(j + 1) * p].iter_mut().zip(xr) {
                        *g += dh * xv;
                    }
                }
            }
            for (i, g) in grads.iter_mut().enumerate() {
                *g /= n as f64;
                let is_weight = i < h * p || (i >= h * p + h && i < h * p + h + 2 * h);
                if is_weight {
                    *g += opts.weight_decay * params[i];
                }
            }
            adam.step(&mut params, &grads, opts.learning_rate);
        }
        let w1 = Matrix::from_vec(h, p, params[..h * p].to_vec());
        let b1 = params[h * p..h * p + h].to_vec();
        let w2 = Matrix::from_vec(2, h, params[h * p + h..h * p + 3 * h].to_vec());
        let b2 = [params[total - 2], params[total - 1]];
        Ok(Self {
            standardizer,
            w1,
            b1,
            w2,
            b2,
        })
    }

    /// Softmax output `[negative, positive]`.
    pub fn predict_distribution(&self, row: &[f64]) -> [f64; 2] {
        let z = self.standardizer.transform_row(row);
        let hidden: Vec<f64> = (0..self.w1.rows())
            .map(|j| tanh(self.b1[j] + self.w1.row(j).iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()))
            .collect();
        let logit = |k: usize| self.b2[k] + self.w2.row(k).iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
        softmax2([logit(0), logit(1)])
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.predict_distribution(row)[1]
    }
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = exp(logits[0] - m);
    let e1 = exp(logits[1] - m);
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// Softmax cross-entropy of a distribution against (soft) targets.
pub fn cross_entropy(probs: &[f64; 2], targets: &[f64; 2]) -> f64 {
    -(targets[0] * ln(probs[0].max(1e-300)) + targets[1] * ln(probs[1].max(1e-300)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClassifierKind {
    Lr,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistressClassifier {
    Logistic(LogisticRegression),
    Mlp(Mlp),
}

impl DistressClassifier {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        match self {
            DistressClassifier::Logistic(m) => m.predict_proba(row),
            DistressClassifier::Mlp(m) => m.predict_proba(row),
        }
    }

    /// Binary decision at probability threshold 0.5.
    pub fn predict(&self, row: &[f64]) -> bool {
        self.predict_proba(row) > 0.5
    }
}

/// Trains the requested classifier. Label smoothing `s` shapes the MLP's
/// softmax targets; logistic regression is fitted on the hard labels.
pub fn train_distress_classifier(
    x: &Matrix,
    y: &[bool],
    kind: ClassifierKind,
    smoothing: f64,
    seed: u64,
) -> Result<DistressClassifier> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::invalid("label smoothing must lie in [0, 1)"));
    }
    match kind {
        ClassifierKind::Lr => Ok(DistressClassifier::Logistic(LogisticRegression::fit(
            x,
            y,
            &LogisticOptions::default(),
        )?)),
        ClassifierKind::Mlp => Ok(DistressClassifier::Mlp(Mlp::fit(
            x,
            y,
            &MlpOptions {
                smoothing,
                seed,
                ..MlpOptions::default()
            },
        )?)),
    }
}
