//! Binary CART trees and a bagged random forest with impurity-based
//! feature importances.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math::{ceil, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestOptions {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        positive: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Fraction of positive training samples in the leaf reached by `x`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { positive } => return *positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    opts: &'a ForestOptions,
    mtry: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = idx.len() as f64;
        let pos = idx.iter().filter(|&&i| self.y[i]).count() as f64;
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf { positive: pos / n });
        if depth >= self.opts.max_depth || idx.len() < self.opts.min_samples_split || pos == 0.0 || pos == n {
            return node_id;
        }

        let parent = gini(pos, n);
        let p = self.x.cols();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
        for feature in sample(rng, p, self.mtry.min(p)).into_iter() {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for k in 0..order.len() - 1 {
                if order[k].1 {
                    left_pos += 1.0;
                }
                if order[k].0 == order[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let child = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / n;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, feature, (order[k].0 + order[k + 1].0) / 2.0));
                }
            }
        }

        let Some((gain, feature, threshold)) = best else {
            return node_id;
        };
        self.importance[feature] += gain * n;

        let split = partition(idx, |i| self.x.get(i, feature) <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[node_id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        node_id
    }
}

/// Stable partition; returns the number of elements satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    yes.extend(no);
    idx.copy_from_slice(&yes);
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
    importances: Vec<f64>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[bool], opts: &ForestOptions) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "forest labels",
                expected: x.rows(),
                got: y.len(),
            });
        }
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::invalid("forest needs at least one sample and feature"));
        }
        if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
            return Err(Error::SingleClass("random forest".into()));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("forest inputs".into()));
        }
        let p = x.cols();
        let mtry = match opts.max_features {
            MaxFeatures::Sqrt => (ceil(sqrt(p as f64)) as usize).max(1),
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k.clamp(1, p),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut trees = Vec::with_capacity(opts.n_trees);
        let mut importances = vec![0.0; p];
        let n = x.rows();
        for _ in 0..opts.n_trees {
            let mut idx: Vec<usize> = if opts.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x,
                y,
                opts,
                mtry,
                nodes: Vec::new(),
                importance: vec![0.0; p],
            };
            b.build(&mut idx, 0, &mut rng);
            let total: f64 = b.importance.iter().sum();
            if total > 0.0 {
                for (acc, v) in importances.iter_mut().zip(&b.importance) {
                    *acc += v / total;
                }
            }
            trees.push(DecisionTree { nodes: b.nodes });
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            for v in &mut importances {
                *v /= total;
            }
        }
        Ok(Self {
            trees,
            n_features: p,
            importances,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Normalized mean decrease in impurity; sums to one unless no split was made.
    pub fn feature_importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) > 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let signal = if label { 1.0 } else { -1.0 } + 0.3 * (rng.random::<f64>() - 0.5);
            rows.push(vec![rng.random::<f64>(), signal, rng.random::<f64>()]);
            y.push(label);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn separable_data_is_learned() {
        let (x, y) = toy(60);
        let f = RandomForest::fit(&x, &y, &ForestOptions::default()).unwrap();
        let acc = (0..60).filter(|&i| f.predict(x.row(i)) == y[i]).count();
        assert_eq!(acc, 60);
        let imp = f.feature_importances();
        assert!(imp[1] > imp[0] && imp[1] > imp[2]);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_for_seed() {
        let (x, y) = toy(40);
        let a = RandomForest::fit(&x, &y, &ForestOptions::default()).unwrap();
        let b = RandomForest::fit(&x, &y, &ForestOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = toy(10);
        let err = RandomForest::fit(&x, &[true; 10], &ForestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingleClass(_)));
    }
}
