//! Feature-subset search for the least-squares threshold classifier.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use super::linear::{row_folds, targets, NormalSystem, DEFAULT_RIDGE};
use crate::linalg::Matrix;
use crate::math::mean;
use crate::metrics::Confusion;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub folds: usize,
    pub seed: u64,
    /// Candidate counts up to this are enumerated exhaustively.
    pub exact_limit: usize,
    pub beam_width: usize,
    /// Keep `(subset mask, mean F1)` for every evaluated subset.
    pub keep_log: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            folds: 3,
            seed: 0,
            exact_limit: 20,
            beam_width: 50,
            keep_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub subset: Vec<String>,
    pub indices: Vec<usize>,
    pub f1_mean: f64,
    pub fold_f1: Vec<f64>,
    pub evaluated: u64,
    /// Set when beam search replaced exhaustive enumeration.
    pub approximate: bool,
    /// Bit `j` of a mask selects candidate `j`.
    pub log: Vec<(u64, f64)>,
}

struct Fold {
    system: NormalSystem,
    test_rows: Vec<Vec<f64>>,
    truth: Vec<bool>,
}

struct Evaluator {
    folds: Vec<Fold>,
}

impl Evaluator {
    fn fold_f1(&self, subset: &[usize]) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| {
                let w = f.system.solve(subset, DEFAULT_RIDGE);
                let predicted: Vec<bool> = f
                    .test_rows
                    .iter()
                    .map(|row| f.system.predict(subset, &w, row) > 0.5)
                    .collect();
                Confusion::from_predictions(&f.truth, &predicted).f1()
            })
            .collect()
    }
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|j| mask >> j & 1 == 1).collect()
}

#[derive(Clone)]
struct Scored {
    mask: u64,
    indices: Vec<usize>,
    f1: f64,
}

/// Higher F1 first, then fewer features, then the lexicographically
/// smaller index list.
fn rank(a: &Scored, b: &Scored) -> Ordering {
    b.f1
        .total_cmp(&a.f1)
        .then(a.indices.len().cmp(&b.indices.len()))
        .then_with(|| a.indices.cmp(&b.indices))
}

/// Best feature subset by mean cross-validated F1. Rows of `x` are
/// participants; `names` label the columns.
pub fn feature_search(x: &Matrix, labels: &[bool], names: &[String], opts: &SearchOptions) -> Result<SearchResult> {
    let p = x.cols();
    if p == 0 {
        return Err(Error::invalid("feature search needs at least one candidate"));
    }
    if p > 64 {
        return Err(Error::invalid("feature search supports at most 64 candidates"));
    }
    if names.len() != p || labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "feature names or labels",
            expected: p,
            got: names.len(),
        });
    }
    let y = targets(labels);
    let folds = row_folds(labels, opts.folds, opts.seed)?
        .into_iter()
        .map(|test| {
            let train: Vec<usize> = (0..x.rows()).filter(|i| !test.contains(i)).collect();
            let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            Fold {
                system: NormalSystem::new(&x.select_rows(&train), &ty),
                test_rows: test.iter().map(|&i| x.row(i).to_vec()).collect(),
                truth: test.iter().map(|&i| labels[i]).collect(),
            }
        })
        .collect();
    let eval = Evaluator { folds };

    let mut log = Vec::new();
    let mut evaluated = 0u64;
    let mut score = |mask: u64| {
        let indices = bits(mask);
        let f1 = mean(&eval.fold_f1(&indices));
        evaluated += 1;
        if opts.keep_log {
            log.push((mask, f1));
        }
        Scored { mask, indices, f1 }
    };

    let approximate = p > opts.exact_limit;
    let mut best: Option<Scored> = None;
    let consider = |s: &Scored, best: &mut Option<Scored>| {
        if best.as_ref().is_none_or(|b| rank(s, b) == Ordering::Less) {
            *best = Some(s.clone());
        }
    };
    if !approximate {
        for mask in 1..(1u64 << p) {
            let s = score(mask);
            consider(&s, &mut best);
        }
    } else {
        let mut beam: Vec<Scored> = (0..p).map(|j| score(1 << j)).collect();
        for size in 1..=p {
            beam.sort_by(rank);
            beam.truncate(opts.beam_width.max(1));
            for s in &beam {
                consider(s, &mut best);
            }
            if size == p {
                break;
            }
            let next: BTreeSet<u64> = beam
                .iter()
                .flat_map(|s| (0..p).filter(move |j| s.mask >> j & 1 == 0).map(move |j| s.mask | 1 << j))
                .collect();
            beam = next.into_iter().map(&mut score).collect();
        }
    }
    let best = best.expect("at least one subset is evaluated");
    Ok(SearchResult {
        subset: best.indices.iter().map(|&j| names[j].clone()).collect(),
        fold_f1: eval.fold_f1(&best.indices),
        indices: best.indices,
        f1_mean: best.f1,
        evaluated,
        approximate,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, p: usize, informative: usize, seed: u64) -> (Matrix, Vec<bool>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                (0..p)
                    .map(|j| {
                        let noise = rng.random_range(-1.0..1.0);
                        if j == informative {
                            if l { 2.0 } else { -2.0 }
                        } else {
                            noise
                        }
                    })
                    .collect()
            })
            .collect();
        let names = (0..p).map(|j| format!("f{j}")).collect();
        (Matrix::from_rows(&rows), labels, names)
    }

    #[test]
    fn finds_planted_feature() {
        let (x, y, names) = planted(12, 3, 1, 2);
        let r = feature_search(&x, &y, &names, &SearchOptions::default()).unwrap();
        assert_eq!(r.subset, vec![String::from("f1")]);
        assert_eq!(r.f1_mean, 1.0);
        assert_eq!(r.evaluated, 7);
        assert!(!r.approximate);
    }

    #[test]
    fn best_dominates_log() {
        let (x, y, names) = planted(15, 6, 4, 3);
        let opts = SearchOptions {
            keep_log: true,
            ..SearchOptions::default()
        };
        let r = feature_search(&x, &y, &names, &opts).unwrap();
        assert_eq!(r.log.len(), 63);
        assert!(r.log.iter().all(|&(_, f)| f <= r.f1_mean));
        let best_mask: u64 = r.indices.iter().map(|j| 1u64 << j).sum();
        for j in 0..6 {
            if best_mask >> j & 1 == 0 {
                let sup = r.log.iter().find(|e| e.0 == best_mask | 1 << j).unwrap();
                assert!(sup.1 <= r.f1_mean);
            }
        }
    }

    #[test]
    fn twenty_candidates_enumerated() {
        let (x, y, names) = planted(12, 20, 7, 5);
        let r = feature_search(&x, &y, &names, &SearchOptions::default()).unwrap();
        assert_eq!(r.evaluated, (1 << 20) - 1);
        assert!(!r.approximate);
        assert_eq!(r.f1_mean, 1.0);
    }

    #[test]
    fn beam_beyond_limit() {
        let (x, y, names) = planted(12, 8, 5, 4);
        let opts = SearchOptions {
            exact_limit: 4,
            beam_width: 5,
            ..SearchOptions::default()
        };
        let r = feature_search(&x, &y, &names, &opts).unwrap();
        assert!(r.approximate);
        assert!(r.evaluated < 255);
        assert_eq!(r.f1_mean, 1.0);
        assert!(r.indices.contains(&5));
    }
}
