//! Per-category DYNAMIC/STATIC slice classifiers with participant-fold CV.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{ActionLabel, Category};
use crate::folds::participant_folds;
use crate::forest::{ForestOptions, RandomForest};
use crate::fusion::classify::{LogisticOptions, LogisticRegression};
use crate::linalg::Matrix;
use crate::math::{mean, std_dev};
use crate::metrics::Confusion;
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionModelKind {
    Forest,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ActionModel {
    Forest(RandomForest),
    Linear(LogisticRegression),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionClassifier {
    pub category: Category,
    pub feature_dim: usize,
    model: ActionModel,
}

impl ActionClassifier {
    pub fn fit(
        category: Category,
        x: &Matrix,
        labels: &[ActionLabel],
        kind: ActionModelKind,
        seed: u64,
    ) -> Result<Self> {
        let y: Vec<bool> = labels.iter().map(|l| l.is_dynamic()).collect();
        let model = match kind {
            ActionModelKind::Forest => ActionModel::Forest(RandomForest::fit(
                x,
                &y,
                &ForestOptions {
                    seed,
                    ..ForestOptions::default()
                },
            )?),
            ActionModelKind::Linear => {
                ActionModel::Linear(LogisticRegression::fit(x, &y, &LogisticOptions::default())?)
            }
        };
        Ok(Self {
            category,
            feature_dim: x.cols(),
            model,
        })
    }

    /// Probability of DYNAMIC.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                what: "slice features",
                expected: self.feature_dim,
                got: features.len(),
            });
        }
        Ok(match &self.model {
            ActionModel::Forest(f) => f.predict_proba(features),
            ActionModel::Linear(m) => m.predict_proba(features),
        })
    }
}

pub fn classify_slice(classifier: &ActionClassifier, features: &[f64]) -> Result<ActionLabel> {
    Ok(ActionLabel::from_dynamic(classifier.score(features)? > 0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub test_slices: usize,
    pub accuracy: f64,
    pub f1: f64,
}

/// Slice-level scores over participant-disjoint folds, DYNAMIC as positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub folds: Vec<FoldScore>,
}

/// Cross-validates on participant folds, then fits the final classifier on
/// every slice. `participants[i]` owns row `i` of `x`.
pub fn train_action_classifier<P: Ord + Clone>(
    category: Category,
    x: &Matrix,
    labels: &[ActionLabel],
    participants: &[P],
    folds: usize,
    kind: ActionModelKind,
    seed: u64,
) -> Result<(ActionClassifier, CvReport)> {
    if labels.len() != x.rows() || participants.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "slice labels",
            expected: x.rows(),
            got: labels.len().min(participants.len()),
        });
    }
    let classes: BTreeSet<bool> = labels.iter().map(|l| l.is_dynamic()).collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass(alloc::format!("{category} slices")));
    }
    let people: Vec<P> = participants.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let partition = participant_folds(&people, None, folds, seed)?;

    let mut scores = Vec::with_capacity(folds);
    for test_people in &partition {
        let test: BTreeSet<&P> = test_people.iter().collect();
        let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
            (0..x.rows()).partition(|&i| test.contains(&participants[i]));
        if test_idx.is_empty() {
            continue;
        }
        let train_labels: Vec<ActionLabel> = train_idx.iter().map(|&i| labels[i]).collect();
        let model = ActionClassifier::fit(category, &x.select_rows(&train_idx), &train_labels, kind, seed)?;
        let truth: Vec<bool> = test_idx.iter().map(|&i| labels[i].is_dynamic()).collect();
        let predicted = test_idx
            .iter()
            .map(|&i| Ok(classify_slice(&model, x.row(i))?.is_dynamic()))
            .collect::<Result<Vec<bool>>>()?;
        let c = Confusion::from_predictions(&truth, &predicted);
        scores.push(FoldScore {
            test_slices: test_idx.len(),
            accuracy: c.accuracy(),
            f1: c.f1(),
        });
    }
    let acc: Vec<f64> = scores.iter().map(|s| s.accuracy).collect();
    let f1: Vec<f64> = scores.iter().map(|s| s.f1).collect();
    let report = CvReport {
        accuracy_mean: mean(&acc),
        accuracy_std: std_dev(&acc),
        f1_mean: mean(&f1),
        f1_std: std_dev(&f1),
        folds: scores,
    };
    let classifier = ActionClassifier::fit(category, x, labels, kind, seed)?;
    Ok((classifier, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::spectrum::trajectory_features;
    use alloc::vec;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Four trajectories per slice; dynamic slices oscillate at 1-2 Hz.
    fn corpus(n: usize, seed: u64) -> (Matrix, Vec<ActionLabel>, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut people = Vec::new();
        for i in 0..n {
            let dynamic = i % 2 == 0;
            let freq = rng.random_range(1.0..2.0);
            let trajectories: Vec<Vec<f64>> = (0..4)
                .map(|k| {
                    let base = rng.random_range(-1.0..1.0);
                    (0..100)
                        .map(|t| {
                            let osc = if dynamic {
                                0.05 * libm::sin(2.0 * crate::math::PI * freq * t as f64 / 26.0 + k as f64)
                            } else {
                                0.0
                            };
                            base + osc + 0.005 * rng.random_range(-1.0..1.0)
                        })
                        .collect()
                })
                .collect();
            let f = trajectory_features(trajectories.iter().map(|v| v.as_slice()), 26.0).unwrap();
            rows.push(f.to_vec());
            labels.push(ActionLabel::from_dynamic(dynamic));
            people.push((i % 10) as u32);
        }
        (Matrix::from_rows(&rows), labels, people)
    }

    #[test]
    fn separable_slices_cross_validate() {
        let (x, y, p) = corpus(120, 1);
        let (clf, report) =
            train_action_classifier(Category::Left, &x, &y, &p, 5, ActionModelKind::Forest, 0).unwrap();
        assert_eq!(report.folds.len(), 5);
        assert!(report.accuracy_mean >= 0.95, "{report:?}");
        let zero = vec![0.0; x.cols()];
        assert_eq!(classify_slice(&clf, &zero).unwrap(), ActionLabel::Static);
        assert_eq!(classify_slice(&clf, x.row(0)).unwrap(), ActionLabel::Dynamic);
        assert_eq!(classify_slice(&clf, x.row(0)).unwrap(), classify_slice(&clf, x.row(0)).unwrap());
    }

    #[test]
    fn linear_option_also_separates() {
        let (x, y, p) = corpus(80, 2);
        let (_, report) =
            train_action_classifier(Category::Leg, &x, &y, &p, 5, ActionModelKind::Linear, 0).unwrap();
        assert!(report.accuracy_mean >= 0.9, "{report:?}");
    }

    #[test]
    fn permuted_labels_near_chance() {
        let (x, mut y, p) = corpus(200, 3);
        y.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
        let (_, report) =
            train_action_classifier(Category::Both, &x, &y, &p, 5, ActionModelKind::Forest, 0).unwrap();
        assert!((report.accuracy_mean - 0.5).abs() <= 0.1, "{report:?}");
    }

    #[test]
    fn errors() {
        let (x, y, p) = corpus(20, 4);
        let all_static = vec![ActionLabel::Static; 20];
        assert!(matches!(
            train_action_classifier(Category::Both, &x, &all_static, &p, 5, ActionModelKind::Forest, 0),
            Err(Error::SingleClass(_))
        ));
        let (clf, _) = train_action_classifier(Category::Both, &x, &y, &p, 5, ActionModelKind::Forest, 0).unwrap();
        assert!(matches!(classify_slice(&clf, &[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }
}
