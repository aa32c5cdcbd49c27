//! Multimodal fusion: per-frame DDAE codes, GMM + Improved Fisher Vector
//! session embeddings, forest feature selection and distress classifiers,
//! evaluated under participant-independent cross-validation.

pub mod classify;
pub mod ddae;
pub mod fisher;
pub mod gmm;
pub mod select;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::folds::participant_folds;
use crate::linalg::Matrix;
use crate::math::{mean, std_dev};
use crate::metrics::Confusion;
use crate::{Error, Result};

pub use classify::{smooth_labels, smoothed_target, train_distress_classifier, ClassifierKind, DistressClassifier};
pub use ddae::{train_ddae, Architecture, DdaeModel, DdaeOptions, TrainingLog};
pub use fisher::{embedding_len, fisher_vector};
pub use gmm::{fit_gmm, GmmModel, GmmOptions};
pub use select::select_features;

/// PHQ-8 score above which a participant is labelled depressed.
pub const PHQ_THRESHOLD: f64 = 6.63;
/// GAD-7 score above which a participant is labelled anxious.
pub const GAD_THRESHOLD: f64 = 5.57;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub session: String,
    pub phq8: f64,
    pub gad7: f64,
}

impl ParticipantRecord {
    pub fn new(session: String, phq8: f64, gad7: f64) -> Result<Self> {
        if !(0.0..=24.0).contains(&phq8) || !(0.0..=21.0).contains(&gad7) {
            return Err(Error::invalid(alloc::format!(
                "{session}: questionnaire scores out of range ({phq8}, {gad7})"
            )));
        }
        Ok(Self { session, phq8, gad7 })
    }

    pub fn depressed(&self) -> bool {
        self.phq8 > PHQ_THRESHOLD
    }

    pub fn anxious(&self) -> bool {
        self.gad7 > GAD_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub dim: usize,
    pub weight: f64,
}

/// Fidget (9), Gaze (8), AUs (35), MFCCs (13), in frame-bundle column order.
pub fn default_groups() -> Vec<FeatureGroup> {
    [("Fidget", 9, ddae::FIDGET_WEIGHT), ("Gaze", 8, ddae::OTHER_WEIGHT), ("AUs", 35, ddae::OTHER_WEIGHT), ("MFCCs", 13, ddae::OTHER_WEIGHT)]
        .into_iter()
        .map(|(name, dim, weight)| FeatureGroup {
            name: name.into(),
            dim,
            weight,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub groups: Vec<FeatureGroup>,
    pub k: usize,
    pub rf_num: usize,
    pub smoothing: f64,
    pub folds: usize,
    pub seed: u64,
    pub classifier: ClassifierKind,
    pub ddae: DdaeOptions,
    pub gmm: GmmOptions,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            groups: default_groups(),
            k: gmm::DEFAULT_COMPONENTS,
            rf_num: select::DEFAULT_RF_NUM,
            smoothing: 0.4,
            folds: 3,
            seed: 0,
            classifier: ClassifierKind::Mlp,
            ddae: DdaeOptions::default(),
            gmm: GmmOptions::default(),
        }
    }
}

impl FusionConfig {
    pub fn input_width(&self) -> usize {
        self.groups.iter().map(|g| g.dim).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() || self.groups.iter().any(|g| g.dim == 0 || !(g.weight >= 0.0)) {
            return Err(Error::invalid("feature groups need positive widths and non-negative weights"));
        }
        if self.k == 0 {
            return Err(Error::invalid("K must be positive"));
        }
        if self.rf_num == 0 {
            return Err(Error::invalid("rf_num must be positive"));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::invalid("smoothing must lie in [0, 1)"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("at least two folds are needed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    MotionClassifier,
    Ddae,
    Gmm,
    FeatureSelection,
    Classifier,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::MotionClassifier => "motion_classifier",
            Stage::Ddae => "ddae",
            Stage::Gmm => "gmm",
            Stage::FeatureSelection => "feature_selection",
            Stage::Classifier => "classifier",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which participants' rows a fitted stage consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageAudit {
    pub stage: Stage,
    pub fold: Option<usize>,
    /// Sorted, unique owners of the training rows.
    pub participants: Vec<String>,
    pub rows: usize,
}

impl StageAudit {
    /// Records the owners of `rows`, where `owners[r]` indexes `names`.
    pub fn from_owners(stage: Stage, fold: Option<usize>, owners: &[usize], names: &[String]) -> Self {
        let set: BTreeSet<&String> = owners.iter().map(|&o| &names[o]).collect();
        Self {
            stage,
            fold,
            participants: set.into_iter().cloned().collect(),
            rows: owners.len(),
        }
    }
}

/// Fails if any audited stage of `fold` consumed a test participant.
pub fn check_no_leak(audit: &[StageAudit], fold: usize, test: &[String]) -> Result<()> {
    let test: BTreeSet<&String> = test.iter().collect();
    for a in audit.iter().filter(|a| a.fold == Some(fold)) {
        if let Some(p) = a.participants.iter().find(|p| test.contains(p)) {
            return Err(Error::Leak {
                stage: a.stage.to_string(),
                fold,
                participant: p.clone(),
            });
        }
    }
    Ok(())
}

/// The unsupervised part of the stack: DDAE codes pooled by a GMM into
/// Fisher Vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEncoder {
    pub ddae: DdaeModel,
    pub gmm: GmmModel,
}

impl SessionEncoder {
    /// Fits on every row of `frames[i]` for `i` in `train`.
    pub fn fit(
        frames: &[Matrix],
        train: &[usize],
        names: &[String],
        config: &FusionConfig,
        fold: Option<usize>,
    ) -> Result<(Self, Vec<StageAudit>)> {
        let width = config.input_width();
        let mut owners = Vec::new();
        let mut data = Vec::new();
        for &i in train {
            if frames[i].cols() != width {
                return Err(Error::DimensionMismatch {
                    what: "frame bundle width",
                    expected: width,
                    got: frames[i].cols(),
                });
            }
            owners.extend(core::iter::repeat_n(i, frames[i].rows()));
            data.extend_from_slice(frames[i].as_slice());
        }
        let data = Matrix::from_vec(owners.len(), width, data);
        let dims: Vec<usize> = config.groups.iter().map(|g| g.dim).collect();
        let weights: Vec<f64> = config.groups.iter().map(|g| g.weight).collect();
        let ddae_opts = DdaeOptions {
            seed: config.seed ^ 0xdd,
            ..config.ddae.clone()
        };
        let (ddae, _) = train_ddae(&data, &dims, &weights, &ddae_opts)?;
        let mut audit = alloc::vec![StageAudit::from_owners(Stage::Ddae, fold, &owners, names)];
        let latents = ddae.encode(&data)?;
        let gmm_opts = GmmOptions {
            seed: config.seed ^ 0x6a,
            ..config.gmm
        };
        let (gmm, _) = fit_gmm(&latents, config.k, &gmm_opts)?;
        audit.push(StageAudit::from_owners(Stage::Gmm, fold, &owners, names));
        Ok((Self { ddae, gmm }, audit))
    }

    pub fn embed(&self, frames: &Matrix) -> Result<Vec<f64>> {
        fisher_vector(&self.ddae.encode(frames)?, &self.gmm)
    }

    pub fn embedding_len(&self) -> usize {
        embedding_len(self.gmm.components(), self.gmm.dim())
    }
}

/// Feature selection plus classifier on top of session embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingClassifier {
    pub selected: Vec<usize>,
    pub classifier: DistressClassifier,
}

impl EmbeddingClassifier {
    pub fn fit(
        embeddings: &[Vec<f64>],
        labels: &[bool],
        train: &[usize],
        names: &[String],
        config: &FusionConfig,
        fold: Option<usize>,
    ) -> Result<(Self, Vec<StageAudit>)> {
        let rows: Vec<Vec<f64>> = train.iter().map(|&i| embeddings[i].clone()).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let rf_num = config.rf_num.min(x.cols());
        let selected = select_features(&x, &y, rf_num, config.seed ^ 0x5e)?;
        let mut audit = alloc::vec![StageAudit::from_owners(Stage::FeatureSelection, fold, train, names)];
        let classifier = train_distress_classifier(
            &x.select_cols(&selected),
            &y,
            config.classifier,
            config.smoothing,
            config.seed ^ 0xc1,
        )?;
        audit.push(StageAudit::from_owners(Stage::Classifier, fold, train, names));
        Ok((Self { selected, classifier }, audit))
    }

    pub fn predict_proba(&self, embedding: &[f64]) -> f64 {
        let x: Vec<f64> = self.selected.iter().map(|&j| embedding[j]).collect();
        self.classifier.predict_proba(&x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub config: FusionConfig,
    pub encoder: SessionEncoder,
    pub head: EmbeddingClassifier,
}

impl FusionModel {
    pub fn predict_proba(&self, frames: &Matrix) -> Result<f64> {
        Ok(self.head.predict_proba(&self.encoder.embed(frames)?))
    }

    pub fn predict(&self, frames: &Matrix) -> Result<bool> {
        Ok(self.predict_proba(frames)? > 0.5)
    }
}

/// Fits every stage on all sessions.
pub fn train_fusion(
    names: &[String],
    frames: &[Matrix],
    labels: &[bool],
    config: &FusionConfig,
) -> Result<(FusionModel, Vec<StageAudit>)> {
    config.validate()?;
    check_lengths(names, frames.len(), labels)?;
    let all: Vec<usize> = (0..frames.len()).collect();
    let (encoder, mut audit) = SessionEncoder::fit(frames, &all, names, config, None)?;
    let embeddings = frames.iter().map(|f| encoder.embed(f)).collect::<Result<Vec<_>>>()?;
    let (head, a) = EmbeddingClassifier::fit(&embeddings, labels, &all, names, config, None)?;
    audit.extend(a);
    Ok((
        FusionModel {
            config: config.clone(),
            encoder,
            head,
        },
        audit,
    ))
}

fn check_lengths(names: &[String], n: usize, labels: &[bool]) -> Result<()> {
    if names.len() != n || labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "sessions",
            expected: n,
            got: names.len().min(labels.len()),
        });
    }
    Ok(())
}

/// Per-session frame bundles built for one fold, plus the audits of any
/// supervised stage used to build them.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFrames {
    pub frames: Vec<Matrix>,
    pub audit: Vec<StageAudit>,
}

/// Embeddings of every session under a fold's encoder, keyed by the sorted
/// training-session indices. The unsupervised stages depend only on the
/// training sessions, so folds with identical training sets can share them.
pub type EmbeddingCache = BTreeMap<Vec<usize>, (Vec<Vec<f64>>, Vec<StageAudit>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub truth: Vec<bool>,
    pub predicted: Vec<bool>,
    pub probabilities: Vec<f64>,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub f1_mean: f64,
    pub f1_std: f64,
    pub folds: Vec<FoldOutcome>,
    pub audit: Vec<StageAudit>,
}

/// Participant-independent cross-validation with static frame bundles.
pub fn cross_validate(
    names: &[String],
    frames: &[Matrix],
    labels: &[bool],
    config: &FusionConfig,
) -> Result<CvOutcome> {
    let mut cache = EmbeddingCache::new();
    cross_validate_with(
        names,
        labels,
        config,
        |_, _| {
            Ok(PreparedFrames {
                frames: frames.to_vec(),
                audit: Vec::new(),
            })
        },
        &mut cache,
    )
}

/// Cross-validation where `prepare(fold, train)` builds every session's
/// frame bundle using only the training sessions `train`. Every fitted
/// stage's audit is checked against the fold's test participants.
pub fn cross_validate_with<F>(
    names: &[String],
    labels: &[bool],
    config: &FusionConfig,
    mut prepare: F,
    cache: &mut EmbeddingCache,
) -> Result<CvOutcome>
where
    F: FnMut(usize, &[usize]) -> Result<PreparedFrames>,
{
    config.validate()?;
    check_lengths(names, names.len(), labels)?;
    let index: BTreeMap<&String, usize> = names.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let partition = participant_folds(names, Some(labels), config.folds, config.seed)?;

    let mut audit = Vec::new();
    let mut folds = Vec::new();
    for (fold, test_names) in partition.iter().enumerate() {
        let test: Vec<usize> = test_names.iter().map(|n| index[n]).collect();
        let train: Vec<usize> = (0..names.len()).filter(|i| !test.contains(i)).collect();

        let (embeddings, mut fold_audit) = match cache.get(&train) {
            Some((e, a)) => (e.clone(), a.clone()),
            None => {
                let prepared = prepare(fold, &train)?;
                if prepared.frames.len() != names.len() {
                    return Err(Error::DimensionMismatch {
                        what: "prepared sessions",
                        expected: names.len(),
                        got: prepared.frames.len(),
                    });
                }
                let (encoder, mut a) = SessionEncoder::fit(&prepared.frames, &train, names, config, Some(fold))?;
                a.splice(0..0, prepared.audit);
                let e = prepared
                    .frames
                    .iter()
                    .map(|f| encoder.embed(f))
                    .collect::<Result<Vec<_>>>()?;
                cache.insert(train.clone(), (e.clone(), a.clone()));
                (e, a)
            }
        };
        for a in &mut fold_audit {
            a.fold = Some(fold);
        }
        let (head, a) = EmbeddingClassifier::fit(&embeddings, labels, &train, names, config, Some(fold))?;
        fold_audit.extend(a);
        check_no_leak(&fold_audit, fold, test_names)?;

        let probabilities: Vec<f64> = test.iter().map(|&i| head.predict_proba(&embeddings[i])).collect();
        let predicted: Vec<bool> = probabilities.iter().map(|&p| p > 0.5).collect();
        let truth: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        let f1 = Confusion::from_predictions(&truth, &predicted).f1();
        folds.push(FoldOutcome {
            fold,
            train: train.iter().map(|&i| names[i].clone()).collect(),
            test: test_names.clone(),
            truth,
            predicted,
            probabilities,
            f1,
        });
        audit.extend(fold_audit);
    }
    let f1s: Vec<f64> = folds.iter().map(|f| f.f1).collect();
    Ok(CvOutcome {
        f1_mean: mean(&f1s),
        f1_std: std_dev(&f1s),
        folds,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_config() -> FusionConfig {
        FusionConfig {
            groups: vec![
                FeatureGroup { name: "a".into(), dim: 3, weight: 0.35 },
                FeatureGroup { name: "b".into(), dim: 4, weight: 0.1 },
            ],
            k: 4,
            rf_num: 20,
            smoothing: 0.2,
            folds: 3,
            seed: 1,
            classifier: ClassifierKind::Lr,
            ddae: DdaeOptions { epochs: 5, max_frames: 1500, ..DdaeOptions::default() },
            gmm: GmmOptions { max_iter: 30, ..GmmOptions::default() },
        }
    }

    fn sessions(n: usize, shift: f64, seed: u64) -> (Vec<String>, Vec<Matrix>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut frames = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let rows: Vec<Vec<f64>> = (0..150)
                .map(|_| {
                    (0..7)
                        .map(|j| rng.random_range(-1.0..1.0) + if label && j < 3 { shift } else { 0.0 })
                        .collect()
                })
                .collect();
            names.push(format!("p{i:02}"));
            frames.push(Matrix::from_rows(&rows));
            labels.push(label);
        }
        (names, frames, labels)
    }

    #[test]
    fn separable_cohorts_score_perfectly() {
        let (names, frames, labels) = sessions(9, 2.0, 3);
        let out = cross_validate(&names, &frames, &labels, &tiny_config()).unwrap();
        assert_eq!(out.folds.len(), 3);
        assert!(out.folds.iter().all(|f| f.f1 == 1.0), "{:?}", out.folds);
        for f in &out.folds {
            let train: BTreeSet<&String> = f.train.iter().collect();
            assert!(f.test.iter().all(|t| !train.contains(t)));
        }
        // every stage audited once per fold
        assert_eq!(out.audit.len(), 3 * 4);
    }

    #[test]
    fn leak_is_detected() {
        let audit = vec![StageAudit {
            stage: Stage::Gmm,
            fold: Some(1),
            participants: vec!["a".into(), "b".into()],
            rows: 10,
        }];
        assert!(check_no_leak(&audit, 1, &["c".into()]).is_ok());
        assert!(check_no_leak(&audit, 0, &["b".into()]).is_ok());
        let err = check_no_leak(&audit, 1, &["b".into()]).unwrap_err();
        assert!(matches!(err, Error::Leak { fold: 1, .. }));
    }

    #[test]
    fn leaky_preparer_is_rejected() {
        let (names, frames, labels) = sessions(6, 1.0, 4);
        let mut cache = EmbeddingCache::new();
        let leaky = |fold: usize, _: &[usize]| {
            Ok(PreparedFrames {
                frames: frames.clone(),
                audit: vec![StageAudit {
                    stage: Stage::MotionClassifier,
                    fold: Some(fold),
                    participants: names.clone(),
                    rows: 6,
                }],
            })
        };
        let err = cross_validate_with(&names, &labels, &tiny_config(), leaky, &mut cache).unwrap_err();
        assert!(matches!(err, Error::Leak { .. }));
    }

    #[test]
    fn too_many_folds() {
        let (names, frames, labels) = sessions(2, 1.0, 5);
        assert!(matches!(
            cross_validate(&names, &frames, &labels, &tiny_config()),
            Err(Error::TooFewParticipants { .. })
        ));
    }

    #[test]
    fn record_thresholds() {
        let r = ParticipantRecord::new("s".into(), 7.0, 5.0).unwrap();
        assert!(r.depressed() && !r.anxious());
        let r = ParticipantRecord::new("s".into(), 6.63, 5.57).unwrap();
        assert!(!r.depressed() && !r.anxious());
        assert!(ParticipantRecord::new("s".into(), 25.0, 0.0).is_err());
    }

    #[test]
    fn trained_model_predicts_deterministically() {
        let (names, frames, labels) = sessions(6, 2.0, 6);
        let (m, audit) = train_fusion(&names, &frames, &labels, &tiny_config()).unwrap();
        assert_eq!(audit.len(), 4);
        let a = m.predict_proba(&frames[0]).unwrap();
        assert_eq!(a, m.predict_proba(&frames[0]).unwrap());
        assert_eq!(m.encoder.embedding_len(), 2 * 4 * m.encoder.ddae.latent_dim());
    }
}
