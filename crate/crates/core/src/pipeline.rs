//! Session-level glue between the stages: preprocessing, location detection,
//! slice features, per-category action models, fidget matrices and the
//! per-frame bundles consumed by fusion.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptors::{detect_locations, AdaptorOptions, LocationTimeline};
use crate::fidgets::{attach_speaking, encode_fidgets, FidgetMatrix, SliceAction, ROW_NAMES};
use crate::folds::participant_folds;
use crate::fusion::{cross_validate_with, CvOutcome, EmbeddingCache, FusionConfig, PreparedFrames, Stage, StageAudit};
use crate::gestures::{body_gesture_features, GestureOptions, FEATURE_NAMES};
use crate::ingest::{preprocess, FeatureTrack, PoseSequence, PreprocessOptions, Preprocessed, SpeakingTrack, TrackKind};
use crate::linalg::Matrix;
use crate::math::{mean, std_dev};
use crate::metrics::Confusion;
use crate::motion::{
    slice_features, slice_sessions, ActionClassifier, ActionLabel, ActionModelKind, Category, LocationCode,
};
use crate::synth::GroundTruth;
use crate::{analysis, Error, Result};

/// Sidecar order inside a frame bundle, after the fidget rows.
pub const BUNDLE_TRACKS: [TrackKind; 3] = [TrackKind::Gaze, TrackKind::Aus, TrackKind::Mfccs];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub preprocess: PreprocessOptions,
    pub adaptors: AdaptorOptions,
    pub gestures: GestureOptions,
    pub action_model: ActionModelKind,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            preprocess: PreprocessOptions::default(),
            adaptors: AdaptorOptions::default(),
            gestures: GestureOptions::default(),
            action_model: ActionModelKind::Forest,
            seed: 0,
        }
    }
}

/// One loaded session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub name: String,
    pub pose: PoseSequence,
    pub tracks: Vec<FeatureTrack>,
    pub speaking: SpeakingTrack,
}

/// Slice features without the raw trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub category: Category,
    pub code: LocationCode,
    pub run: (usize, usize),
    pub start: usize,
    pub features: Vec<f64>,
}

impl SliceRecord {
    pub fn action(&self, label: ActionLabel) -> SliceAction {
        SliceAction {
            category: self.category,
            run: self.run,
            start: self.start,
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSession {
    pub name: String,
    pub preprocessed: Preprocessed,
    pub timeline: LocationTimeline,
    pub slices: Vec<SliceRecord>,
    /// Gap-filled sidecars.
    pub tracks: Vec<FeatureTrack>,
    pub speaking: SpeakingTrack,
}

impl ProcessedSession {
    pub fn frames(&self) -> usize {
        self.preprocessed.seq.len()
    }

    pub fn track(&self, kind: TrackKind) -> Result<&FeatureTrack> {
        self.tracks
            .iter()
            .find(|t| t.kind == kind)
            .ok_or_else(|| Error::invalid(format!("session {} has no {} track", self.name, kind.name())))
    }
}

/// Preprocesses the pose, detects locations and featurizes every slice.
pub fn process_session(data: &SessionData, opts: &PipelineOptions) -> Result<ProcessedSession> {
    let n = data.pose.len();
    for t in &data.tracks {
        if t.frames() != n {
            return Err(Error::DimensionMismatch {
                what: "sidecar frames",
                expected: n,
                got: t.frames(),
            });
        }
    }
    if data.speaking.speaking.len() != n {
        return Err(Error::DimensionMismatch {
            what: "speaking frames",
            expected: n,
            got: data.speaking.speaking.len(),
        });
    }
    let preprocessed = preprocess(&data.pose, &opts.preprocess)?;
    let seq = &preprocessed.seq;
    let timeline = detect_locations(seq, &opts.adaptors);
    let slices = slice_sessions(seq, &timeline)
        .iter()
        .map(|s| {
            Ok(SliceRecord {
                category: s.category,
                code: s.code,
                run: s.run,
                start: s.start,
                features: slice_features(s, seq.fps)?.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tracks = data.tracks.clone();
    for t in &mut tracks {
        t.fill_gaps();
    }
    Ok(ProcessedSession {
        name: data.name.clone(),
        preprocessed,
        timeline,
        slices,
        tracks,
        speaking: data.speaking.clone(),
    })
}

/// Ground-truth action of every slice of a session.
pub fn truth_slice_labels(session: &ProcessedSession, truth: &GroundTruth) -> Result<Vec<ActionLabel>> {
    if truth.timeline.len() != session.frames() {
        return Err(Error::DimensionMismatch {
            what: "ground-truth frames",
            expected: session.frames(),
            got: truth.timeline.len(),
        });
    }
    Ok(session
        .slices
        .iter()
        .map(|s| truth.slice_label(s.category, s.start))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CategoryModel {
    Trained(ActionClassifier),
    /// Training slices of this category carried a single label, or none.
    Constant(ActionLabel),
}

/// One action model per slice category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModels {
    pub models: Vec<(Category, CategoryModel)>,
}

impl ActionModels {
    /// Fits every category from `(slice, label)` pairs.
    pub fn fit<'a, I>(examples: I, kind: ActionModelKind, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a SliceRecord, ActionLabel)>,
    {
        let examples: Vec<(&SliceRecord, ActionLabel)> = examples.into_iter().collect();
        let mut models = Vec::new();
        for category in Category::ALL {
            let rows: Vec<&(&SliceRecord, ActionLabel)> =
                examples.iter().filter(|(s, _)| s.category == category).collect();
            let labels: Vec<ActionLabel> = rows.iter().map(|r| r.1).collect();
            let dynamic = labels.iter().filter(|l| l.is_dynamic()).count();
            let model = if dynamic == 0 || dynamic == labels.len() {
                CategoryModel::Constant(ActionLabel::from_dynamic(dynamic > 0))
            } else {
                let feats: Vec<Vec<f64>> = rows.iter().map(|r| r.0.features.clone()).collect();
                CategoryModel::Trained(ActionClassifier::fit(
                    category,
                    &Matrix::from_rows(&feats),
                    &labels,
                    kind,
                    seed ^ category as u64,
                )?)
            };
            models.push((category, model));
        }
        Ok(Self { models })
    }

    /// Probability of DYNAMIC; constant models score 0 or 1.
    pub fn score(&self, slice: &SliceRecord) -> Result<f64> {
        let model = self
            .models
            .iter()
            .find(|(c, _)| *c == slice.category)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::invalid(format!("no action model for {}", slice.category)))?;
        match model {
            CategoryModel::Constant(l) => Ok(if l.is_dynamic() { 1.0 } else { 0.0 }),
            CategoryModel::Trained(clf) => clf.score(&slice.features),
        }
    }

    pub fn classify(&self, slice: &SliceRecord) -> Result<ActionLabel> {
        Ok(ActionLabel::from_dynamic(self.score(slice)? > 0.5))
    }

    pub fn classify_session(&self, session: &ProcessedSession) -> Result<Vec<ActionLabel>> {
        session.slices.iter().map(|s| self.classify(s)).collect()
    }
}

/// The 9-row fidget matrix (speaking last) under the given slice labels.
pub fn session_fidgets(session: &ProcessedSession, labels: &[ActionLabel]) -> Result<FidgetMatrix> {
    if labels.len() != session.slices.len() {
        return Err(Error::DimensionMismatch {
            what: "slice labels",
            expected: session.slices.len(),
            got: labels.len(),
        });
    }
    let actions: Vec<SliceAction> = session.slices.iter().zip(labels).map(|(s, &l)| s.action(l)).collect();
    attach_speaking(&encode_fidgets(&session.timeline, &actions), &session.speaking)
}

/// Per-frame rows: fidget (9), gaze (8), AUs (35), MFCCs (13).
pub fn frame_bundle(session: &ProcessedSession, fidgets: &FidgetMatrix) -> Result<Matrix> {
    let n = session.frames();
    if fidgets.frames() != n || !fidgets.has_speaking() {
        return Err(Error::invalid("frame bundle needs a 9-row fidget matrix over every frame"));
    }
    let tracks = BUNDLE_TRACKS
        .iter()
        .map(|&k| session.track(k))
        .collect::<Result<Vec<_>>>()?;
    let width = fidgets.rows.len() + tracks.iter().map(|t| t.kind.dim()).sum::<usize>();
    let mut m = Matrix::zeros(n, width);
    for t in 0..n {
        let row = m.row_mut(t);
        let mut c = 0;
        for r in &fidgets.rows {
            row[c] = r[t] as f64;
            c += 1;
        }
        for tr in &tracks {
            for d in 0..tr.values.rows() {
                row[c] = tr.values.get(d, t);
                c += 1;
            }
        }
    }
    Ok(m)
}

/// Trains action models on the training sessions only, then encodes every
/// session. `slice_labels[i]` labels the slices of `sessions[i]`.
pub fn prepare_fold(
    sessions: &[ProcessedSession],
    slice_labels: &[Vec<ActionLabel>],
    train: &[usize],
    fold: Option<usize>,
    kind: ActionModelKind,
    seed: u64,
) -> Result<(ActionModels, PreparedFrames)> {
    if slice_labels.len() != sessions.len() {
        return Err(Error::DimensionMismatch {
            what: "slice label sets",
            expected: sessions.len(),
            got: slice_labels.len(),
        });
    }
    let names: Vec<String> = sessions.iter().map(|s| s.name.clone()).collect();
    let mut owners = Vec::new();
    let mut examples = Vec::new();
    for &i in train {
        for (s, &l) in sessions[i].slices.iter().zip(&slice_labels[i]) {
            owners.push(i);
            examples.push((s, l));
        }
    }
    let models = ActionModels::fit(examples, kind, seed)?;
    let audit = StageAudit::from_owners(Stage::MotionClassifier, fold, &owners, &names);
    let frames = sessions
        .iter()
        .map(|s| frame_bundle(s, &session_fidgets(s, &models.classify_session(s)?)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        models,
        PreparedFrames {
            frames,
            audit: alloc::vec![audit],
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionFold {
    pub test: Vec<String>,
    pub slices: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionCvReport {
    /// Mean of the per-fold accuracies over all categories pooled.
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    /// `(category, correct, total)` over all folds.
    pub per_category: Vec<(Category, usize, usize)>,
    pub folds: Vec<MotionFold>,
}

/// Participant-independent CV of the per-category action models.
pub fn motion_cross_validate(
    sessions: &[ProcessedSession],
    slice_labels: &[Vec<ActionLabel>],
    folds: usize,
    kind: ActionModelKind,
    seed: u64,
) -> Result<MotionCvReport> {
    let names: Vec<String> = sessions.iter().map(|s| s.name.clone()).collect();
    let partition = participant_folds(&names, None, folds, seed)?;
    let mut per_category: Vec<(Category, usize, usize)> = Category::ALL.iter().map(|&c| (c, 0, 0)).collect();
    let mut out = Vec::new();
    let mut f1s = Vec::new();
    for test_names in partition {
        let test: BTreeSet<&String> = test_names.iter().collect();
        let train: Vec<usize> = (0..sessions.len()).filter(|&i| !test.contains(&names[i])).collect();
        let mut examples = Vec::new();
        for &i in &train {
            examples.extend(sessions[i].slices.iter().zip(slice_labels[i].iter().copied()));
        }
        let models = ActionModels::fit(examples, kind, seed)?;
        let (mut truth, mut predicted) = (Vec::new(), Vec::new());
        for i in (0..sessions.len()).filter(|i| test.contains(&names[*i])) {
            for (s, l) in sessions[i].slices.iter().zip(&slice_labels[i]) {
                let p = models.classify(s)?;
                let slot = per_category.iter_mut().find(|c| c.0 == s.category).expect("all categories listed");
                slot.2 += 1;
                slot.1 += (p == *l) as usize;
                truth.push(l.is_dynamic());
                predicted.push(p.is_dynamic());
            }
        }
        if truth.is_empty() {
            continue;
        }
        let c = Confusion::from_predictions(&truth, &predicted);
        f1s.push(c.f1());
        out.push(MotionFold {
            test: test_names.clone(),
            slices: truth.len(),
            accuracy: c.accuracy(),
        });
    }
    let acc: Vec<f64> = out.iter().map(|f| f.accuracy).collect();
    Ok(MotionCvReport {
        accuracy_mean: mean(&acc),
        accuracy_std: std_dev(&acc),
        f1_mean: mean(&f1s),
        per_category,
        folds: out,
    })
}

/// Fusion cross-validation where each fold's action models are trained on
/// that fold's training sessions only. `cache` may be shared between calls
/// that use the same sessions, slice labels and configuration apart from the
/// distress labels.
pub fn fusion_cross_validate(
    sessions: &[ProcessedSession],
    slice_labels: &[Vec<ActionLabel>],
    labels: &[bool],
    config: &FusionConfig,
    action_model: ActionModelKind,
    cache: &mut EmbeddingCache,
) -> Result<CvOutcome> {
    let names: Vec<String> = sessions.iter().map(|s| s.name.clone()).collect();
    cross_validate_with(
        &names,
        labels,
        config,
        |fold, train| Ok(prepare_fold(sessions, slice_labels, train, Some(fold), action_model, config.seed)?.1),
        cache,
    )
}

/// Mean F1 of `fusion_cross_validate` under each of `rounds` random
/// permutations of the distress labels.
pub fn shuffled_f1(
    sessions: &[ProcessedSession],
    slice_labels: &[Vec<ActionLabel>],
    labels: &[bool],
    config: &FusionConfig,
    action_model: ActionModelKind,
    rounds: usize,
    cache: &mut EmbeddingCache,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5f);
    (0..rounds)
        .map(|_| {
            let mut y = labels.to_vec();
            y.shuffle(&mut rng);
            Ok(fusion_cross_validate(sessions, slice_labels, &y, config, action_model, cache)?.f1_mean)
        })
        .collect()
}

/// Names of the session-level analysis features: the gesture descriptor
/// followed by the fidget averages.
pub fn analysis_feature_names() -> Vec<String> {
    FEATURE_NAMES
        .iter()
        .chain(ROW_NAMES.iter())
        .map(|s| s.to_string())
        .collect()
}

/// Gesture descriptor plus average fidget activations of one session.
pub fn analysis_features(session: &ProcessedSession, fidgets: &FidgetMatrix, opts: &GestureOptions) -> Result<Vec<f64>> {
    let g = body_gesture_features(&session.preprocessed.seq, opts)?;
    let mut v = g.features.to_array().to_vec();
    v.extend(analysis::average_fidget(fidgets)?);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{benchmark_scripts, generate};

    fn small() -> (Vec<ProcessedSession>, Vec<Vec<ActionLabel>>, Vec<GroundTruth>) {
        let mut sessions = Vec::new();
        let mut labels = Vec::new();
        let mut truths = Vec::new();
        for p in benchmark_scripts(6, 11).unwrap() {
            let mut script = p.script.clone();
            script.duration = 40.0;
            script.events.retain(|e| e.end <= 40.0);
            script.speaking.retain(|s| s[1] <= 40.0);
            let out = generate(&script).unwrap();
            let data = SessionData {
                name: p.record.session.clone(),
                pose: out.pose,
                tracks: out.tracks,
                speaking: out.speaking,
            };
            let s = process_session(&data, &PipelineOptions::default()).unwrap();
            labels.push(truth_slice_labels(&s, &out.truth).unwrap());
            truths.push(out.truth);
            sessions.push(s);
        }
        (sessions, labels, truths)
    }

    #[test]
    fn fold_preparation_audits_training_sessions_only() {
        let (sessions, labels, truths) = small();
        let train = [0, 1, 2, 3];
        let (models, prepared) = prepare_fold(&sessions, &labels, &train, Some(0), ActionModelKind::Forest, 1).unwrap();
        assert_eq!(models.models.len(), 4);
        assert_eq!(prepared.frames.len(), 6);
        assert_eq!(prepared.frames[0].cols(), 65);
        assert_eq!(prepared.frames[0].rows(), sessions[0].frames());
        let a = &prepared.audit[0];
        assert_eq!(a.stage, Stage::MotionClassifier);
        assert!(a.participants.iter().all(|p| p != &sessions[4].name && p != &sessions[5].name));

        // hand fidget rows of the bundle follow the truth closely; this
        // training split has no moving legs
        let truth = truths[4].fidgets();
        let frames = &prepared.frames[4];
        let agree = (0..frames.rows())
            .filter(|&t| (0..7).all(|r| frames.get(t, r) as u8 == truth.rows[r][t]))
            .count();
        assert!(agree as f64 > 0.95 * frames.rows() as f64, "{agree}");
    }

    #[test]
    fn motion_cv_separates_oscillation() {
        let (sessions, labels, _) = small();
        let r = motion_cross_validate(&sessions, &labels, 3, ActionModelKind::Forest, 2).unwrap();
        assert!(r.accuracy_mean > 0.9, "{r:?}");
    }

    #[test]
    fn analysis_vector_shape() {
        let (sessions, labels, _) = small();
        let f = session_fidgets(&sessions[0], &labels[0]).unwrap();
        let v = analysis_features(&sessions[0], &f, &GestureOptions::default()).unwrap();
        assert_eq!(v.len(), analysis_feature_names().len());
        assert_eq!(v.len(), 29);
    }
}
