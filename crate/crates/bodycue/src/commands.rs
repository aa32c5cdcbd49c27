//! One function per subcommand. Every run ends by writing its manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bodycue_core::adaptors::DetectionScore;
use bodycue_core::analysis::{feature_search, krippendorff_alpha, linear_classify, polarity, PolarityReport};
use bodycue_core::fidgets::ROW_NAMES;
use bodycue_core::fusion::{train_fusion, EmbeddingCache, ParticipantRecord, StageAudit};
use bodycue_core::gestures::{body_gesture_features, FEATURE_NAMES};
use bodycue_core::linalg::Matrix;
use bodycue_core::metrics::Confusion;
use bodycue_core::motion::ActionLabel;
use bodycue_core::pipeline::{
    analysis_feature_names, analysis_features, frame_bundle, fusion_cross_validate, motion_cross_validate,
    process_session, session_fidgets, shuffled_f1, truth_slice_labels, ActionModels, ProcessedSession,
};
use bodycue_core::synth::{GroundTruth, Script};
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, RunConfig, DEFAULT_PARTICIPANTS};
use crate::corpus::{self, Corpus, SessionEntry};
use crate::error::{Error, Result};
use crate::formats;
use crate::manifest::{hash_entry, sha256_file, FileHash, Manifest, Versions, MANIFEST_FILE};
use crate::model::{self, MotionModelFile, BUNDLE_FILES};

/// Output directory plus the bookkeeping the manifest needs.
struct Run<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    inputs: Vec<FileHash>,
    outputs: BTreeSet<String>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            out: cfg.out()?.to_path_buf(),
            inputs: Vec::new(),
            outputs: BTreeSet::new(),
        })
    }

    /// Registers an output file and returns its path.
    fn output(&mut self, rel: &str) -> PathBuf {
        self.outputs.insert(rel.to_string());
        self.out.join(rel)
    }

    fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.output(rel);
        formats::write_json(&path, value)
    }

    fn table<I: IntoIterator<Item = Vec<String>>>(&mut self, rel: &str, header: &[&str], rows: I) -> Result<()> {
        let path = self.output(rel);
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        formats::write_table(&path, &header, rows)
    }

    fn input(&mut self, label: String, path: &Path) -> Result<()> {
        self.inputs.push(hash_entry(label, path)?);
        Ok(())
    }

    fn finish(mut self, command: Command) -> Result<Manifest> {
        self.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.inputs.dedup();
        let outputs = self
            .outputs
            .iter()
            .map(|rel| hash_entry(rel.clone(), &self.out.join(rel)))
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            command: command.to_string(),
            versions: Versions::current(),
            config: self.cfg.recorded(),
            config_hash: self.cfg.hash(),
            inputs: std::mem::take(&mut self.inputs),
            outputs,
        };
        manifest.write(&self.out)?;
        log::info!("wrote {}", self.out.join(MANIFEST_FILE).display());
        Ok(manifest)
    }
}

/// Validates `cfg` for `command`, runs it and writes the manifest.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate(command)?;
    let mut run = Run::new(cfg)?;
    match command {
        Command::Synth => synth(&mut run)?,
        Command::Ingest => ingest(&mut run)?,
        Command::GestureStats => gesture_stats(&mut run)?,
        Command::DetectAdaptors => detect_adaptors(&mut run)?,
        Command::ClassifyMotion => classify_motion(&mut run)?,
        Command::EncodeFidgets => encode_fidgets(&mut run)?,
        Command::TrainFusion => train(&mut run)?,
        Command::Evaluate => evaluate(&mut run)?,
        Command::Analyze => analyze(&mut run)?,
    }
    run.finish(command)
}

fn synth(run: &mut Run) -> Result<()> {
    let out = run.out.clone();
    let index = match &run.cfg.script {
        Some(path) => {
            let script: Script = formats::read_json(path).map_err(|e| Error::Config(e.to_string()))?;
            run.input(format!("script:{}", file_name(path)), path)?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
            corpus::write_script_corpus(&out, name, &script)?
        }
        None => corpus::make_benchmark(
            &out,
            run.cfg.n_participants.unwrap_or(DEFAULT_PARTICIPANTS),
            run.cfg.seed()?,
        )?,
    };
    let written = Corpus {
        root: out,
        schema: bodycue_core::synth::body::schema(),
        index,
    };
    let entries: Vec<&SessionEntry> = written.index.sessions.iter().collect();
    for f in written.files(&entries) {
        run.outputs.insert(f);
    }
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// The corpus and the selected sessions, with their files hashed as inputs.
fn open_corpus(run: &mut Run) -> Result<(Corpus, Vec<SessionEntry>)> {
    let corpus = Corpus::open(run.cfg.corpus()?)?;
    let entries: Vec<SessionEntry> = corpus.select(run.cfg.sessions.as_deref())?.into_iter().cloned().collect();
    if entries.is_empty() {
        return Err(Error::Data("no sessions selected".into()));
    }
    let refs: Vec<&SessionEntry> = entries.iter().collect();
    for rel in corpus.files(&refs) {
        run.input(format!("corpus:{rel}"), &corpus.path(&rel))?;
    }
    Ok((corpus, entries))
}

fn process_all(run: &Run, corpus: &Corpus, entries: &[SessionEntry]) -> Result<Vec<ProcessedSession>> {
    let opts = run.cfg.pipeline();
    entries
        .iter()
        .map(|e| {
            log::info!("processing {}", e.name);
            let data = corpus.load(e, run.cfg.participant_speaker.as_deref())?.into_data(&e.name);
            let s = process_session(&data, &opts)?;
            for w in &s.preprocessed.warnings {
                log::warn!("{}: {w}", e.name);
            }
            Ok(s)
        })
        .collect()
}

/// Ground truth of every session, or `None` if any session lacks it.
fn all_truth(corpus: &Corpus, entries: &[SessionEntry]) -> Result<Option<Vec<GroundTruth>>> {
    entries.iter().map(|e| corpus.truth(e)).collect()
}

fn truth_labels(sessions: &[ProcessedSession], truth: &[GroundTruth]) -> Result<Vec<Vec<ActionLabel>>> {
    sessions
        .iter()
        .zip(truth)
        .map(|(s, t)| Ok(truth_slice_labels(s, t)?))
        .collect()
}

/// Participant labels in session order.
fn participant_labels(run: &Run, corpus: &Corpus, entries: &[SessionEntry]) -> Result<Vec<bool>> {
    let records = corpus
        .labels()?
        .ok_or_else(|| Error::Data("corpus has no labels file".into()))?;
    let by_name: BTreeMap<&str, &ParticipantRecord> = records.iter().map(|r| (r.session.as_str(), r)).collect();
    let target = run.cfg.target();
    entries
        .iter()
        .map(|e| {
            by_name
                .get(e.name.as_str())
                .map(|r| target.label(r))
                .ok_or_else(|| Error::Data(format!("labels file has no row for session `{}`", e.name)))
        })
        .collect()
}

fn load_motion(run: &mut Run, corpus: &Corpus) -> Result<Option<MotionModelFile>> {
    match &run.cfg.motion_model {
        Some(path) => {
            let m = model::load_motion_model(path, &corpus.schema)?;
            run.input(format!("motion_model:{}", file_name(path)), path)?;
            Ok(Some(m))
        }
        None => Ok(None),
    }
}

/// The configured motion model, else models fitted on ground truth.
fn action_models(
    run: &mut Run,
    corpus: &Corpus,
    sessions: &[ProcessedSession],
    truth: Option<&[GroundTruth]>,
) -> Result<MotionModelFile> {
    if let Some(m) = load_motion(run, corpus)? {
        return Ok(m);
    }
    let truth = truth.ok_or_else(|| {
        Error::Model("no motion model given (`motion_model`) and the corpus has no ground truth to train one".into())
    })?;
    let labels = truth_labels(sessions, truth)?;
    let kind = run.cfg.action_model();
    let examples = sessions.iter().zip(&labels).flat_map(|(s, l)| s.slices.iter().zip(l.iter().copied()));
    Ok(MotionModelFile {
        kind,
        models: ActionModels::fit(examples, kind, run.cfg.seed()?)?,
    })
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn ingest(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    let mut summary = Vec::new();
    for s in &sessions {
        let dir = format!("ingest/{}", s.name);
        formats::write_pose(&run.output(&format!("{dir}/pose.jsonl")), &s.preprocessed.seq)?;
        for t in &s.tracks {
            let rel = format!("{dir}/{}.csv", t.kind.name().to_lowercase());
            formats::write_track(&run.output(&rel), t, s.preprocessed.seq.fps)?;
        }
        run.table(
            &format!("{dir}/speaking.csv"),
            &["frame", "speaking"],
            s.speaking.speaking.iter().enumerate().map(|(t, &v)| vec![t.to_string(), (v as u8).to_string()]),
        )?;
        summary.push(json!({
            "session": s.name,
            "frames": s.frames(),
            "fps": s.preprocessed.seq.fps,
            "torso_length": s.preprocessed.torso_length,
            "speaking_frames": s.speaking.speaking.iter().filter(|&&v| v).count(),
            "warnings": s.preprocessed.warnings,
        }));
    }
    run.json("ingest.json", &summary)
}

fn gesture_stats(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let opts = run.cfg.gestures();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for s in process_all(run, &corpus, &entries)? {
        let g = body_gesture_features(&s.preprocessed.seq, &opts)?;
        let mut row = vec![s.name.clone()];
        row.extend(g.features.to_array().iter().map(|&v| fmt_f(v)));
        rows.push(row);
        details.push(json!({
            "session": s.name,
            "thresholds": g.thresholds,
            "gestures": g.gestures,
        }));
    }
    let mut header = vec!["session"];
    header.extend(FEATURE_NAMES);
    run.table("gesture_stats.csv", &header, rows)?;
    run.json("gestures.json", &details)
}

fn detect_adaptors(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    let mut total = DetectionScore::default();
    let mut scored = false;
    let (mut hand_detected, mut hand_truth) = (Vec::new(), Vec::new());
    let (mut leg_detected, mut leg_truth) = (Vec::new(), Vec::new());
    let mut per_session = Vec::new();
    for (s, e) in sessions.iter().zip(&entries) {
        let tl = &s.timeline;
        run.table(
            &format!("locations/{}.csv", s.name),
            &["frame", "left_code", "right_code", "leg_code"],
            (0..tl.len()).map(|t| {
                vec![
                    t.to_string(),
                    tl.left[t].to_string(),
                    tl.right[t].to_string(),
                    tl.legs[t].to_string(),
                ]
            }),
        )?;
        let mut entry = json!({ "session": s.name, "frames": tl.len() });
        if let Some(truth) = corpus.truth(e)? {
            let score = DetectionScore::compare(tl, &truth.timeline);
            total.merge(&score);
            scored = true;
            entry["precision"] = json!(score.precision());
            entry["recall"] = json!(score.recall());
            hand_detected.extend(tl.left.iter().chain(&tl.right).copied());
            hand_truth.extend(truth.timeline.left.iter().chain(&truth.timeline.right).copied());
            leg_detected.extend(tl.legs.iter().copied());
            leg_truth.extend(truth.timeline.legs.iter().copied());
        }
        per_session.push(entry);
    }
    let mut report = json!({ "sessions": per_session });
    if scored {
        report["score"] = json!({
            "true_positives": total.true_positives,
            "detected": total.detected,
            "reference": total.reference,
            "precision": total.precision(),
            "recall": total.recall(),
            "alpha_hands": krippendorff_alpha(&hand_detected, &hand_truth)?.value(),
            "alpha_legs": krippendorff_alpha(&leg_detected, &leg_truth)?.value(),
        });
    }
    run.json("detection.json", &report)
}

fn classify_motion(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    let motion = match load_motion(run, &corpus)? {
        Some(m) => m,
        None => {
            let truth = all_truth(&corpus, &entries)?.ok_or_else(|| {
                Error::Model("no motion model given (`motion_model`) and the corpus has no ground truth to train one".into())
            })?;
            let labels = truth_labels(&sessions, &truth)?;
            let kind = run.cfg.action_model();
            let seed = run.cfg.seed()?;
            let report = motion_cross_validate(&sessions, &labels, run.cfg.motion_folds(), kind, seed)?;
            log::info!("motion cross-validation accuracy {:.3}", report.accuracy_mean);
            run.json("motion_cv.json", &report)?;
            let examples = sessions.iter().zip(&labels).flat_map(|(s, l)| s.slices.iter().zip(l.iter().copied()));
            let m = MotionModelFile {
                kind,
                models: ActionModels::fit(examples, kind, seed)?,
            };
            let path = run.output("motion_model.bin");
            model::save_motion_model(&path, &m, &corpus.schema)?;
            m
        }
    };
    let mut rows = Vec::new();
    for s in &sessions {
        for slice in &s.slices {
            let score = motion.models.score(slice)?;
            rows.push(vec![
                s.name.clone(),
                slice.category.to_string(),
                slice.code.to_string(),
                slice.start.to_string(),
                ActionLabel::from_dynamic(score > 0.5).to_string(),
                fmt_f(score),
            ]);
        }
    }
    run.table("slices.csv", &["session", "category", "location", "window_start", "label", "score"], rows)
}

fn encode_fidgets(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    let motion = load_motion(run, &corpus)?.expect("validated: motion model present");
    let with_speaking = run.cfg.with_speaking.unwrap_or(true);
    for s in &sessions {
        let mut m = session_fidgets(s, &motion.models.classify_session(s)?)?;
        if !with_speaking {
            m = m.pure();
        }
        let mut header = vec!["frame"];
        header.extend(m.row_names());
        run.table(
            &format!("fidgets/{}.csv", s.name),
            &header,
            (0..m.frames()).map(|t| {
                let mut row = vec![t.to_string()];
                row.extend(m.column(t).iter().map(|v| v.to_string()));
                row
            }),
        )?;
    }
    Ok(())
}

fn bundles(sessions: &[ProcessedSession], models: &ActionModels) -> Result<Vec<Matrix>> {
    sessions
        .iter()
        .map(|s| Ok(frame_bundle(s, &session_fidgets(s, &models.classify_session(s)?)?)?))
        .collect()
}

fn train(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    let labels = participant_labels(run, &corpus, &entries)?;
    let truth = all_truth(&corpus, &entries)?;
    let motion = action_models(run, &corpus, &sessions, truth.as_deref())?;
    let frames = bundles(&sessions, &motion.models)?;
    let names: Vec<String> = sessions.iter().map(|s| s.name.clone()).collect();
    let (fusion, audit) = train_fusion(&names, &frames, &labels, &run.cfg.fusion())?;
    let dir = run.out.join("model");
    model::save_bundle(&dir, &fusion, &motion, &corpus.schema)?;
    for f in BUNDLE_FILES {
        run.outputs.insert(format!("model/{f}"));
    }
    run.json("audit.json", &audit)
}

fn evaluate(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    match run.cfg.model.clone() {
        Some(dir) => evaluate_model(run, &corpus, &entries, &sessions, &dir),
        None => evaluate_cv(run, &corpus, &entries, &sessions),
    }
}

fn evaluate_model(
    run: &mut Run,
    corpus: &Corpus,
    entries: &[SessionEntry],
    sessions: &[ProcessedSession],
    dir: &Path,
) -> Result<()> {
    let (fusion, motion) = model::load_bundle(dir, &corpus.schema)?;
    for f in BUNDLE_FILES {
        run.inputs.push(FileHash {
            path: format!("model:{f}"),
            sha256: sha256_file(&dir.join(f))?,
        });
    }
    let frames = bundles(sessions, &motion.models)?;
    let probabilities = frames.iter().map(|f| fusion.predict_proba(f)).collect::<bodycue_core::Result<Vec<_>>>()?;
    let predicted: Vec<bool> = probabilities.iter().map(|&p| p > 0.5).collect();
    let labels = match corpus.labels()? {
        Some(_) => Some(participant_labels(run, corpus, entries)?),
        None => None,
    };
    run.table(
        "predictions.csv",
        &["session", "probability", "predicted", "label"],
        sessions.iter().enumerate().map(|(i, s)| {
            vec![
                s.name.clone(),
                fmt_f(probabilities[i]),
                (predicted[i] as u8).to_string(),
                labels.as_ref().map_or(String::new(), |l| (l[i] as u8).to_string()),
            ]
        }),
    )?;
    let mut metrics = json!({ "mode": "model", "target": run.cfg.target(), "sessions": sessions.len() });
    if let Some(labels) = labels {
        let c = Confusion::from_predictions(&labels, &predicted);
        metrics["f1"] = json!(c.f1());
        metrics["accuracy"] = json!(c.accuracy());
        metrics["precision"] = json!(c.precision());
        metrics["recall"] = json!(c.recall());
    }
    run.json("metrics.json", &metrics)
}

fn evaluate_cv(run: &mut Run, corpus: &Corpus, entries: &[SessionEntry], sessions: &[ProcessedSession]) -> Result<()> {
    let labels = participant_labels(run, corpus, entries)?;
    let slice_labels = match all_truth(corpus, entries)? {
        Some(truth) => truth_labels(sessions, &truth)?,
        None => {
            let motion = load_motion(run, corpus)?.ok_or_else(|| {
                Error::Model("cross-validation needs ground truth or a motion model to label slices".into())
            })?;
            sessions
                .iter()
                .map(|s| Ok(motion.models.classify_session(s)?))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let config = run.cfg.fusion();
    let kind = run.cfg.action_model();
    let mut cache = EmbeddingCache::new();
    let cv = fusion_cross_validate(sessions, &slice_labels, &labels, &config, kind, &mut cache)?;
    log::info!("cross-validated F1 {:.3} (sd {:.3})", cv.f1_mean, cv.f1_std);
    let rounds = run.cfg.shuffles();
    let shuffled = if rounds > 0 {
        let mut cache = EmbeddingCache::new();
        let f1 = shuffled_f1(sessions, &slice_labels, &labels, &config, kind, rounds, &mut cache)?;
        let mean = f1.iter().sum::<f64>() / f1.len() as f64;
        log::info!("mean F1 over {rounds} label shuffles {mean:.3}");
        Some(json!({ "rounds": rounds, "f1": f1, "f1_mean": mean }))
    } else {
        None
    };
    let folds: Vec<_> = cv
        .folds
        .iter()
        .map(|f| json!({ "fold": f.fold, "train": f.train, "test": f.test, "f1": f.f1 }))
        .collect();
    let mut metrics = json!({
        "mode": "cross_validation",
        "target": run.cfg.target(),
        "sessions": sessions.len(),
        "f1_mean": cv.f1_mean,
        "f1_std": cv.f1_std,
        "folds": folds,
        "leak_check": "passed",
    });
    if let Some(s) = shuffled {
        metrics["shuffled"] = s;
    }
    run.json("metrics.json", &metrics)?;
    run.json::<[StageAudit]>("audit.json", &cv.audit)?;
    let mut rows = Vec::new();
    for f in &cv.folds {
        for (i, name) in f.test.iter().enumerate() {
            rows.push(vec![
                f.fold.to_string(),
                name.clone(),
                fmt_f(f.probabilities[i]),
                (f.predicted[i] as u8).to_string(),
                (f.truth[i] as u8).to_string(),
            ]);
        }
    }
    run.table("cv_predictions.csv", &["fold", "session", "probability", "predicted", "label"], rows)
}

fn analyze(run: &mut Run) -> Result<()> {
    let (corpus, entries) = open_corpus(run)?;
    let sessions = process_all(run, &corpus, &entries)?;
    let labels = participant_labels(run, &corpus, &entries)?;
    let truth = all_truth(&corpus, &entries)?;
    let motion = action_models(run, &corpus, &sessions, truth.as_deref())?;
    let gestures = run.cfg.gestures();
    let rows = sessions
        .iter()
        .map(|s| analysis_features(s, &session_fidgets(s, &motion.models.classify_session(s)?)?, &gestures))
        .collect::<bodycue_core::Result<Vec<_>>>()?;
    let names = analysis_feature_names();
    let x = Matrix::from_rows(&rows);
    let search_opts = run.cfg.search();
    let linear = linear_classify(&x, &labels, search_opts.folds, search_opts.seed)?;
    let polarities = polarity(&linear.coefficients, run.cfg.tolerance())?;
    let report = PolarityReport::new(&names, &polarities);
    let mut search = feature_search(&x, &labels, &names, &search_opts)?;
    let log = std::mem::take(&mut search.log);

    let mut header = vec!["session", "label"];
    header.extend(FEATURE_NAMES);
    header.extend(ROW_NAMES);
    run.table(
        "features.csv",
        &header,
        sessions.iter().zip(&rows).zip(&labels).map(|((s, r), &l)| {
            let mut row = vec![s.name.clone(), (l as u8).to_string()];
            row.extend(r.iter().map(|&v| fmt_f(v)));
            row
        }),
    )?;
    run.json(
        "analysis.json",
        &json!({
            "target": run.cfg.target(),
            "features": names,
            "linear": linear,
            "polarity": report.entries,
            "search": search,
        }),
    )?;
    let path = run.output("polarity.txt");
    std::fs::write(&path, format!("{report}\n")).map_err(|e| Error::io(&path, e))?;
    run.table(
        "search_log.csv",
        &["subset", "f1_mean"],
        log.iter().map(|&(mask, f1)| {
            let subset: Vec<&str> = (0..names.len())
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| names[j].as_str())
                .collect();
            vec![subset.join("+"), fmt_f(f1)]
        }),
    )
}
