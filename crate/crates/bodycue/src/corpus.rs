//! Corpus directories: an index file plus per-session pose, sidecar and
//! diarization files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bodycue_core::fusion::ParticipantRecord;
use bodycue_core::ingest::{speaking_from_intervals, FeatureTrack, KeypointSchema, PoseSequence, SpeakerInterval, SpeakingTrack, TrackKind};
use bodycue_core::pipeline::SessionData;
use bodycue_core::synth::{self, benchmark_scripts, GroundTruth, Script, Session, PARTICIPANT_SPEAKER};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;

pub const INDEX_FILE: &str = "corpus.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub name: String,
    pub pose: String,
    /// Track name (`AUs`, `Gaze`, `MFCCs`) to CSV path.
    #[serde(default)]
    pub tracks: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diarization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
}

/// `corpus.json`. Paths are relative to the corpus directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusIndex {
    pub fps: f64,
    pub participant_speaker: String,
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    pub sessions: Vec<SessionEntry>,
}

/// What `load_session` returns.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSession {
    pub pose: PoseSequence,
    pub tracks: Vec<FeatureTrack>,
    pub diarization: Vec<SpeakerInterval>,
    pub speaking: SpeakingTrack,
}

impl LoadedSession {
    pub fn into_data(self, name: &str) -> SessionData {
        SessionData {
            name: name.to_string(),
            pose: self.pose,
            tracks: self.tracks,
            speaking: self.speaking,
        }
    }
}

/// Loads a pose file and its sidecars, aligning every track to the pose
/// frames. Without diarization the participant never speaks.
pub fn load_session(
    pose_path: &Path,
    sidecar_paths: &[(TrackKind, PathBuf)],
    diarization_path: Option<&Path>,
    schema: &KeypointSchema,
    fps: f64,
    participant: &str,
) -> Result<LoadedSession> {
    let pose = formats::read_pose(pose_path, fps, schema.clone())?;
    let n = pose.len();
    let tracks = sidecar_paths
        .iter()
        .map(|(kind, path)| formats::read_track(path, *kind, fps, n))
        .collect::<Result<Vec<_>>>()?;
    let diarization = match diarization_path {
        Some(p) => formats::read_diarization(p)?,
        None => Vec::new(),
    };
    let speaking = speaking_from_intervals(&diarization, participant, fps, n)?;
    Ok(LoadedSession {
        pose,
        tracks,
        diarization,
        speaking,
    })
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub index: CorpusIndex,
    pub schema: KeypointSchema,
}

impl Corpus {
    pub fn open(root: &Path) -> Result<Self> {
        let index: CorpusIndex = formats::read_json(&root.join(INDEX_FILE))?;
        if !(index.fps > 0.0) || !index.fps.is_finite() {
            return Err(Error::data(&root.join(INDEX_FILE), "field `fps` must be positive"));
        }
        let schema = formats::read_schema(&root.join(&index.schema))?;
        Ok(Self {
            root: root.to_path_buf(),
            index,
            schema,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn entry(&self, name: &str) -> Result<&SessionEntry> {
        self.index
            .sessions
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Data(format!("corpus has no session `{name}`")))
    }

    /// Sessions in index order, optionally restricted to `names`.
    pub fn select(&self, names: Option<&[String]>) -> Result<Vec<&SessionEntry>> {
        match names {
            None => Ok(self.index.sessions.iter().collect()),
            Some(names) => names.iter().map(|n| self.entry(n)).collect(),
        }
    }

    pub fn load(&self, entry: &SessionEntry, participant: Option<&str>) -> Result<LoadedSession> {
        let mut sidecars = Vec::new();
        for (name, rel) in &entry.tracks {
            let kind = TrackKind::from_name(name).ok_or_else(|| {
                Error::data(&self.root.join(INDEX_FILE), format!("session {}: unknown track `{name}`", entry.name))
            })?;
            sidecars.push((kind, self.path(rel)));
        }
        let diarization = entry.diarization.as_deref().map(|d| self.path(d));
        load_session(
            &self.path(&entry.pose),
            &sidecars,
            diarization.as_deref(),
            &self.schema,
            self.index.fps,
            participant.unwrap_or(&self.index.participant_speaker),
        )
    }

    pub fn labels(&self) -> Result<Option<Vec<ParticipantRecord>>> {
        self.index
            .labels
            .as_deref()
            .map(|rel| formats::read_labels(&self.path(rel)))
            .transpose()
    }

    pub fn truth(&self, entry: &SessionEntry) -> Result<Option<GroundTruth>> {
        entry.truth.as_deref().map(|rel| formats::read_json(&self.path(rel))).transpose()
    }

    /// Index, schema and labels plus every file of `sessions`, relative to
    /// the root, sorted.
    pub fn files(&self, sessions: &[&SessionEntry]) -> Vec<String> {
        let mut out = vec![INDEX_FILE.to_string(), self.index.schema.clone()];
        out.extend(self.index.labels.clone());
        for s in sessions {
            out.push(s.pose.clone());
            out.extend(s.tracks.values().cloned());
            out.extend(s.diarization.clone());
            out.extend(s.truth.clone());
            out.extend(s.script.clone());
        }
        out.sort();
        out.dedup();
        out
    }
}

fn track_file(kind: TrackKind) -> String {
    format!("{}.csv", kind.name().to_lowercase())
}

/// Writes one generated session under `root/sessions/<name>/`.
pub fn write_session(root: &Path, name: &str, session: &Session, script: Option<&Script>) -> Result<SessionEntry> {
    let dir = format!("sessions/{name}");
    let fps = session.pose.fps;
    let pose = format!("{dir}/pose.jsonl");
    formats::write_pose(&root.join(&pose), &session.pose)?;
    let mut tracks = BTreeMap::new();
    for t in &session.tracks {
        let rel = format!("{dir}/{}", track_file(t.kind));
        formats::write_track(&root.join(&rel), t, fps)?;
        tracks.insert(t.kind.name().to_string(), rel);
    }
    let diarization = format!("{dir}/diarization.csv");
    formats::write_diarization(&root.join(&diarization), &session.diarization)?;
    let truth = format!("{dir}/truth.json");
    formats::write_json(&root.join(&truth), &session.truth)?;
    let script = match script {
        Some(s) => {
            let rel = format!("{dir}/script.json");
            formats::write_json(&root.join(&rel), s)?;
            Some(rel)
        }
        None => None,
    };
    Ok(SessionEntry {
        name: name.to_string(),
        pose,
        tracks,
        diarization: Some(diarization),
        truth: Some(truth),
        script,
    })
}

fn write_index(root: &Path, fps: f64, sessions: Vec<SessionEntry>, labels: Option<String>) -> Result<CorpusIndex> {
    formats::write_json(&root.join("schema.json"), &synth::body::schema())?;
    let index = CorpusIndex {
        fps,
        participant_speaker: PARTICIPANT_SPEAKER.to_string(),
        schema: "schema.json".to_string(),
        labels,
        sessions,
    };
    formats::write_json(&root.join(INDEX_FILE), &index)?;
    Ok(index)
}

/// A one-session corpus from a script.
pub fn write_script_corpus(root: &Path, name: &str, script: &Script) -> Result<CorpusIndex> {
    let session = synth::generate(script)?;
    let entry = write_session(root, name, &session, Some(script))?;
    write_index(root, script.fps, vec![entry], None)
}

/// Writes the two-cohort benchmark: `n` sessions, their labels and ground
/// truth. Output is a function of `(n, seed)` only.
pub fn make_benchmark(root: &Path, n: usize, seed: u64) -> Result<CorpusIndex> {
    let participants = benchmark_scripts(n, seed)?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut entries = Vec::new();
    let mut records = Vec::new();
    for p in &participants {
        log::info!("generating {}", p.record.session);
        let session = synth::generate(&p.script)?;
        entries.push(write_session(root, &p.record.session, &session, Some(&p.script))?);
        records.push(p.record.clone());
    }
    formats::write_labels(&root.join("labels.csv"), &records)?;
    write_index(root, synth::BENCHMARK_FPS, entries, Some("labels.csv".to_string()))
}
