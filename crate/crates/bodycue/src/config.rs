//! Run configuration shared by every command.

use std::fmt;
use std::path::{Path, PathBuf};

use bodycue_core::adaptors::{AdaptorOptions, WidthRule};
use bodycue_core::analysis::{SearchOptions, DEFAULT_TOLERANCE};
use bodycue_core::fusion::{ClassifierKind, FeatureGroup, FusionConfig, ParticipantRecord};
use bodycue_core::gestures::{GestureOptions, Threshold};
use bodycue_core::ingest::PreprocessOptions;
use bodycue_core::motion::ActionModelKind;
use bodycue_core::pipeline::PipelineOptions;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Ingest,
    GestureStats,
    DetectAdaptors,
    ClassifyMotion,
    EncodeFidgets,
    TrainFusion,
    Evaluate,
    Analyze,
    Synth,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Ingest,
        Command::GestureStats,
        Command::DetectAdaptors,
        Command::ClassifyMotion,
        Command::EncodeFidgets,
        Command::TrainFusion,
        Command::Evaluate,
        Command::Analyze,
        Command::Synth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::GestureStats => "gesture-stats",
            Command::DetectAdaptors => "detect-adaptors",
            Command::ClassifyMotion => "classify-motion",
            Command::EncodeFidgets => "encode-fidgets",
            Command::TrainFusion => "train-fusion",
            Command::Evaluate => "evaluate",
            Command::Analyze => "analyze",
            Command::Synth => "synth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Percentile,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMode {
    HandDiagonal,
    Absolute,
}

/// Which questionnaire provides the binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Depression,
    Anxiety,
}

impl Target {
    pub fn label(self, r: &ParticipantRecord) -> bool {
        match self {
            Target::Depression => r.depressed(),
            Target::Anxiety => r.anxious(),
        }
    }
}

/// Every key is optional; unset keys take their documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Output directory. Not part of the configuration hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_speaker: Option<String>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_polyorder: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,

    /// Gesture window length in frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    /// Consecutive quiet windows that end a gesture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_mode: Option<ThresholdMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_mode: Option<WidthMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_duration: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_model: Option<ActionModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_speaking: Option<bool>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<FeatureGroup>>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_num: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffles: Option<usize>,
    /// Fusion model bundle directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_width: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_participants: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

pub const DEFAULT_PARTICIPANTS: usize = 12;
const MAX_SHUFFLES: usize = 1000;

fn field(name: &str, msg: impl fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {msg}"))
}

impl RunConfig {
    /// Parses a JSON object, rejecting unknown keys by name.
    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads the configuration from a config file, or from the `config`
    /// entry of a run manifest, then applies `overrides` on top.
    pub fn load(file: Option<&Path>, manifest: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let base = match (file, manifest) {
            (Some(_), Some(_)) => return Err(Error::Config("pass either a config file or a manifest, not both".into())),
            (Some(p), None) => read_object(p)?,
            (None, Some(p)) => match read_object(p)?.remove("config") {
                Some(Value::Object(m)) => m,
                _ => return Err(Error::Config(format!("{}: manifest has no `config` object", p.display()))),
            },
            (None, None) => Map::new(),
        };
        let mut merged = base;
        for (k, v) in overrides {
            merged.insert(k.clone(), v.clone());
        }
        Self::from_value(Value::Object(merged))
    }

    /// Configuration without the output directory, as recorded in manifests.
    pub fn recorded(&self) -> Self {
        Self {
            out: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON of [`RunConfig::recorded`].
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.recorded()).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| field("out", "an output directory is required"))
    }

    pub fn corpus(&self) -> Result<&Path> {
        self.corpus.as_deref().ok_or_else(|| field("corpus", "a corpus directory is required"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| field("seed", "this command trains a model and needs an explicit seed"))
    }

    pub fn target(&self) -> Target {
        self.target.unwrap_or(Target::Depression)
    }

    pub fn preprocess(&self) -> PreprocessOptions {
        let d = PreprocessOptions::default();
        PreprocessOptions {
            window: self.smooth_window.unwrap_or(d.window),
            polyorder: self.smooth_polyorder.unwrap_or(d.polyorder),
            normalize: self.normalize.unwrap_or(d.normalize),
        }
    }

    pub fn gestures(&self) -> GestureOptions {
        let d = GestureOptions::default();
        let threshold = match (self.threshold_mode, self.threshold) {
            (Some(ThresholdMode::Absolute), Some(v)) => Threshold::Absolute(v),
            (Some(ThresholdMode::Absolute), None) => Threshold::Absolute(0.0),
            (_, Some(v)) => Threshold::Percentile(v),
            (_, None) => d.threshold,
        };
        GestureOptions {
            window: self.l.unwrap_or(d.window),
            end_run: self.n.unwrap_or(d.end_run),
            threshold,
        }
    }

    pub fn adaptors(&self) -> AdaptorOptions {
        let d = AdaptorOptions::default();
        let rule = |v: Option<f64>, default: WidthRule| match (self.width_mode, v) {
            (Some(WidthMode::Absolute), Some(w)) => WidthRule::Absolute(w),
            (_, Some(w)) => WidthRule::HandDiagonal(w),
            (Some(WidthMode::Absolute), None) => match default {
                WidthRule::HandDiagonal(k) | WidthRule::Absolute(k) => WidthRule::Absolute(k),
            },
            (_, None) => default,
        };
        AdaptorOptions {
            arm_width: rule(self.arm_width, d.arm_width),
            leg_width: rule(self.leg_width, d.leg_width),
            min_duration: self.min_duration.or(d.min_duration),
        }
    }

    pub fn action_model(&self) -> ActionModelKind {
        self.action_model.unwrap_or(ActionModelKind::Forest)
    }

    pub fn pipeline(&self) -> PipelineOptions {
        PipelineOptions {
            preprocess: self.preprocess(),
            adaptors: self.adaptors(),
            gestures: self.gestures(),
            action_model: self.action_model(),
            seed: self.seed.unwrap_or(0),
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        let d = FusionConfig::default();
        FusionConfig {
            groups: self.groups.clone().unwrap_or(d.groups),
            k: self.k.unwrap_or(d.k),
            rf_num: self.rf_num.unwrap_or(d.rf_num),
            smoothing: self.smoothing.unwrap_or(d.smoothing),
            folds: self.folds.unwrap_or(d.folds),
            seed: self.seed.unwrap_or(d.seed),
            classifier: self.classifier.unwrap_or(d.classifier),
            ddae: d.ddae,
            gmm: d.gmm,
        }
    }

    pub fn search(&self) -> SearchOptions {
        let d = SearchOptions::default();
        SearchOptions {
            folds: self.folds.unwrap_or(d.folds),
            seed: self.seed.unwrap_or(d.seed),
            exact_limit: self.exact_limit.unwrap_or(d.exact_limit),
            beam_width: self.beam_width.unwrap_or(d.beam_width),
            keep_log: true,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(DEFAULT_TOLERANCE)
    }

    pub fn motion_folds(&self) -> usize {
        self.motion_folds.unwrap_or(bodycue_core::motion::classifier::DEFAULT_FOLDS)
    }

    pub fn shuffles(&self) -> usize {
        self.shuffles.unwrap_or(0)
    }

    /// Range checks plus the keys `command` cannot run without.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.out()?;
        if command != Command::Synth {
            self.corpus()?;
        }
        let trains = match command {
            Command::Synth => self.script.is_none(),
            Command::TrainFusion | Command::Analyze => true,
            Command::ClassifyMotion => self.motion_model.is_none(),
            Command::Evaluate => self.model.is_none(),
            _ => false,
        };
        if trains {
            self.seed()?;
        }
        if command == Command::EncodeFidgets && self.motion_model.is_none() {
            return Err(Error::Model("encode-fidgets needs a trained motion model (`motion_model`)".into()));
        }

        let p = self.preprocess();
        if p.window < 3 || p.window % 2 == 0 {
            return Err(field("smooth_window", format!("must be odd and at least 3, got {}", p.window)));
        }
        if p.polyorder >= p.window {
            return Err(field("smooth_polyorder", format!("must be below the window {}, got {}", p.window, p.polyorder)));
        }
        if self.l == Some(0) {
            return Err(field("l", "must be positive"));
        }
        if self.n == Some(0) {
            return Err(field("n", "must be positive"));
        }
        if let Some(t) = self.threshold {
            let ok = match self.threshold_mode.unwrap_or(ThresholdMode::Percentile) {
                ThresholdMode::Percentile => (0.0..=100.0).contains(&t),
                ThresholdMode::Absolute => t >= 0.0 && t.is_finite(),
            };
            if !ok {
                return Err(field("threshold", format!("out of range: {t}")));
            }
        }
        for (name, w) in [("arm_width", self.arm_width), ("leg_width", self.leg_width)] {
            if let Some(w) = w {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(field(name, format!("must be positive, got {w}")));
                }
            }
        }
        if self.min_duration == Some(0) {
            return Err(field("min_duration", "must be positive"));
        }
        if self.motion_folds.is_some_and(|f| f < 2) {
            return Err(field("motion_folds", "at least two folds are needed"));
        }
        if let Some(g) = &self.groups {
            if g.is_empty() || g.iter().any(|g| g.dim == 0 || !(g.weight >= 0.0)) {
                return Err(field("groups", "every group needs a positive dim and a non-negative weight"));
            }
        }
        if self.k == Some(0) {
            return Err(field("K", "must be positive"));
        }
        if self.rf_num == Some(0) {
            return Err(field("rf_num", "must be positive"));
        }
        if let Some(s) = self.smoothing {
            if !(0.0..1.0).contains(&s) {
                return Err(field("smoothing", format!("must lie in [0, 1), got {s}")));
            }
        }
        if self.folds.is_some_and(|f| f < 2) {
            return Err(field("folds", "at least two folds are needed"));
        }
        if self.shuffles.is_some_and(|s| s > MAX_SHUFFLES) {
            return Err(field("shuffles", format!("at most {MAX_SHUFFLES}")));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(field("tolerance", format!("must be non-negative, got {t}")));
            }
        }
        if self.exact_limit.is_some_and(|e| e > 24) {
            return Err(field("exact_limit", "exhaustive search is capped at 24 candidates"));
        }
        if self.beam_width == Some(0) {
            return Err(field("beam_width", "must be positive"));
        }
        if let Some(n) = self.n_participants {
            if n < bodycue_core::synth::benchmark::MIN_PARTICIPANTS {
                return Err(field(
                    "n_participants",
                    format!("at least {} participants are needed, got {n}", bodycue_core::synth::benchmark::MIN_PARTICIPANTS),
                ));
            }
        }
        Ok(())
    }
}

fn read_object(path: &Path) -> Result<Map<String, Value>> {
    let v: Value = formats::read_json(path).map_err(|e| Error::Config(e.to_string()))?;
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// `key=value`; the value is read as JSON when it parses, else as a string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}
