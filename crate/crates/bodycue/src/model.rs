//! Model persistence.
//!
//! Motion models use a small binary container:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `BCMOTION`                          |
//! | 4     | format version, little endian             |
//! | 32    | SHA-256 of the keypoint schema JSON       |
//! | 8     | payload length, little endian             |
//! | n     | JSON payload                              |
//!
//! A fusion bundle is a directory of JSON files plus the motion model.

use std::fs;
use std::path::Path;

use bodycue_core::fusion::{DdaeModel, DistressClassifier, EmbeddingClassifier, FusionConfig, FusionModel, GmmModel, SessionEncoder};
use bodycue_core::ingest::KeypointSchema;
use bodycue_core::motion::ActionModelKind;
use bodycue_core::pipeline::ActionModels;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats;

pub const MOTION_MAGIC: &[u8; 8] = b"BCMOTION";
pub const MOTION_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 8;

pub fn schema_hash(schema: &KeypointSchema) -> [u8; 32] {
    let json = serde_json::to_vec(schema).expect("schema serializes");
    Sha256::digest(&json).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionModelFile {
    pub kind: ActionModelKind,
    pub models: ActionModels,
}

pub fn encode_motion_model(model: &MotionModelFile, schema: &KeypointSchema) -> Vec<u8> {
    let payload = serde_json::to_vec(model).expect("motion model serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MOTION_MAGIC);
    out.extend_from_slice(&MOTION_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&schema_hash(schema));
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Rejects foreign files, other format versions, truncated payloads and
/// models trained under a different keypoint schema.
pub fn decode_motion_model(bytes: &[u8], schema: &KeypointSchema) -> Result<MotionModelFile> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MOTION_MAGIC {
        return Err(Error::Model("not a motion model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MOTION_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "motion model format version {version} is not supported (expected {MOTION_FORMAT_VERSION})"
        )));
    }
    if bytes[12..44] != schema_hash(schema) {
        return Err(Error::Model("motion model was trained on a different keypoint schema".into()));
    }
    let len = u64::from_le_bytes(bytes[44..52].try_into().expect("8 bytes")) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(Error::Model(format!("motion model payload is {} bytes, header says {len}", payload.len())));
    }
    serde_json::from_slice(payload).map_err(|e| Error::Model(format!("motion model payload: {e}")))
}

pub fn save_motion_model(path: &Path, model: &MotionModelFile, schema: &KeypointSchema) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_motion_model(model, schema)).map_err(|e| Error::io(path, e))
}

pub fn load_motion_model(path: &Path, schema: &KeypointSchema) -> Result<MotionModelFile> {
    let bytes = fs::read(path).map_err(|e| Error::Model(format!("cannot read motion model {}: {e}", path.display())))?;
    decode_motion_model(&bytes, schema).map_err(|e| match e {
        Error::Model(m) => Error::Model(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub const BUNDLE_FILES: [&str; 6] = [
    "fusion_config.json",
    "ddae.json",
    "gmm.json",
    "selected.json",
    "classifier.json",
    "motion_model.bin",
];

pub fn save_bundle(dir: &Path, model: &FusionModel, motion: &MotionModelFile, schema: &KeypointSchema) -> Result<()> {
    formats::write_json(&dir.join(BUNDLE_FILES[0]), &model.config)?;
    formats::write_json(&dir.join(BUNDLE_FILES[1]), &model.encoder.ddae)?;
    formats::write_json(&dir.join(BUNDLE_FILES[2]), &model.encoder.gmm)?;
    formats::write_json(&dir.join(BUNDLE_FILES[3]), &model.head.selected)?;
    formats::write_json(&dir.join(BUNDLE_FILES[4]), &model.head.classifier)?;
    save_motion_model(&dir.join(BUNDLE_FILES[5]), motion, schema)
}

fn bundle_part<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::Model(format!("model bundle {} has no {name}", dir.display())));
    }
    formats::read_json(&path).map_err(|e| Error::Model(e.to_string()))
}

pub fn load_bundle(dir: &Path, schema: &KeypointSchema) -> Result<(FusionModel, MotionModelFile)> {
    if !dir.is_dir() {
        return Err(Error::Model(format!("model bundle {} does not exist", dir.display())));
    }
    let config: FusionConfig = bundle_part(dir, BUNDLE_FILES[0])?;
    let ddae: DdaeModel = bundle_part(dir, BUNDLE_FILES[1])?;
    let gmm: GmmModel = bundle_part(dir, BUNDLE_FILES[2])?;
    let selected: Vec<usize> = bundle_part(dir, BUNDLE_FILES[3])?;
    let classifier: DistressClassifier = bundle_part(dir, BUNDLE_FILES[4])?;
    let motion = load_motion_model(&dir.join(BUNDLE_FILES[5]), schema)?;
    if ddae.architecture.encoders.len() != ddae.architecture.inputs.len()
        || ddae.weights.len() != ddae.architecture.inputs.len()
        || ddae.params().len() != ddae.architecture.parameter_count()
        || ddae.architecture.input_width() != config.input_width()
        || ddae.standardizer.mean.len() != config.input_width()
    {
        return Err(Error::Model("DDAE weights do not match its architecture".into()));
    }
    let k = gmm.weights.len();
    if gmm.dim() != ddae.latent_dim() || gmm.means.rows() != k || gmm.variances.rows() != k || gmm.variances.cols() != gmm.dim()
    {
        return Err(Error::Model("GMM parameters do not match the DDAE code width".into()));
    }
    let encoder = SessionEncoder { ddae, gmm };
    if let Some(&bad) = selected.iter().find(|&&j| j >= encoder.embedding_len()) {
        return Err(Error::Model(format!("selected feature {bad} exceeds the embedding length")));
    }
    Ok((
        FusionModel {
            config,
            encoder,
            head: EmbeddingClassifier { selected, classifier },
        },
        motion,
    ))
}
