//! Readers and writers for the on-disk formats.
//!
//! * pose: JSON Lines, one `{"t": int, "points": [[x, y, c], ...]}` object per
//!   frame; `null` marks a missing coordinate, confidence or whole point
//! * schema: JSON object of keypoint index groups
//! * sidecar tracks: CSV with a header row, `timestamp_s` first, then one
//!   column per feature; empty or `nan` cells are missing values
//! * diarization: CSV `start_s,end_s,speaker_id`
//! * labels: CSV `session,phq8,gad7`

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use bodycue_core::fusion::ParticipantRecord;
use bodycue_core::ingest::{
    resample_nearest, FeatureTrack, FramePose, Keypoint, KeypointSchema, PoseSequence, SpeakerInterval, TrackKind,
};
use bodycue_core::linalg::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::data(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseLine {
    t: usize,
    points: Vec<Option<Vec<Option<f64>>>>,
}

#[derive(Serialize)]
struct PoseLineOut {
    t: usize,
    points: Vec<[Option<f64>; 3]>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn keypoint(line: usize, i: usize, raw: Option<Vec<Option<f64>>>, path: &Path) -> Result<Keypoint> {
    let Some(v) = raw else {
        return Ok(Keypoint::missing());
    };
    if v.len() != 2 && v.len() != 3 {
        return Err(Error::data(
            path,
            format!("line {line}: field `points[{i}]`: expected [x, y] or [x, y, c], got {} values", v.len()),
        ));
    }
    Ok(Keypoint {
        x: v[0].unwrap_or(f64::NAN),
        y: v[1].unwrap_or(f64::NAN),
        confidence: v.get(2).copied().flatten(),
    })
}

pub fn read_pose(path: &Path, fps: f64, schema: KeypointSchema) -> Result<PoseSequence> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let parsed: PoseLine =
            serde_json::from_str(&line).map_err(|e| Error::data(path, format!("line {n}: {e}")))?;
        if parsed.t != frames.len() {
            return Err(Error::data(
                path,
                format!("line {n}: field `t`: expected frame {}, got {}", frames.len(), parsed.t),
            ));
        }
        let points = parsed
            .points
            .into_iter()
            .enumerate()
            .map(|(p, raw)| keypoint(n, p, raw, path))
            .collect::<Result<Vec<_>>>()?;
        frames.push(FramePose { t: parsed.t, points });
    }
    PoseSequence::new(fps, frames, schema).map_err(|e| Error::data(path, e))
}

pub fn write_pose(path: &Path, seq: &PoseSequence) -> Result<()> {
    let mut w = create_file(path)?;
    for f in &seq.frames {
        let line = PoseLineOut {
            t: f.t,
            points: f.points.iter().map(|k| [finite(k.x), finite(k.y), k.confidence]).collect(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| Error::data(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_schema(path: &Path) -> Result<KeypointSchema> {
    read_json(path)
}

/// Column names of a sidecar track after the timestamp.
pub fn track_columns(kind: TrackKind) -> Vec<String> {
    (0..kind.dim())
        .map(|d| match kind {
            TrackKind::Aus => format!("AU{:02}", d + 1),
            TrackKind::Gaze => format!("gaze_{d}"),
            TrackKind::Mfccs => format!("mfcc_{d}"),
        })
        .collect()
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn record_line(r: &csv::StringRecord) -> u64 {
    r.position().map_or(0, |p| p.line())
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>()
        .map_err(|_| Error::data(path, format!("line {line}: field `{column}`: invalid number `{cell}`")))
}

fn headers(path: &Path, reader: &mut csv::Reader<File>, expected: usize) -> Result<Vec<String>> {
    let h: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if h.len() != expected {
        return Err(Error::data(path, format!("line 1: expected {expected} columns, got {}", h.len())));
    }
    Ok(h)
}

/// Reads a sidecar track and aligns it to `n_frames` video frames by
/// nearest timestamp.
pub fn read_track(path: &Path, kind: TrackKind, fps: f64, n_frames: usize) -> Result<FeatureTrack> {
    let mut reader = csv_reader(path)?;
    let names = headers(path, &mut reader, kind.dim() + 1)?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::data(path, e))?;
        let line = record_line(&rec);
        for (c, cell) in rec.iter().enumerate() {
            let v = parse_cell(path, line, &names[c], cell)?;
            if c == 0 {
                if !v.is_finite() {
                    return Err(Error::data(path, format!("line {line}: field `{}`: missing timestamp", names[0])));
                }
                timestamps.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let samples = Matrix::from_vec(timestamps.len(), kind.dim(), values);
    let aligned = resample_nearest(&timestamps, &samples, fps, n_frames).map_err(|e| Error::data(path, e))?;
    FeatureTrack::new(kind, aligned).map_err(|e| Error::data(path, e))
}

/// Writes a frame-aligned track with timestamps `t / fps`.
pub fn write_track(path: &Path, track: &FeatureTrack, fps: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let mut header = vec!["timestamp_s".to_string()];
    header.extend(track_columns(track.kind));
    w.write_record(&header).map_err(|e| Error::data(path, e))?;
    for t in 0..track.frames() {
        let mut row = vec![(t as f64 / fps).to_string()];
        row.extend((0..track.values.rows()).map(|d| {
            let v = track.values.get(d, t);
            if v.is_finite() {
                v.to_string()
            } else {
                String::new()
            }
        }));
        w.write_record(&row).map_err(|e| Error::data(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_diarization(path: &Path) -> Result<Vec<SpeakerInterval>> {
    let mut reader = csv_reader(path)?;
    let names = headers(path, &mut reader, 3)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::data(path, e))?;
        let line = record_line(&rec);
        let start_s = parse_cell(path, line, &names[0], &rec[0])?;
        let end_s = parse_cell(path, line, &names[1], &rec[1])?;
        if !start_s.is_finite() || !end_s.is_finite() || end_s < start_s {
            return Err(Error::data(path, format!("line {line}: invalid interval [{start_s}, {end_s}]")));
        }
        out.push(SpeakerInterval {
            start_s,
            end_s,
            speaker: rec[2].to_string(),
        });
    }
    Ok(out)
}

pub fn write_diarization(path: &Path, intervals: &[SpeakerInterval]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    w.write_record(["start_s", "end_s", "speaker_id"]).map_err(|e| Error::data(path, e))?;
    for iv in intervals {
        w.write_record([iv.start_s.to_string(), iv.end_s.to_string(), iv.speaker.clone()])
            .map_err(|e| Error::data(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<ParticipantRecord>> {
    let mut reader = csv_reader(path)?;
    let names = headers(path, &mut reader, 3)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::data(path, e))?;
        let line = record_line(&rec);
        let phq = parse_cell(path, line, &names[1], &rec[1])?;
        let gad = parse_cell(path, line, &names[2], &rec[2])?;
        let record = ParticipantRecord::new(rec[0].to_string(), phq, gad)
            .map_err(|e| Error::data(path, format!("line {line}: {e}")))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, records: &[ParticipantRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    w.write_record(["session", "phq8", "gad7"]).map_err(|e| Error::data(path, e))?;
    for r in records {
        w.write_record([r.session.clone(), r.phq8.to_string(), r.gad7.to_string()])
            .map_err(|e| Error::data(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a header and string rows.
pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(create_file(path)?);
    w.write_record(header).map_err(|e| Error::data(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::data(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
