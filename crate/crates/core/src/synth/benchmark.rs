//! Two-cohort benchmark scripts with balanced distress labels.

use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Camera, CohortParams, EventKind, FidgetRates, Motion, Script, ScriptEvent, Side};
use crate::fusion::ParticipantRecord;
use crate::math::round;
use crate::{Error, Result};

pub const BENCHMARK_FPS: f64 = 26.0;
/// Seconds per session.
pub const BENCHMARK_DURATION: f64 = 72.0;
pub const MIN_PARTICIPANTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkParticipant {
    pub record: ParticipantRecord,
    pub script: Script,
}

impl BenchmarkParticipant {
    pub fn distressed(&self) -> bool {
        self.record.depressed()
    }
}

pub fn distressed_cohort() -> CohortParams {
    CohortParams {
        name: "distressed".into(),
        fidget_rates: FidgetRates::uniform(0.7, 0.4),
        sidecar_shift: 0.2,
    }
}

pub fn control_cohort() -> CohortParams {
    CohortParams {
        name: "control".into(),
        fidget_rates: FidgetRates::uniform(0.15, 0.05),
        sidecar_shift: -0.2,
    }
}

fn centis(v: f64) -> f64 {
    round(v * 100.0) / 100.0
}

fn oscillation(rng: &mut ChaCha8Rng) -> Motion {
    Motion::Oscillate {
        freq: centis(rng.random_range(0.8..2.2)),
        amp: round(rng.random_range(0.04..0.06) * 1000.0) / 1000.0,
    }
}

/// Systematic sampling over a shuffled order: event `i` is dynamic with
/// probability `rates[i]`, and the number of dynamic events is within one of
/// `rates.iter().sum()`.
fn dynamic_flags(rng: &mut ChaCha8Rng, rates: &[f64]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.shuffle(rng);
    let mut acc: f64 = rng.random();
    let mut flags = alloc::vec![false; rates.len()];
    for i in order {
        let before = libm::floor(acc);
        acc += rates[i];
        flags[i] = libm::floor(acc) > before;
    }
    flags
}

fn side(rng: &mut ChaCha8Rng) -> Side {
    if rng.random::<bool>() {
        Side::Left
    } else {
        Side::Right
    }
}

/// A session script whose events are drawn from the cohort's fidget rates.
/// Hand events never overlap in time so contacts stay unambiguous.
pub fn cohort_script(cohort: &CohortParams, seed: u64, fps: f64, duration: f64) -> Script {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = cohort.fidget_rates;
    let mut events = Vec::new();

    let mut hands = Vec::new();
    let mut cursor = centis(rng.random_range(1.0..3.0));
    loop {
        let len = centis(rng.random_range(5.0..9.0));
        if cursor + len > duration - 0.5 {
            break;
        }
        let kind = [EventKind::H2H, EventKind::H2A, EventKind::H2L, EventKind::H2F][rng.random_range(0..4)];
        let s = side(&mut rng);
        hands.push(ScriptEvent {
            kind,
            side: (kind != EventKind::H2H).then_some(s),
            start: cursor,
            end: centis(cursor + len),
            motion: Motion::Still,
        });
        cursor = centis(cursor + len + rng.random_range(1.5..4.0));
    }
    let rates_h: Vec<f64> = hands.iter().map(|e| rates.for_kind(e.kind)).collect();
    for (e, d) in hands.iter_mut().zip(dynamic_flags(&mut rng, &rates_h)) {
        if d {
            e.motion = oscillation(&mut rng);
        }
    }
    events.extend(hands);

    let mut legs = Vec::new();
    let mut cursor = centis(rng.random_range(2.0..6.0));
    loop {
        let len = centis(rng.random_range(6.0..12.0));
        if cursor + len > duration - 0.5 {
            break;
        }
        let kind = if rng.random::<bool>() { EventKind::L2L } else { EventKind::L2G };
        legs.push(ScriptEvent {
            kind,
            side: Some(side(&mut rng)),
            start: cursor,
            end: centis(cursor + len),
            motion: Motion::Still,
        });
        cursor = centis(cursor + len + rng.random_range(3.0..8.0));
    }
    let rates_l = alloc::vec![rates.leg; legs.len()];
    for (mut e, d) in legs.into_iter().zip(dynamic_flags(&mut rng, &rates_l)) {
        if d {
            e.motion = oscillation(&mut rng);
        }
        // a still foot on the ground is no event
        if e.kind == EventKind::L2L || d {
            events.push(e);
        }
    }

    let mut speaking = Vec::new();
    let mut cursor = 0.0;
    let mut participant = false;
    while cursor < duration {
        let end = centis(cursor + rng.random_range(2.0..8.0)).min(duration);
        if participant {
            speaking.push([cursor, end]);
        }
        participant = !participant;
        cursor = end;
    }

    Script {
        seed: rng.random(),
        fps,
        duration,
        events,
        cohort: cohort.clone(),
        speaking,
        camera: Camera {
            scale: centis(rng.random_range(170.0..230.0)),
            origin: [centis(rng.random_range(560.0..720.0)), centis(rng.random_range(140.0..220.0))],
        },
        dropout: 0.001,
    }
}

/// Scripts for `n` participants, half of them distressed. Distressed
/// participants score above both questionnaire thresholds, controls below.
pub fn benchmark_scripts(n: usize, seed: u64) -> Result<Vec<BenchmarkParticipant>> {
    if n < MIN_PARTICIPANTS {
        return Err(Error::invalid(format!(
            "a benchmark needs at least {MIN_PARTICIPANTS} participants, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut distressed: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    distressed.shuffle(&mut rng);
    let width = format!("{n}").len().max(2);
    distressed
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let (phq, gad) = if d {
                (rng.random_range(10..=20), rng.random_range(8..=18))
            } else {
                (rng.random_range(0..=5), rng.random_range(0..=4))
            };
            let cohort = if d { distressed_cohort() } else { control_cohort() };
            let script = cohort_script(&cohort, rng.random(), BENCHMARK_FPS, BENCHMARK_DURATION);
            let record = ParticipantRecord::new(format!("P{:0width$}", i + 1), phq as f64, gad as f64)?;
            Ok(BenchmarkParticipant { record, script })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_valid() {
        let b = benchmark_scripts(12, 7).unwrap();
        assert_eq!(b.len(), 12);
        assert_eq!(b.iter().filter(|p| p.distressed()).count(), 6);
        assert!(b.iter().all(|p| p.distressed() == p.record.anxious()));
        for p in &b {
            p.script.validate().unwrap();
            assert!(p.script.frames() as f64 >= 60.0 * 26.0);
            assert!(!p.script.events.is_empty());
        }
        assert_eq!(b[0].record.session, "P01");
        assert_eq!(b, benchmark_scripts(12, 7).unwrap());
        assert_ne!(b, benchmark_scripts(12, 8).unwrap());
        assert!(benchmark_scripts(5, 7).is_err());
    }

    #[test]
    fn cohorts_differ_in_fidget_share() {
        let share = |c: &CohortParams| {
            let (mut dynamic, mut total) = (0, 0);
            for seed in 0..20 {
                for e in cohort_script(c, seed, 26.0, 72.0).events {
                    total += 1;
                    dynamic += e.motion.is_dynamic() as usize;
                }
            }
            dynamic as f64 / total as f64
        };
        assert!(share(&distressed_cohort()) > share(&control_cohort()) + 0.3);
    }
}
