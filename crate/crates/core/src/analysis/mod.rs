//! Statistical analysis over session-level features: least-squares threshold
//! classification, per-feature polarity, subset search and inter-rater
//! agreement.

pub mod krippendorff;
pub mod linear;
pub mod search;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::fidgets::FidgetMatrix;
use crate::{Error, Result};

pub use krippendorff::{krippendorff_alpha, Agreement};
pub use linear::{linear_classify, LinearFit, LinearReport, DEFAULT_RIDGE};
pub use search::{feature_search, SearchOptions, SearchResult};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Fraction of frames each fidget row is active.
pub fn average_fidget(m: &FidgetMatrix) -> Result<Vec<f64>> {
    let n = m.frames();
    if n == 0 {
        return Err(Error::invalid("cannot average a fidget matrix with no frames"));
    }
    Ok(m.rows
        .iter()
        .map(|r| r.iter().map(|&v| v as f64).sum::<f64>() / n as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// Larger values push towards the positive class in every fold.
    Positive,
    /// Larger values push towards the negative class in every fold.
    Negative,
    /// Near-zero weight in every fold.
    Neutral,
    /// Sign differs between folds.
    Inconsistent,
}

impl Polarity {
    pub fn token(self) -> &'static str {
        match self {
            Polarity::Positive => "+",
            Polarity::Negative => "¬",
            Polarity::Neutral => "/",
            Polarity::Inconsistent => "?",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Polarity of each feature from per-fold coefficients (`folds[f][j]`).
pub fn polarity(folds: &[Vec<f64>], tol: f64) -> Result<Vec<Polarity>> {
    if folds.len() < 2 {
        return Err(Error::invalid("polarity needs coefficients from at least two folds"));
    }
    let p = folds[0].len();
    if folds.iter().any(|f| f.len() != p) {
        return Err(Error::invalid("folds disagree on the number of coefficients"));
    }
    Ok((0..p)
        .map(|j| {
            let col = folds.iter().map(|f| f[j]);
            if col.clone().all(|c| c.abs() < tol) {
                Polarity::Neutral
            } else if col.clone().all(|c| c > tol) {
                Polarity::Positive
            } else if col.clone().all(|c| c < -tol) {
                Polarity::Negative
            } else {
                Polarity::Inconsistent
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityReport {
    pub entries: Vec<(String, Polarity)>,
}

impl PolarityReport {
    pub fn new(names: &[String], polarities: &[Polarity]) -> Self {
        Self {
            entries: names.iter().cloned().zip(polarities.iter().copied()).collect(),
        }
    }
}

/// `He-GL+, Hn-GS¬, ...`
impl fmt::Display for PolarityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}{p}")?;
        }
        Ok(())
    }
}
