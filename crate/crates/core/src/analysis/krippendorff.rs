//! Krippendorff's alpha for two coders and nominal categories.

use alloc::collections::BTreeMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Agreement {
    Alpha(f64),
    /// Every value falls in one category, so expected disagreement is zero.
    Degenerate,
}

impl Agreement {
    pub fn value(self) -> Option<f64> {
        match self {
            Agreement::Alpha(a) => Some(a),
            Agreement::Degenerate => None,
        }
    }
}

/// Alpha from the coincidence matrix of paired labels:
/// `1 - (n - 1) * sum_{c != k} o_ck / sum_{c != k} n_c n_k`.
pub fn krippendorff_alpha<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<Agreement> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "coder label arrays",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("no units to compare"));
    }
    // each unit contributes both ordered pairs
    let mut totals: BTreeMap<&T, f64> = BTreeMap::new();
    let mut disagreements = 0.0;
    for (x, y) in a.iter().zip(b) {
        *totals.entry(x).or_default() += 1.0;
        *totals.entry(y).or_default() += 1.0;
        if x != y {
            disagreements += 2.0;
        }
    }
    let n = 2.0 * a.len() as f64;
    let sum_sq: f64 = totals.values().map(|c| c * c).sum();
    let expected = n * n - sum_sq;
    if expected == 0.0 {
        return Ok(Agreement::Degenerate);
    }
    Ok(Agreement::Alpha(1.0 - (n - 1.0) * disagreements / expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_agreement() {
        let a = [1, 2, 3, 1, 2];
        assert_eq!(krippendorff_alpha(&a, &a).unwrap(), Agreement::Alpha(1.0));
    }

    #[test]
    fn hand_computed_case() {
        // o00 = 2, o01 = o10 = 1, o11 = 4; n0 = 3, n1 = 5, n = 8
        // alpha = 1 - 7 * 2 / (2 * 3 * 5) = 8/15
        let a = ["s", "s", "d", "d"];
        let b = ["s", "d", "d", "d"];
        let alpha = krippendorff_alpha(&a, &b).unwrap().value().unwrap();
        assert!((alpha - 8.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn random_labels_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
        let b: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
        let alpha = krippendorff_alpha(&a, &b).unwrap().value().unwrap();
        assert!(alpha.abs() < 0.05, "{alpha}");
    }

    #[test]
    fn single_category_is_degenerate() {
        assert_eq!(krippendorff_alpha(&[1, 1], &[1, 1]).unwrap(), Agreement::Degenerate);
        assert!(krippendorff_alpha(&[1], &[1, 2]).is_err());
    }
}
