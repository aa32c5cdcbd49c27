//! Participant-level fold assignment.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Splits participants into `k` disjoint folds.
///
/// With `labels` (one per participant) the split is stratified: each class
/// is shuffled and dealt round-robin, continuing where the previous class
/// stopped so fold sizes differ by at most one. Output order within a fold
/// follows the input order.
pub fn participant_folds<P: Ord + Clone>(
    participants: &[P],
    labels: Option<&[bool]>,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<P>>> {
    let unique: BTreeSet<&P> = participants.iter().collect();
    if unique.len() != participants.len() {
        return Err(Error::invalid("participant list contains duplicates"));
    }
    if k < 2 || k > participants.len() {
        return Err(Error::TooFewParticipants {
            folds: k,
            participants: participants.len(),
        });
    }
    if let Some(l) = labels {
        if l.len() != participants.len() {
            return Err(Error::DimensionMismatch {
                what: "participant labels",
                expected: participants.len(),
                got: l.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match labels {
        Some(l) => [true, false]
            .iter()
            .map(|&class| (0..participants.len()).filter(|&i| l[i] == class).collect())
            .collect(),
        None => alloc::vec![(0..participants.len()).collect()],
    };
    let mut assignment = alloc::vec![0usize; participants.len()];
    let mut next = 0usize;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            participants
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == f)
                .map(|(p, _)| p.clone())
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn folds_partition_participants() {
        let ps: Vec<u32> = (0..12).collect();
        let folds = participant_folds(&ps, None, 3, 1).unwrap();
        let mut all: Vec<u32> = folds.concat();
        all.sort();
        assert_eq!(all, ps);
        assert!(folds.iter().all(|f| f.len() == 4));
    }

    #[test]
    fn stratified_balances_labels() {
        let ps: Vec<u32> = (0..12).collect();
        let labels: Vec<bool> = ps.iter().map(|p| p % 2 == 0).collect();
        let folds = participant_folds(&ps, Some(&labels), 3, 5).unwrap();
        for f in folds {
            assert_eq!(f.iter().filter(|&&p| labels[p as usize]).count(), 2);
        }
    }

    #[test]
    fn too_many_folds_rejected() {
        let ps = vec![1, 2];
        assert!(matches!(
            participant_folds(&ps, None, 3, 0),
            Err(Error::TooFewParticipants { folds: 3, participants: 2 })
        ));
    }
}
