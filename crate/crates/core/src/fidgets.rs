//! Fidget activations: location events combined with slice actions.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::adaptors::{HandCode, LocationTimeline};
use crate::ingest::SpeakingTrack;
use crate::motion::{ActionLabel, Category, TrajectorySlice, SLICE_LEN};
use crate::{Error, Result};

pub const PURE_ROWS: usize = 8;
pub const ROW_NAMES: [&str; 9] = [
    "CHF",
    "SHF-L(left)",
    "SHF-L(right)",
    "SHF-A(left)",
    "SHF-A(right)",
    "SHF-F(left)",
    "SHF-F(right)",
    "LFF",
    "speaking",
];

/// A classified slice window, detached from its trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceAction {
    pub category: Category,
    pub run: (usize, usize),
    pub start: usize,
    pub label: ActionLabel,
}

impl SliceAction {
    pub fn new(slice: &TrajectorySlice, label: ActionLabel) -> Self {
        Self {
            category: slice.category,
            run: slice.run,
            start: slice.start,
            label,
        }
    }
}

/// Binary activations, one row per fidget type and one column per frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidgetMatrix {
    pub rows: Vec<Vec<u8>>,
}

impl FidgetMatrix {
    pub fn frames(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn has_speaking(&self) -> bool {
        self.rows.len() == PURE_ROWS + 1
    }

    pub fn row_names(&self) -> &'static [&'static str] {
        &ROW_NAMES[..self.rows.len()]
    }

    /// The first eight rows.
    pub fn pure(&self) -> FidgetMatrix {
        FidgetMatrix {
            rows: self.rows[..PURE_ROWS].to_vec(),
        }
    }

    pub fn column(&self, t: usize) -> Vec<u8> {
        self.rows.iter().map(|r| r[t]).collect()
    }
}

/// Per-frame action of one category. Frames under several windows take the
/// label of the window whose center is nearest (ties go to DYNAMIC); run
/// tails past the last window inherit its label. Frames outside any
/// windowed run are `None`.
pub fn resolve_actions(n: usize, actions: &[SliceAction], category: Category) -> Vec<Option<ActionLabel>> {
    let mut out = vec![None; n];
    // twice the distance to the nearest window center so far
    let mut best = vec![usize::MAX; n];
    let mut last_in_run: Vec<(usize, usize, usize, ActionLabel)> = Vec::new();
    for a in actions.iter().filter(|a| a.category == category) {
        let end = (a.start + SLICE_LEN).min(n);
        let center2 = 2 * a.start + SLICE_LEN - 1;
        for t in a.start..end {
            let d = (2 * t).abs_diff(center2);
            let better = d < best[t] || (d == best[t] && a.label == ActionLabel::Dynamic);
            if better {
                best[t] = d;
                out[t] = Some(a.label);
            }
        }
        match last_in_run.iter_mut().find(|r| (r.0, r.1) == a.run) {
            Some(r) if r.2 < a.start => {
                r.2 = a.start;
                r.3 = a.label;
            }
            Some(_) => {}
            None => last_in_run.push((a.run.0, a.run.1, a.start, a.label)),
        }
    }
    for (_, run_end, start, label) in last_in_run {
        for slot in out.iter_mut().take(run_end.min(n)).skip(start + SLICE_LEN) {
            *slot = Some(label);
        }
    }
    out
}

fn dynamic(actions: &[Option<ActionLabel>], t: usize) -> bool {
    actions[t] == Some(ActionLabel::Dynamic)
}

/// The 8 x N fidget matrix of a session.
pub fn encode_fidgets(timeline: &LocationTimeline, actions: &[SliceAction]) -> FidgetMatrix {
    let n = timeline.len();
    let both = resolve_actions(n, actions, Category::Both);
    let left = resolve_actions(n, actions, Category::Left);
    let right = resolve_actions(n, actions, Category::Right);
    let legs = resolve_actions(n, actions, Category::Leg);
    let mut rows = vec![vec![0u8; n]; PURE_ROWS];
    let side_row = |code: HandCode| match code {
        HandCode::H2L => Some(1),
        HandCode::H2A => Some(3),
        HandCode::H2F => Some(5),
        HandCode::H2H | HandCode::HF => None,
    };
    for t in 0..n {
        if timeline.left[t] == HandCode::H2H {
            rows[0][t] = dynamic(&both, t) as u8;
        } else {
            if let Some(r) = side_row(timeline.left[t]) {
                rows[r][t] = dynamic(&left, t) as u8;
            }
            if let Some(r) = side_row(timeline.right[t]) {
                rows[r + 1][t] = dynamic(&right, t) as u8;
            }
        }
        rows[7][t] = dynamic(&legs, t) as u8;
    }
    FidgetMatrix { rows }
}

/// Appends the speaking row.
pub fn attach_speaking(m: &FidgetMatrix, speaking: &SpeakingTrack) -> Result<FidgetMatrix> {
    if m.rows.len() != PURE_ROWS {
        return Err(Error::invalid("speaking row is already attached"));
    }
    if speaking.speaking.len() != m.frames() {
        return Err(Error::DimensionMismatch {
            what: "speaking track",
            expected: m.frames(),
            got: speaking.speaking.len(),
        });
    }
    let mut rows = m.rows.clone();
    rows.push(speaking.speaking.iter().map(|&s| s as u8).collect());
    Ok(FidgetMatrix { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptors::LegCode;
    use proptest::prelude::*;

    fn act(category: Category, run: (usize, usize), start: usize, dynamic: bool) -> SliceAction {
        SliceAction {
            category,
            run,
            start,
            label: ActionLabel::from_dynamic(dynamic),
        }
    }

    fn tl(left: HandCode, right: HandCode, legs: LegCode, n: usize) -> LocationTimeline {
        LocationTimeline {
            left: vec![left; n],
            right: vec![right; n],
            legs: vec![legs; n],
        }
    }

    #[test]
    fn table_combinations() {
        let n = 100;
        let t = tl(HandCode::H2H, HandCode::H2H, LegCode::L2L, n);
        let m = encode_fidgets(
            &t,
            &[act(Category::Both, (0, n), 0, true), act(Category::Leg, (0, n), 0, true)],
        );
        assert!(m.rows[0].iter().all(|&v| v == 1));
        assert!(m.rows[7].iter().all(|&v| v == 1));
        assert!(m.rows[1..7].iter().flatten().all(|&v| v == 0));

        let m = encode_fidgets(&t, &[act(Category::Both, (0, n), 0, false)]);
        assert!(m.rows.iter().flatten().all(|&v| v == 0));

        let t = tl(HandCode::H2F, HandCode::H2A, LegCode::L2G, n);
        let m = encode_fidgets(
            &t,
            &[act(Category::Left, (0, n), 0, true), act(Category::Right, (0, n), 0, true)],
        );
        assert!(m.rows[5].iter().all(|&v| v == 1));
        assert!(m.rows[4].iter().all(|&v| v == 1));
        assert_eq!(m.rows.iter().flatten().filter(|&&v| v == 1).count(), 2 * n);
    }

    #[test]
    fn overlap_nearest_center_and_tail() {
        // windows at 0 (STATIC) and 50 (DYNAMIC) over a 170-frame run
        let acts = [
            act(Category::Left, (0, 170), 0, false),
            act(Category::Left, (0, 170), 50, true),
        ];
        let a = resolve_actions(200, &acts, Category::Left);
        assert_eq!(a[49], Some(ActionLabel::Static));
        // frame 74: centers 49.5 and 99.5 are 24.5 and 25.5 away
        assert_eq!(a[74], Some(ActionLabel::Static));
        assert_eq!(a[75], Some(ActionLabel::Dynamic));
        assert_eq!(a[160], Some(ActionLabel::Dynamic));
        assert_eq!(a[169], Some(ActionLabel::Dynamic));
        assert_eq!(a[170], None);
    }

    #[test]
    fn tie_favours_dynamic() {
        // windows at 0 and 1 have centers 49.5 and 50.5; frame 50 is equidistant
        let acts = [
            act(Category::Leg, (0, 101), 0, false),
            act(Category::Leg, (0, 101), 1, true),
        ];
        let a = resolve_actions(101, &acts, Category::Leg);
        assert_eq!(a[50], Some(ActionLabel::Dynamic));
        assert_eq!(a[49], Some(ActionLabel::Static));
    }

    #[test]
    fn speaking_row() {
        let t = tl(HandCode::HF, HandCode::HF, LegCode::L2G, 10);
        let m = encode_fidgets(&t, &[]);
        let quiet = attach_speaking(&m, &SpeakingTrack { speaking: vec![false; 10] }).unwrap();
        assert_eq!(quiet.rows[8], vec![0; 10]);
        assert_eq!(quiet.pure(), m);
        let loud = attach_speaking(&m, &SpeakingTrack { speaking: vec![true; 10] }).unwrap();
        assert_eq!(loud.rows[8], vec![1; 10]);
        assert!(attach_speaking(&m, &SpeakingTrack { speaking: vec![true; 9] }).is_err());
    }

    fn hand_code() -> impl Strategy<Value = HandCode> {
        prop_oneof![
            Just(HandCode::H2A),
            Just(HandCode::H2L),
            Just(HandCode::H2F),
            Just(HandCode::HF)
        ]
    }

    proptest! {
        #[test]
        fn row_exclusivity(
            codes in proptest::collection::vec((hand_code(), hand_code(), any::<bool>(), any::<bool>()), 120),
            labels in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let n = codes.len();
            let mut t = LocationTimeline {
                left: codes.iter().map(|c| c.0).collect(),
                right: codes.iter().map(|c| c.1).collect(),
                legs: codes.iter().map(|c| if c.3 { LegCode::L2L } else { LegCode::L2G }).collect(),
            };
            for (i, c) in codes.iter().enumerate() {
                if c.2 && i < 60 {
                    t.left[i] = HandCode::H2H;
                    t.right[i] = HandCode::H2H;
                }
            }
            let acts: Vec<SliceAction> = Category::ALL
                .iter()
                .enumerate()
                .flat_map(|(k, &c)| [act(c, (0, n), 0, labels[2 * k]), act(c, (0, n), 20, labels[2 * k + 1])])
                .collect();
            let m = encode_fidgets(&t, &acts);
            for f in 0..n {
                let col = m.column(f);
                prop_assert!(col.iter().all(|&v| v <= 1));
                prop_assert!(col[1] + col[3] + col[5] <= 1);
                prop_assert!(col[2] + col[4] + col[6] <= 1);
                if col[0] == 1 {
                    prop_assert_eq!(col[1..7].iter().sum::<u8>(), 0);
                }
                prop_assert!(col.iter().sum::<u8>() <= 3);
            }
        }
    }
}
