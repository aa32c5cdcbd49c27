//! Forest-importance feature selection.

use alloc::vec::Vec;

use crate::forest::{ForestOptions, RandomForest};
use crate::linalg::Matrix;
use crate::{Error, Result};

pub const DEFAULT_RF_NUM: usize = 200;

/// Indices of the `rf_num` most important columns, most important first;
/// equal importances keep the lower index first. Selecting every column
/// returns them in order without fitting a forest.
pub fn select_features(x: &Matrix, y: &[bool], rf_num: usize, seed: u64) -> Result<Vec<usize>> {
    if rf_num == 0 {
        return Err(Error::invalid("rf_num must be positive"));
    }
    if rf_num > x.cols() {
        return Err(Error::invalid(alloc::format!(
            "rf_num {rf_num} exceeds the embedding length {}",
            x.cols()
        )));
    }
    if rf_num == x.cols() {
        return Ok((0..rf_num).collect());
    }
    let forest = RandomForest::fit(
        x,
        y,
        &ForestOptions {
            seed,
            ..ForestOptions::default()
        },
    )?;
    let imp = forest.feature_importances();
    let mut order: Vec<usize> = (0..x.cols()).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    order.truncate(rf_num);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(n: usize, p: usize, seed: u64) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn identity_when_selecting_all() {
        let (x, y) = noisy(10, 6, 1);
        assert_eq!(select_features(&x, &y, 6, 0).unwrap(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn planted_label_ranked_first() {
        let (mut x, y) = noisy(40, 30, 2);
        for (r, &label) in y.iter().enumerate() {
            x.set(r, 17, label as u8 as f64);
        }
        assert_eq!(select_features(&x, &y, 5, 0).unwrap()[0], 17);
    }

    #[test]
    fn fold_dependence_on_noise() {
        let (x, y) = noisy(30, 40, 3);
        let a: Vec<usize> = (0..20).collect();
        let b: Vec<usize> = (10..30).collect();
        let sa = select_features(&x.select_rows(&a), &a.iter().map(|&i| y[i]).collect::<Vec<_>>(), 5, 0).unwrap();
        let sb = select_features(&x.select_rows(&b), &b.iter().map(|&i| y[i]).collect::<Vec<_>>(), 5, 0).unwrap();
        assert_ne!(sa, sb);
    }

    #[test]
    fn zero_rejected() {
        let (x, y) = noisy(10, 6, 1);
        assert!(select_features(&x, &y, 0, 0).is_err());
        assert!(select_features(&x, &y, 7, 0).is_err());
    }
}
