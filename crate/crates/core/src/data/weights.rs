//! Inverse-frequency class weights.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `w_c = N / (K * n_c)`: unit weights on balanced data, and the weighted
/// sample count always equals `N`.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::param("counts", "no classes"));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::param("counts", format!("class {c} has no samples")));
    }
    let total: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(counts.iter().map(|&n| total as f64 / (k * n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_is_unit() {
        assert_eq!(class_weights(&[7, 7, 7]).unwrap(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_classes() {
        let w = class_weights(&[1, 3]).unwrap();
        assert_eq!(w[0], 2.0);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn table_counts() {
        let counts = [57usize, 356, 3430, 2944];
        let w = class_weights(&counts).unwrap();
        // N = 6787, K = 4
        let expect: Vec<f64> = counts.iter().map(|&n| 6787.0 / (4.0 * n as f64)).collect();
        assert_eq!(w, expect);
        for (got, want) in w.iter().zip([29.768, 4.766, 0.4947, 0.5763]) {
            assert!((got - want).abs() / want < 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_count_names_class() {
        let err = class_weights(&[3, 0, 2]).unwrap_err();
        assert!(format!("{err}").contains("class 1"));
    }
}
