use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

/// He (Kaiming) normal initialization: i.i.d. `N(0, 2 / fan_in)`.
pub fn he_init<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut SeededRng) -> Result<Tensor<T>> {
    if fan_in == 0 {
        return Err(Error::param("fan_in", "must be >= 1"));
    }
    let std = Float::sqrt(2.0 / fan_in as f64);
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n).map(|_| T::of(rng.normal(0.0, std))).collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_variance(t: &Tensor<f64>) -> f64 {
        let n = t.numel() as f64;
        let mean = t.sum() / n;
        t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn variance_follows_fan_in() {
        for (fan_in, target) in [(50usize, 0.04f64), (2, 1.0)] {
            let t: Tensor<f64> = he_init(&[10_000], fan_in, &mut SeededRng::new(3)).unwrap();
            let v = sample_variance(&t);
            assert!((v / target - 1.0).abs() < 0.2, "fan_in {fan_in}: variance {v}");
        }
    }

    #[test]
    fn same_seed_same_tensor() {
        let a: Tensor<f32> = he_init(&[4, 3, 3, 3], 27, &mut SeededRng::new(9)).unwrap();
        let b: Tensor<f32> = he_init(&[4, 3, 3, 3], 27, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn zero_fan_in_is_rejected() {
        assert!(he_init::<f32>(&[3], 0, &mut SeededRng::new(0)).is_err());
    }
}
