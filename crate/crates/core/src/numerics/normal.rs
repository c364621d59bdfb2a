use statrs::function::erf::erfc;

use super::{RngStream, Scalar};

/// Standard normal CDF, Φ(x) = erfc(-x/√2)/2. Saturates to 0/1 beyond |x| > 40.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x > 40.0 {
        1.0
    } else if x < -40.0 {
        0.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// `dim` i.i.d. N(0, std²) draws.
pub fn gaussian_vector<T: Scalar>(rng: &mut RngStream, dim: usize, std: T) -> Vec<T> {
    assert!(std >= T::zero(), "noise std must be nonnegative");
    if std == T::zero() {
        return vec![T::zero(); dim];
    }
    (0..dim).map(|_| T::of(rng.normal()) * std).collect()
}
