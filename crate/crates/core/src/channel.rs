//! The Δ-noisy line: a fixed number of transmitted components is replaced
//! by gross errors at random positions.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Vector;
use crate::seeds::{self, Rng};

pub const DEFAULT_GROSS_MAGNITUDE: f64 = 1000.0;
/// Error values with magnitude below this fraction of `G` are never drawn.
pub const DEAD_ZONE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
}

/// How `Δn` becomes an integer count of corrupted entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SupportRounding {
    /// Nearest integer, ties away from zero.
    #[default]
    Round,
    Floor,
}

impl SupportRounding {
    pub fn support_size(self, delta: f64, n: usize) -> usize {
        let x = delta * n as f64;
        match self {
            SupportRounding::Round => x.round() as usize,
            SupportRounding::Floor => x.floor() as usize,
        }
    }
}

/// Owns its generator, so one instance serves one sequence of calls.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    delta: f64,
    gross_magnitude: f64,
    rounding: SupportRounding,
    seed: u64,
    rng: Rng,
}

impl ChannelModel {
    pub fn new(delta: f64, gross_magnitude: f64, seed: u64) -> Result<Self, ChannelError> {
        if !(0.0..1.0).contains(&delta) {
            return Err(ChannelError::InvalidParameter(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        if !(gross_magnitude > 0.0 && gross_magnitude.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "gross magnitude must be positive and finite, got {gross_magnitude}"
            )));
        }
        Ok(Self {
            delta,
            gross_magnitude,
            rounding: SupportRounding::Round,
            seed,
            rng: seeds::rng_from_seed(seed),
        })
    }

    pub fn with_rounding(mut self, rounding: SupportRounding) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gross_magnitude(&self) -> f64 {
        self.gross_magnitude
    }

    pub fn rounding(&self) -> SupportRounding {
        self.rounding
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn support_size(&self, n: usize) -> usize {
        self.rounding.support_size(self.delta, n).min(n)
    }

    /// Returns `(z̄, x̄)` with `z̄ = z + x̄`. The error `x̄` is for test
    /// harnesses; a decoder only ever sees `z̄`.
    pub fn corrupt(&mut self, z: &Vector) -> (Vector, Vector) {
        let n = z.dim();
        let r = self.support_size(n);
        let mut err = vec![0.0; n];
        let g = self.gross_magnitude;
        for pos in index::sample(&mut self.rng, n, r) {
            let mag = self.rng.gen_range(DEAD_ZONE * g..=g);
            err[pos] = if self.rng.gen::<bool>() { mag } else { -mag };
        }
        let z_bar = z.iter().zip(&err).map(|(a, e)| a + e).collect();
        (Vector::from_vec_unchecked(z_bar), Vector::from_vec_unchecked(err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support(v: &Vector) -> usize {
        v.iter().filter(|x| **x != 0.0).count()
    }

    #[test]
    fn noiseless_channel() {
        let z = Vector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mut ch = ChannelModel::new(0.0, 1000.0, 1).unwrap();
        let (zb, e) = ch.corrupt(&z);
        assert_eq!(zb, z);
        assert_eq!(e, Vector::zeros(3));
    }

    #[test]
    fn table_one_support_sizes() {
        let ch = ChannelModel::new(0.08, 1000.0, 1).unwrap();
        assert_eq!(ch.support_size(320), 26);
        assert_eq!(ch.clone().with_rounding(SupportRounding::Floor).support_size(320), 25);
        assert_eq!(ch.support_size(864), 69);
    }

    #[test]
    fn half_corrupted_reproducibly() {
        let z = Vector::zeros(10);
        let (a, ea) = ChannelModel::new(0.5, 1000.0, 42).unwrap().corrupt(&z);
        let (b, _) = ChannelModel::new(0.5, 1000.0, 42).unwrap().corrupt(&z);
        assert_eq!(support(&ea), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn values_respect_magnitude_and_dead_zone() {
        let mut ch = ChannelModel::new(0.9, 10.0, 3).unwrap();
        for _ in 0..50 {
            let (_, e) = ch.corrupt(&Vector::zeros(40));
            for v in e.iter().filter(|v| **v != 0.0) {
                assert!(v.abs() >= 1e-2 && v.abs() <= 10.0);
            }
        }
    }

    #[test]
    fn successive_calls_differ() {
        let mut ch = ChannelModel::new(0.3, 10.0, 3).unwrap();
        let z = Vector::zeros(30);
        assert_ne!(ch.corrupt(&z).1, ch.corrupt(&z).1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChannelModel::new(1.0, 1.0, 0).is_err());
        assert!(ChannelModel::new(-0.1, 1.0, 0).is_err());
        assert!(ChannelModel::new(0.1, 0.0, 0).is_err());
        assert!(ChannelModel::new(0.1, f64::INFINITY, 0).is_err());
    }

    #[test]
    fn positions_are_uniform() {
        // chi-squared with 19 degrees of freedom, 1% critical value 36.19
        let n = 20;
        let trials = 10_000;
        let mut counts = vec![0usize; n];
        let mut ch = ChannelModel::new(0.1, 1.0, 2024).unwrap();
        let z = Vector::zeros(n);
        for _ in 0..trials {
            let (_, e) = ch.corrupt(&z);
            for (i, v) in e.iter().enumerate() {
                if *v != 0.0 {
                    counts[i] += 1;
                }
            }
        }
        let expected = (trials * 2) as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    proptest::proptest! {
        #[test]
        fn exact_support_every_call(n in 1usize..200, delta in 0.0f64..0.99, seed in proptest::prelude::any::<u64>()) {
            let mut ch = ChannelModel::new(delta, 1000.0, seed).unwrap();
            let z = Vector::new((0..n).map(|i| i as f64).collect()).unwrap();
            let copy = z.clone();
            let (zb, e) = ch.corrupt(&z);
            proptest::prop_assert_eq!(support(&e), (delta * n as f64).round() as usize);
            proptest::prop_assert_eq!(&z, &copy);
            for i in 0..n {
                proptest::prop_assert_eq!(zb[i], z[i] + e[i]);
            }
        }
    }
}
