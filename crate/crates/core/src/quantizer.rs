//! B-bit mid-tread rounding ADC applied independently to I and Q.
//!
//! With step `delta = 2V / 2^B` the output alphabet is `{k * delta}` for
//! `|k| <= 2^(B-1)`, i.e. `2^B + 1` levels including both rails. Inputs beyond
//! `[-V, V]` saturate.

use ndarray::Zip;
use num_complex::Complex64;

use crate::array::{NoiseSpec, SnapshotKind, SnapshotMatrix};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    bits: u8,
    full_scale: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u8, full_scale: f64) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::invalid(format!("bit depth must be in 1..=24, got {bits}")));
        }
        if !(full_scale > 0.0 && full_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "full scale must be positive, got {full_scale}"
            )));
        }
        Ok(Self { bits, full_scale })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    /// `2V / 2^B`.
    pub fn step(&self) -> f64 {
        2.0 * self.full_scale / (1u64 << self.bits) as f64
    }

    pub fn num_levels(&self) -> usize {
        (1usize << self.bits) + 1
    }

    /// Every representable output value, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let half = 1i64 << (self.bits - 1);
        let step = self.step();
        (-half..=half).map(|k| k as f64 * step).collect()
    }

    /// Level index `k` such that the output is `k * step`.
    pub fn level_index(&self, x: f64) -> i64 {
        let clamped = x.clamp(-self.full_scale, self.full_scale);
        // f64::round rounds exact halves away from zero.
        (clamped / self.step()).round() as i64
    }

    pub fn is_clipped(&self, x: f64) -> bool {
        x.abs() > self.full_scale
    }
}

pub fn quantize_scalar(x: f64, spec: &QuantizerSpec) -> f64 {
    spec.level_index(x) as f64 * spec.step()
}

fn quantize_complex(z: Complex64, spec: &QuantizerSpec) -> Complex64 {
    Complex64::new(quantize_scalar(z.re, spec), quantize_scalar(z.im, spec))
}

/// Saturation counter over real components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClipStats {
    pub clipped: u64,
    pub total: u64,
}

impl ClipStats {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clipped as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: ClipStats) {
        self.clipped += other.clipped;
        self.total += other.total;
    }
}

pub fn quantize_snapshots(x: &SnapshotMatrix, spec: &QuantizerSpec) -> SnapshotMatrix {
    quantize_snapshots_with_stats(x, spec).0
}

pub fn quantize_snapshots_with_stats(
    x: &SnapshotMatrix,
    spec: &QuantizerSpec,
) -> (SnapshotMatrix, ClipStats) {
    let data = x.data().mapv(|z| quantize_complex(z, spec));
    let clipped = x
        .data()
        .iter()
        .map(|z| spec.is_clipped(z.re) as u64 + spec.is_clipped(z.im) as u64)
        .sum();
    let stats = ClipStats {
        clipped,
        total: 2 * x.data().len() as u64,
    };
    let q = SnapshotMatrix::new(data, SnapshotKind::Quantized)
        .expect("quantizer output is finite for finite input");
    (q, stats)
}

/// `q = quantize(x) - x`, componentwise.
pub fn quantization_noise(x: &SnapshotMatrix, spec: &QuantizerSpec) -> SnapshotMatrix {
    let mut q = x.data().clone();
    Zip::from(&mut q).for_each(|z| *z = quantize_complex(*z, spec) - *z);
    SnapshotMatrix::new(q, x.kind()).expect("finite input gives finite noise")
}

/// `K * A_max + 4 sigma`, with sigma the per-component noise deviation.
pub fn full_scale_for(num_sources: usize, max_amplitude: f64, noise: &NoiseSpec) -> f64 {
    num_sources as f64 * max_amplitude + 4.0 * noise.component_std()
}

/// Full scale that keeps the loudest configured scenario (lowest SNR) below
/// the rails with clipping probability under 1e-4 per component.
pub fn default_full_scale(config: &ScenarioConfig) -> f64 {
    let min_snr = config
        .noise
        .snr_db
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let noise = if min_snr.is_finite() {
        NoiseSpec::from_snr_db(min_snr)
    } else {
        NoiseSpec::noiseless()
    };
    full_scale_for(config.sources.count, 1.0, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{draw_source_angles, synthesize, ArrayGeometry};
    use crate::rng::rng_from_seed;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn spec(bits: u8, v: f64) -> QuantizerSpec {
        QuantizerSpec::new(bits, v).unwrap()
    }

    #[test]
    fn one_bit_unit_scale_examples() {
        let s = spec(1, 1.0);
        assert_eq!(s.step(), 1.0);
        assert_eq!(quantize_scalar(0.3, &s), 0.0);
        assert_eq!(quantize_scalar(0.6, &s), 1.0);
        assert_eq!(quantize_scalar(-0.6, &s), -1.0);
        assert_eq!(s.levels(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn ties_round_away_from_zero() {
        let s = spec(2, 1.0); // step 0.5
        assert_eq!(quantize_scalar(0.25, &s), 0.5);
        assert_eq!(quantize_scalar(-0.25, &s), -0.5);
        assert_eq!(quantize_scalar(0.75, &s), 1.0);
    }

    #[test]
    fn levels_are_fixed_points() {
        for bits in 1..=6 {
            let s = spec(bits, 2.5);
            assert_eq!(s.levels().len(), s.num_levels());
            for l in s.levels() {
                assert_eq!(quantize_scalar(l, &s), l);
            }
        }
    }

    #[test]
    fn saturates_out_of_range() {
        let s = spec(3, 1.0);
        assert_eq!(quantize_scalar(7.0, &s), 1.0);
        assert_eq!(quantize_scalar(-1e9, &s), -1.0);
        assert!(s.is_clipped(1.01));
    }

    #[test]
    fn invalid_specs() {
        assert!(QuantizerSpec::new(0, 1.0).is_err());
        assert!(QuantizerSpec::new(2, 0.0).is_err());
        assert!(QuantizerSpec::new(2, f64::NAN).is_err());
    }

    fn random_matrix(seed: u64, v: f64) -> SnapshotMatrix {
        let mut rng = rng_from_seed(seed);
        let d = Array2::from_shape_fn((6, 50), |_| {
            Complex64::new(rng.random_range(-v..=v), rng.random_range(-v..=v))
        });
        SnapshotMatrix::new(d, SnapshotKind::Clean).unwrap()
    }

    #[test]
    fn one_bit_components_are_ternary() {
        let x = random_matrix(1, 2.0);
        let s = spec(1, 2.0);
        let y = quantize_snapshots(&x, &s);
        assert_eq!(y.kind(), SnapshotKind::Quantized);
        for z in y.data() {
            for c in [z.re, z.im] {
                assert!(c == -2.0 || c == 0.0 || c == 2.0);
            }
        }
    }

    #[test]
    fn quantization_is_idempotent_and_noise_consistent() {
        let x = random_matrix(2, 1.5);
        let s = spec(3, 1.5);
        let y = quantize_snapshots(&x, &s);
        assert_eq!(quantize_snapshots(&y, &s).data(), y.data());
        let q = quantization_noise(&x, &s);
        let half = s.step() / 2.0;
        for ((qz, yz), xz) in q.data().iter().zip(y.data()).zip(x.data()) {
            assert_eq!(*qz, *yz - *xz);
            assert!(qz.re.abs() <= half && qz.im.abs() <= half);
        }
        assert!(quantization_noise(&y, &s).data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sixteen_bits_is_nearly_transparent() {
        let x = random_matrix(3, 1.0);
        let s = spec(16, 1.0);
        let y = quantize_snapshots(&x, &s);
        let err = (y.data() - x.data()).iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        assert!(err <= s.step() / 2.0);
        assert!(err < 2e-5);
    }

    #[test]
    fn noise_variance_is_step_squared_over_twelve() {
        let s = spec(3, 1.0);
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let var = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..=1.0);
                (quantize_scalar(x, &s) - x).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let expect = s.step().powi(2) / 12.0;
        assert!((var / expect - 1.0).abs() < 0.05, "{var} vs {expect}");
    }

    #[test]
    fn full_scale_examples() {
        let v = full_scale_for(3, 1.0, &NoiseSpec::from_snr_db(50.0));
        assert!((v - (3.0 + 4.0 * (1e-5f64 / 2.0).sqrt())).abs() < 1e-12);
        assert!((v - 3.009).abs() < 1e-3);
        assert_eq!(full_scale_for(1, 1.0, &NoiseSpec::noiseless()), 1.0);
    }

    #[test]
    fn auto_full_scale_rarely_clips() {
        let g = ArrayGeometry::half_wavelength(8).unwrap();
        let noise = NoiseSpec::from_snr_db(10.0);
        let s = spec(1, full_scale_for(3, 1.0, &noise));
        let mut stats = ClipStats::default();
        for seed in 0..2500 {
            let mut rng = rng_from_seed(seed);
            let src = draw_source_angles(3, (-30.0, 30.0), 1.0, &mut rng).unwrap();
            let x = synthesize(&src, &g, &noise, 25, &mut rng).unwrap();
            stats.merge(quantize_snapshots_with_stats(&x, &s).1);
        }
        assert!(stats.total >= 1_000_000);
        assert!(stats.rate() < 1e-3, "clip rate {}", stats.rate());
    }

    proptest! {
        #[test]
        fn error_bound_and_monotonicity(bits in 1u8..10, v in 0.1f64..10.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let s = spec(bits, v);
            let (x1, x2) = (a.min(b) * v, a.max(b) * v);
            prop_assert!((quantize_scalar(x1, &s) - x1).abs() <= s.step() / 2.0 + 1e-12);
            prop_assert!(quantize_scalar(x1, &s) <= quantize_scalar(x2, &s));
            let k = s.level_index(x1);
            prop_assert!(k.unsigned_abs() <= 1u64 << (bits - 1));
        }
    }
}
