//! Post-training precision reduction to IEEE binary16.

use half::f16;

use super::model::DenoiserModel;
use super::Precision;
use crate::error::{Error, Result};

/// Values that exceeded the binary16 range and were clamped to +-65504.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HalfReport {
    pub saturated: usize,
}

fn round_to_half(v: f32, saturated: &mut usize) -> f32 {
    let h = f16::from_f32(v);
    if h.is_infinite() && v.is_finite() {
        *saturated += 1;
        return if v > 0.0 { f16::MAX.to_f32() } else { f16::MIN.to_f32() };
    }
    h.to_f32()
}

/// Rounds every stored value to the nearest binary16 number. The result
/// still computes in f32 but checkpoints at 16 bits per value.
pub fn to_half_precision(model: &DenoiserModel<f32>) -> Result<(DenoiserModel<f32>, HalfReport)> {
    if model.precision != Precision::Fp32 {
        return Err(Error::invalid("model is already stored at half precision"));
    }
    let mut out = model.clone();
    let mut saturated = 0;
    for layer in &mut out.layers {
        let mut arrays: Vec<&mut [f32]> = vec![
            layer.dense.weight.as_slice_mut().expect("standard layout"),
            layer.dense.bias.as_slice_mut().expect("standard layout"),
        ];
        if let Some(bn) = &mut layer.bn {
            arrays.push(bn.gamma.as_slice_mut().expect("standard layout"));
            arrays.push(bn.beta.as_slice_mut().expect("standard layout"));
            arrays.push(bn.running_mean.as_slice_mut().expect("standard layout"));
            arrays.push(bn.running_var.as_slice_mut().expect("standard layout"));
        }
        for a in arrays {
            for v in a.iter_mut() {
                *v = round_to_half(*v, &mut saturated);
            }
        }
    }
    out.precision = Precision::Fp16;
    Ok((out, HalfReport { saturated }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::checkpoint::{decode, encode, payload_bytes};
    use crate::nn::{init_model, Architecture};
    use crate::rng::rng_from_seed;
    use ndarray::Array2;

    fn model() -> DenoiserModel<f32> {
        init_model(&Architecture::uniform(4, 6, 24), &mut rng_from_seed(21)).unwrap()
    }

    #[test]
    fn payload_halves_exactly() {
        let m = model();
        let (h, report) = to_half_precision(&m).unwrap();
        assert_eq!(report.saturated, 0);
        assert_eq!(2 * payload_bytes(&h), payload_bytes(&m));
        let header = encode(&m).len() - payload_bytes(&m);
        assert_eq!(encode(&h).len() - payload_bytes(&h), header);
        assert_eq!(decode(&encode(&h)).unwrap(), h);
    }

    #[test]
    fn representable_values_unchanged_and_error_bounded() {
        let mut m = model();
        m.layers[0].dense.weight[[0, 0]] = 0.5;
        m.layers[0].dense.weight[[0, 1]] = 1.0;
        let (h, _) = to_half_precision(&m).unwrap();
        assert_eq!(h.layers[0].dense.weight[[0, 0]], 0.5);
        assert_eq!(h.layers[0].dense.weight[[0, 1]], 1.0);
        for (a, b) in m.layers.iter().zip(&h.layers) {
            for (x, y) in a.dense.weight.iter().zip(b.dense.weight.iter()) {
                if x.abs() >= f16::MIN_POSITIVE.to_f32() {
                    assert!(((x - y) / x).abs() <= 2f32.powi(-11) * 1.0001, "{x} -> {y}");
                }
            }
        }
    }

    #[test]
    fn overflow_saturates_and_is_reported() {
        let mut m = model();
        m.layers[1].dense.bias[0] = 1e6;
        m.layers[1].dense.bias[1] = -7e4;
        let (h, report) = to_half_precision(&m).unwrap();
        assert_eq!(report.saturated, 2);
        assert_eq!(h.layers[1].dense.bias[0], 65504.0);
        assert_eq!(h.layers[1].dense.bias[1], -65504.0);
        assert!(to_half_precision(&h).is_err());
    }

    #[test]
    fn zero_model_is_unchanged() {
        let mut m = model();
        for l in &mut m.layers {
            l.dense.weight.fill(0.0);
        }
        let (h, _) = to_half_precision(&m).unwrap();
        let x = Array2::from_elem((3, 8), 0.7f32);
        assert_eq!(m.infer(&x).unwrap(), h.infer(&x).unwrap());
    }
}
