//! Binary model checkpoints (little-endian).
//!
//! ```text
//! "QDNN" | version u16 | precision u8 (0 fp32, 1 fp16) | activation u8 | flags u8
//! layer count u32
//! per layer: kind u8 | in_dim u32 | out_dim u32 | has_bn u8 | [bn eps f64 | bn momentum f64]
//!            W (row-major) | b | [gamma | beta | running_mean | running_var]
//! CRC32 (IEEE) of every preceding byte, u32
//! ```
//!
//! Parameter values are f32, or IEEE binary16 when the precision flag is 1.

use std::fs;
use std::path::Path;

use half::f16;
use ndarray::{Array1, Array2};

use super::model::{Dense, DenoiserModel, FcLayer, LayerKind};
use super::ops::BatchNorm;
use super::{Activation, Precision};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QDNN";
pub const VERSION: u16 = 1;
const FLAG_INPUT_BIAS: u8 = 1;

/// Bytes of encoded parameter values (excludes header and CRC).
pub fn payload_bytes(model: &DenoiserModel<f32>) -> usize {
    model.num_stored_values() * value_width(model.precision)
}

fn value_width(p: Precision) -> usize {
    match p {
        Precision::Fp32 => 4,
        Precision::Fp16 => 2,
    }
}

pub fn encode(model: &DenoiserModel<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + payload_bytes(model));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match model.precision {
        Precision::Fp32 => 0,
        Precision::Fp16 => 1,
    });
    out.push(model.activation.tag());
    out.push(if model.input_bias { FLAG_INPUT_BIAS } else { 0 });
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());

    let put = |out: &mut Vec<u8>, values: &mut dyn Iterator<Item = &f32>| match model.precision {
        Precision::Fp32 => values.for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Precision::Fp16 => values.for_each(|v| out.extend_from_slice(&f16::from_f32(*v).to_le_bytes())),
    };
    for layer in &model.layers {
        let spec = layer.spec();
        out.push(spec.kind.tag());
        out.extend_from_slice(&(spec.in_dim as u32).to_le_bytes());
        out.extend_from_slice(&(spec.out_dim as u32).to_le_bytes());
        out.push(spec.has_bn as u8);
        if let Some(bn) = &layer.bn {
            out.extend_from_slice(&(bn.eps as f64).to_le_bytes());
            out.extend_from_slice(&(bn.momentum as f64).to_le_bytes());
        }
        put(&mut out, &mut layer.dense.weight.iter());
        put(&mut out, &mut layer.dense.bias.iter());
        if let Some(bn) = &layer.bn {
            put(&mut out, &mut bn.gamma.iter());
            put(&mut out, &mut bn.beta.iter());
            put(&mut out, &mut bn.running_mean.iter());
            put(&mut out, &mut bn.running_var.iter());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(format!(
                "truncated checkpoint: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn values(&mut self, n: usize, precision: Precision) -> Result<Vec<f32>> {
        let width = value_width(precision);
        let bytes = self.take(n.checked_mul(width).ok_or_else(|| Error::format("size overflow"))?)?;
        Ok(match precision {
            Precision::Fp32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Precision::Fp16 => bytes
                .chunks_exact(2)
                .map(|c| f16::from_le_bytes(c.try_into().unwrap()).to_f32())
                .collect(),
        })
    }
}

pub fn decode(bytes: &[u8]) -> Result<DenoiserModel<f32>> {
    if bytes.len() < 4 + 2 + 3 + 4 + 4 {
        return Err(Error::format("checkpoint too short"));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format("bad magic, not a QDNN checkpoint"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let precision = match r.u8()? {
        0 => Precision::Fp32,
        1 => Precision::Fp16,
        p => return Err(Error::format(format!("unknown precision flag {p}"))),
    };
    let activation = Activation::from_tag(r.u8()?)
        .ok_or_else(|| Error::format("unknown activation tag"))?;
    let flags = r.u8()?;
    let count = r.u32()? as usize;
    let mut layers = Vec::new();
    for i in 0..count {
        let kind = LayerKind::from_tag(r.u8()?)
            .ok_or_else(|| Error::format(format!("layer {i}: unknown kind tag")))?;
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        let has_bn = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::format(format!("layer {i}: bad has_bn byte {b}"))),
        };
        let bn_params = if has_bn { Some((r.f64()?, r.f64()?)) } else { None };
        let wlen = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| Error::format(format!("layer {i}: dimension overflow")))?;
        let weight = Array2::from_shape_vec((in_dim, out_dim), r.values(wlen, precision)?)
            .map_err(|e| Error::format(e.to_string()))?;
        let bias = Array1::from(r.values(out_dim, precision)?);
        let bn = match bn_params {
            Some((eps, momentum)) => Some(BatchNorm {
                gamma: Array1::from(r.values(out_dim, precision)?),
                beta: Array1::from(r.values(out_dim, precision)?),
                running_mean: Array1::from(r.values(out_dim, precision)?),
                running_var: Array1::from(r.values(out_dim, precision)?),
                eps: eps as f32,
                momentum: momentum as f32,
            }),
            None => None,
        };
        layers.push(FcLayer {
            kind,
            dense: Dense { weight, bias },
            bn,
        });
    }
    if r.pos != body.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after the last layer",
            body.len() - r.pos
        )));
    }
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::format("CRC mismatch"));
    }
    DenoiserModel::from_layers(layers, activation, flags & FLAG_INPUT_BIAS != 0, precision)
        .map_err(|e| Error::format(format!("inconsistent model: {e}")))
}

pub fn save_checkpoint(model: &DenoiserModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DenoiserModel<f32>> {
    decode(&fs::read(path)?)
}
