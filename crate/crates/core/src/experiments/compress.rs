use super::curves::CurvePoint;
use super::dataset::Dataset;
use super::eval::{eval_doa, eval_reconstruction};
use crate::config::{CompressMetric, ScenarioConfig};
use crate::error::{Error, Result};
use crate::nn::checkpoint::payload_bytes;
use crate::nn::half::{to_half_precision, HalfReport};
use crate::nn::{DenoiserModel, Precision};

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionRow {
    pub snr_db: f64,
    pub fp32: f64,
    pub fp16: f64,
}

impl CompressionRow {
    /// `|fp16 - fp32| / fp32`.
    pub fn relative_change(&self) -> f64 {
        (self.fp16 - self.fp32).abs() / self.fp32.abs()
    }
}

#[derive(Debug, Clone)]
pub struct CompressionReport {
    pub metric: CompressMetric,
    pub rows: Vec<CompressionRow>,
    pub fp32_payload: usize,
    pub fp16_payload: usize,
    pub half: HalfReport,
    pub model_fp16: DenoiserModel<f32>,
}

impl CompressionReport {
    pub fn payload_ratio(&self) -> f64 {
        self.fp16_payload as f64 / self.fp32_payload as f64
    }

    pub fn to_points(&self) -> Vec<CurvePoint> {
        let mut out = Vec::new();
        for (label, f) in [
            ("fp32", (|r: &CompressionRow| r.fp32) as fn(&CompressionRow) -> f64),
            ("fp16", |r| r.fp16),
            ("relative-change", CompressionRow::relative_change),
        ] {
            out.extend(self.rows.iter().map(|r| CurvePoint::new(label, r.snr_db, f(r), 0.0)));
        }
        out.push(CurvePoint::new("payload-ratio", 0.0, self.payload_ratio(), 0.0));
        out
    }
}

/// Compares an fp32 model against its binary16 rounding, per SNR, on the
/// configured metric (reconstruction loss or DOA MSE).
pub fn compression_report(
    model: &DenoiserModel<f32>,
    test_set: &Dataset,
    config: &ScenarioConfig,
) -> Result<CompressionReport> {
    if model.precision != Precision::Fp32 {
        return Err(Error::invalid("compression needs an fp32 model"));
    }
    let (model_fp16, half) = to_half_precision(model)?;
    let metric = config.compress.metric;
    let rows = match metric {
        CompressMetric::Recon => {
            let a = eval_reconstruction(model, test_set)?;
            let b = eval_reconstruction(&model_fp16, test_set)?;
            a.iter()
                .zip(&b)
                .map(|(x, y)| CompressionRow {
                    snr_db: x.snr_db,
                    fp32: x.loss,
                    fp16: y.loss,
                })
                .collect()
        }
        CompressMetric::Doa => {
            let label = format!("recon-{}bit", config.quantizer.bits);
            let a = eval_doa(Some(model), config)?;
            let b = eval_doa(Some(&model_fp16), config)?;
            config
                .eval_snrs()
                .iter()
                .map(|&snr| CompressionRow {
                    snr_db: snr,
                    fp32: a.get(&label, snr).expect("series present").mean,
                    fp16: b.get(&label, snr).expect("series present").mean,
                })
                .collect()
        }
    };
    Ok(CompressionReport {
        metric,
        rows,
        fp32_payload: payload_bytes(model),
        fp16_payload: payload_bytes(&model_fp16),
        half,
        model_fp16,
    })
}
