use super::curves::CurvePoint;
use super::dataset::Dataset;
use super::train::dataset_losses;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::music::trials::{run_paired_trials, Pipeline, TrialStats};
use crate::nn::DenoiserModel;

/// Per-SNR reconstruction loss of the model and of the raw quantized input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconRow {
    pub snr_db: f64,
    pub count: usize,
    pub loss: f64,
    pub std_err: f64,
    /// Loss of passing the quantized input through unchanged, i.e. the mean
    /// quantization-noise power per element.
    pub quantized_loss: f64,
}

impl ReconRow {
    pub fn to_points(rows: &[ReconRow]) -> Vec<CurvePoint> {
        let mut out: Vec<CurvePoint> = rows
            .iter()
            .map(|r| CurvePoint::new("recon-loss", r.snr_db, r.loss, r.std_err))
            .collect();
        out.extend(
            rows.iter()
                .map(|r| CurvePoint::new("quantized-loss", r.snr_db, r.quantized_loss, 0.0)),
        );
        out
    }
}

pub fn eval_reconstruction(model: &DenoiserModel<f32>, data: &Dataset) -> Result<Vec<ReconRow>> {
    let losses = dataset_losses(model, data)?;
    let width = data.width() as f64;
    let mut rows = Vec::new();
    for (snr, idx) in data.snr_buckets() {
        if idx.is_empty() {
            continue;
        }
        let vals: Vec<f64> = idx.iter().map(|&i| losses[i]).collect();
        let stats = TrialStats::from_samples(vals);
        let q: f64 = idx
            .iter()
            .map(|&i| {
                data.inputs
                    .row(i)
                    .iter()
                    .zip(data.targets.row(i))
                    .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
                    .sum::<f64>()
                    / width
            })
            .sum::<f64>()
            / idx.len() as f64;
        rows.push(ReconRow {
            snr_db: snr,
            count: idx.len(),
            loss: stats.mean,
            std_err: stats.std_err,
            quantized_loss: q,
        });
    }
    Ok(rows)
}

/// Mean angle MSE for each series at each SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaTable {
    pub series: Vec<String>,
    pub snr_db: Vec<f64>,
    /// `stats[snr][series]`.
    pub stats: Vec<Vec<TrialStats>>,
}

impl DoaTable {
    pub fn get(&self, series: &str, snr_db: f64) -> Option<&TrialStats> {
        let s = self.series.iter().position(|l| l == series)?;
        let r = self.snr_db.iter().position(|&v| v == snr_db)?;
        Some(&self.stats[r][s])
    }

    pub fn to_points(&self) -> Vec<CurvePoint> {
        let mut out = Vec::new();
        for (s, label) in self.series.iter().enumerate() {
            for (r, &snr) in self.snr_db.iter().enumerate() {
                let st = &self.stats[r][s];
                out.push(CurvePoint::new(label.clone(), snr, st.mean, st.std_err));
            }
        }
        out
    }
}

/// Paired trials over the evaluation SNR list. Series: the reconstructed
/// signal (if a model is given), raw quantized baselines, unquantized.
pub fn eval_doa(model: Option<&DenoiserModel<f32>>, config: &ScenarioConfig) -> Result<DoaTable> {
    let mut pipelines = Vec::new();
    if let Some(model) = model {
        pipelines.push(Pipeline::Denoise {
            model,
            bits: config.quantizer.bits,
        });
    }
    pipelines.extend(config.music.baseline_bits.iter().map(|&b| Pipeline::Quantize(b)));
    pipelines.push(Pipeline::Identity);
    let mut stats = Vec::new();
    for &snr in config.eval_snrs() {
        stats.push(run_paired_trials(config, snr, &pipelines, config.music.trials)?);
    }
    Ok(DoaTable {
        series: pipelines.iter().map(Pipeline::label).collect(),
        snr_db: config.eval_snrs().to_vec(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{build_dataset, Split};
    use crate::nn::init_model;
    use crate::rng::rng_from_seed;

    fn small() -> ScenarioConfig {
        let mut c = ScenarioConfig::desk();
        c.data.test_count = 250;
        c
    }

    fn zero_output_model(c: &ScenarioConfig) -> DenoiserModel<f32> {
        let mut m: DenoiserModel<f32> = init_model(&c.architecture(), &mut rng_from_seed(1)).unwrap();
        let last = m.layers.last_mut().unwrap();
        last.dense.weight.fill(0.0);
        last.dense.bias.fill(0.0);
        m
    }

    #[test]
    fn zero_output_gives_target_power() {
        let c = small();
        let data = build_dataset(&c, Split::Test).unwrap();
        let rows = eval_reconstruction(&zero_output_model(&c), &data).unwrap();
        assert_eq!(rows.len(), 5);
        for (row, (_, idx)) in rows.iter().zip(data.snr_buckets()) {
            let expect: f64 = idx
                .iter()
                .map(|&i| data.targets.row(i).iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / 16.0)
                .sum::<f64>()
                / idx.len() as f64;
            assert!((row.loss - expect).abs() < 1e-6 * expect.max(1.0), "{} vs {expect}", row.loss);
            assert_eq!(row.count, 50);
        }
    }

    #[test]
    fn bucket_means_match_streaming_pass() {
        let c = small();
        let data = build_dataset(&c, Split::Test).unwrap();
        let model = init_model(&c.architecture(), &mut rng_from_seed(3)).unwrap();
        let rows = eval_reconstruction(&model, &data).unwrap();
        let losses = dataset_losses(&model, &data).unwrap();
        // Welford update per bucket, visiting records in file order.
        for row in &rows {
            let (mut n, mut mean) = (0.0, 0.0);
            for (i, &l) in losses.iter().enumerate() {
                if data.snr[i] == row.snr_db {
                    n += 1.0;
                    mean += (l - mean) / n;
                }
            }
            assert!((row.loss - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
        assert!(ReconRow::to_points(&rows).iter().all(|p| p.y.is_finite()));
    }

    #[test]
    fn doa_table_layout() {
        let mut c = ScenarioConfig::desk();
        c.noise.snr_db = vec![30.0];
        c.music.trials = 8;
        c.music.grid_step = 0.1;
        let model = init_model(&c.architecture(), &mut rng_from_seed(3)).unwrap();
        let t = eval_doa(Some(&model), &c).unwrap();
        assert_eq!(
            t.series,
            ["recon-1bit", "raw-1bit", "raw-2bit", "raw-3bit", "raw-4bit", "unquantized"]
        );
        assert_eq!(t.to_points().len(), 6);
        assert!(t.get("raw-2bit", 30.0).is_some());
        assert!(t.get("raw-2bit", 20.0).is_none());
        let again = eval_doa(Some(&model), &c).unwrap();
        assert_eq!(t, again);
    }
}
