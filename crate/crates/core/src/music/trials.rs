//! Monte-Carlo DOA trials with per-trial seeding.
//!
//! Every pipeline evaluated in one call sees the same angles, source phases
//! and receiver noise in each trial; only the signal transform differs.

use ndarray::Array2;
use rayon::prelude::*;

use super::covariance::sample_covariance;
use super::estimator::MusicEstimator;
use super::metric::doa_mse_with;
use crate::array::{draw_source_angles, synthesize, SnapshotKind, SnapshotMatrix};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nn::DenoiserModel;
use crate::quantizer::quantize_snapshots;
use crate::rng::{record_seed, rng_from_seed, stream_seed, streams};

/// Signal transform applied between synthesis and covariance estimation.
#[derive(Debug, Clone, Copy)]
pub enum Pipeline<'a> {
    Identity,
    Quantize(u8),
    /// Quantize at `bits`, then reconstruct each snapshot with the network.
    Denoise {
        model: &'a DenoiserModel<f32>,
        bits: u8,
    },
}

impl Pipeline<'_> {
    pub fn label(&self) -> String {
        match self {
            Pipeline::Identity => "unquantized".into(),
            Pipeline::Quantize(b) => format!("raw-{b}bit"),
            Pipeline::Denoise { bits, .. } => format!("recon-{bits}bit"),
        }
    }

    pub fn apply(&self, x: &SnapshotMatrix, config: &ScenarioConfig) -> Result<SnapshotMatrix> {
        match *self {
            Pipeline::Identity => Ok(x.clone()),
            Pipeline::Quantize(bits) => Ok(quantize_snapshots(x, &config.quantizer_spec(bits)?)),
            Pipeline::Denoise { model, bits } => {
                let q = quantize_snapshots(x, &config.quantizer_spec(bits)?);
                denoise_snapshots(model, &q)
            }
        }
    }
}

/// Runs every column through the network independently.
pub fn denoise_snapshots(model: &DenoiserModel<f32>, y: &SnapshotMatrix) -> Result<SnapshotMatrix> {
    let m = y.num_sensors();
    if model.input_width() != 2 * m {
        return Err(Error::dim(format!(
            "model expects {} features, snapshots have 2M = {}",
            model.input_width(),
            2 * m
        )));
    }
    let n = y.num_snapshots();
    let mut batch = Array2::<f32>::zeros((n, 2 * m));
    for c in 0..n {
        for (dst, v) in batch.row_mut(c).iter_mut().zip(y.column_interleaved(c)) {
            *dst = v as f32;
        }
    }
    let out = model.infer(&batch)?;
    let cols: Vec<Vec<f64>> = out
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    SnapshotMatrix::from_interleaved_columns(cols.iter().map(Vec::as_slice), SnapshotKind::Reconstructed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub mean: f64,
    pub median: f64,
    pub std_err: f64,
    /// Per-trial MSE in trial-index order.
    pub per_trial: Vec<f64>,
}

impl TrialStats {
    pub fn from_samples(per_trial: Vec<f64>) -> Self {
        let n = per_trial.len() as f64;
        let mean = per_trial.iter().sum::<f64>() / n;
        let var = if per_trial.len() > 1 {
            per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = per_trial.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        Self {
            mean,
            median,
            std_err: (var / n).sqrt(),
            per_trial,
        }
    }

    /// Standard error of the per-trial difference `self - other`.
    pub fn paired_std_err(&self, other: &TrialStats) -> f64 {
        let diffs: Vec<f64> = self
            .per_trial
            .iter()
            .zip(&other.per_trial)
            .map(|(a, b)| a - b)
            .collect();
        TrialStats::from_samples(diffs).std_err
    }
}

/// Base seed for trials at `snr_db`; shared by every series at that SNR.
pub fn trial_base_seed(config: &ScenarioConfig, snr_db: f64) -> u64 {
    stream_seed(stream_seed(config.seed, streams::DOA_TRIALS), snr_db.to_bits())
}

pub fn run_trials(
    config: &ScenarioConfig,
    snr_db: f64,
    pipeline: Pipeline<'_>,
    trials: usize,
) -> Result<TrialStats> {
    Ok(run_paired_trials(config, snr_db, &[pipeline], trials)?.remove(0))
}

/// Mean/median/std-error of the angle MSE for each pipeline over `trials`
/// paired trials.
pub fn run_paired_trials(
    config: &ScenarioConfig,
    snr_db: f64,
    pipelines: &[Pipeline<'_>],
    trials: usize,
) -> Result<Vec<TrialStats>> {
    if trials == 0 {
        return Err(Error::invalid("trial count must be positive"));
    }
    let geom = config.geometry()?;
    let estimator = MusicEstimator::new(geom, config.grid()?);
    let noise = config.noise_at(snr_db);
    let base = trial_base_seed(config, snr_db);
    let k = config.sources.count;
    let n = config.music.snapshots;

    let rows: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(record_seed(base, t));
            let sources = draw_source_angles(k, config.angle_range(), config.sources.min_sep, &mut rng)?;
            let x = synthesize(&sources, &geom, &noise, n, &mut rng)?;
            pipelines
                .iter()
                .map(|p| {
                    let y = p.apply(&x, config)?;
                    let r = sample_covariance(&y, n)?;
                    let est = estimator.estimate(&r, k)?;
                    doa_mse_with(&est.angles, sources.angles(), config.music.pairing)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok((0..pipelines.len())
        .map(|p| TrialStats::from_samples(rows.iter().map(|r| r[p]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ScenarioConfig {
        let mut c = ScenarioConfig::desk();
        c.sources.count = 2;
        c.sources.min_sep = 10.0;
        c.music.grid_step = 0.05;
        c
    }

    #[test]
    fn stats_basics() {
        let s = TrialStats::from_samples(vec![1.0, 3.0, 2.0, 10.0]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!(s.std_err > 0.0);
        assert_eq!(s.paired_std_err(&s), 0.0);
    }

    #[test]
    fn identity_pipeline_high_snr_is_near_exact() {
        let c = small_config();
        let s = run_trials(&c, 50.0, Pipeline::Identity, 50).unwrap();
        let step = c.music.grid_step;
        assert!(s.mean < step * step, "mean {}", s.mean);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let c = small_config();
        let a = run_trials(&c, 20.0, Pipeline::Quantize(2), 20).unwrap();
        let b = run_trials(&c, 20.0, Pipeline::Quantize(2), 20).unwrap();
        assert_eq!(a, b);
        let paired = run_paired_trials(&c, 20.0, &[Pipeline::Identity, Pipeline::Quantize(2)], 20).unwrap();
        assert_eq!(paired[1], a);
    }

    #[test]
    fn labels() {
        assert_eq!(Pipeline::Identity.label(), "unquantized");
        assert_eq!(Pipeline::Quantize(3).label(), "raw-3bit");
    }
}
