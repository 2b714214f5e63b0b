use super::curves::CurvePoint;
use crate::array::{synthesize, SourceSet};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::music::trials::Pipeline;
use crate::music::{sample_covariance, MusicEstimator};
use crate::nn::DenoiserModel;
use crate::rng::{rng_from_seed, stream_seed, streams};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpectrum {
    pub label: String,
    /// Pseudo-spectrum in dB relative to its own maximum.
    pub db: Vec<f64>,
    /// Picked angles, ascending.
    pub peaks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub seed: u64,
    pub truth: Vec<f64>,
    pub grid: Vec<f64>,
    pub series: Vec<SeriesSpectrum>,
}

impl SpectrumComparison {
    pub fn get(&self, label: &str) -> Option<&SeriesSpectrum> {
        self.series.iter().find(|s| s.label == label)
    }

    pub fn to_points(&self) -> Vec<CurvePoint> {
        self.series
            .iter()
            .flat_map(|s| {
                self.grid
                    .iter()
                    .zip(&s.db)
                    .map(|(&x, &y)| CurvePoint::new(s.label.clone(), x, y, 0.0))
            })
            .collect()
    }
}

impl SeriesSpectrum {
    /// Number of `targets` that get a distinct picked peak within `tol`
    /// degrees, matching greedily in target order.
    pub fn resolved(&self, targets: &[f64], tol: f64) -> usize {
        let mut used = vec![false; self.peaks.len()];
        let mut hits = 0;
        for &t in targets {
            let best = self
                .peaks
                .iter()
                .enumerate()
                .filter(|(i, p)| !used[*i] && (*p - t).abs() <= tol)
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()));
            if let Some((i, _)) = best {
                used[i] = true;
                hits += 1;
            }
        }
        hits
    }
}

/// MUSIC spectra of one shared realization at the configured angles and SNR
/// under each pipeline: unquantized, raw 2- and 3-bit, and the network's
/// reconstruction of the 1-bit signal when a model is given.
pub fn spectrum_compare(model: Option<&DenoiserModel<f32>>, config: &ScenarioConfig) -> Result<SpectrumComparison> {
    let sc = &config.spectrum;
    let (lo, hi) = (config.music.grid_min, config.music.grid_max);
    if let Some(&bad) = sc.angles.iter().find(|&&a| a < lo || a > hi) {
        return Err(Error::invalid(format!("spectrum angle {bad} outside the scan range [{lo}, {hi}]")));
    }
    let sources = SourceSet::new(sc.angles.clone())?;
    let k = sources.len();
    let geom = config.geometry()?;
    let grid = config.grid()?;
    let estimator = MusicEstimator::new(geom, grid);
    let seed = stream_seed(config.seed, streams::SPECTRUM);
    let n = config.music.snapshots;
    let x = synthesize(&sources, &geom, &config.noise_at(sc.snr_db), n, &mut rng_from_seed(seed))?;

    let mut pipelines = vec![Pipeline::Identity, Pipeline::Quantize(2), Pipeline::Quantize(3)];
    if let Some(model) = model {
        pipelines.push(Pipeline::Denoise {
            model,
            bits: config.quantizer.bits,
        });
    }
    let mut series = Vec::new();
    for p in &pipelines {
        let y = p.apply(&x, config)?;
        let est = estimator.estimate(&sample_covariance(&y, n)?, k)?;
        let max = est.spectrum.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        series.push(SeriesSpectrum {
            label: p.label(),
            db: est.spectrum.iter().map(|v| 10.0 * (v / max).log10()).collect(),
            peaks: est.angles,
        });
    }
    Ok(SpectrumComparison {
        seed,
        truth: sources.angles().to_vec(),
        grid: grid.angles(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unquantized_resolves_default_triple() {
        let mut c = ScenarioConfig::desk();
        c.array.sensors = 32;
        c.network.widths = vec![64, 32, 32, 32, 64];
        let s = spectrum_compare(None, &c).unwrap();
        assert_eq!(s.truth, vec![-18.9346, 8.6346, 9.9462]);
        let u = s.get("unquantized").unwrap();
        assert_eq!(u.resolved(&s.truth, 0.5), 3);
        assert_eq!(s.series.len(), 3);
        assert!(s.series.iter().all(|v| v.db.len() == s.grid.len()));
        assert!(s.series.iter().all(|v| v.db.iter().all(|d| d.is_finite() && *d <= 0.0)));
        assert_eq!(s, spectrum_compare(None, &c).unwrap());
    }

    #[test]
    fn out_of_range_angle_rejected() {
        let mut c = ScenarioConfig::desk();
        c.spectrum.angles = vec![-40.0, 0.0, 10.0];
        assert!(spectrum_compare(None, &c).is_err());
    }

    #[test]
    fn resolved_matching_is_one_to_one() {
        let s = SeriesSpectrum {
            label: "x".into(),
            db: vec![],
            peaks: vec![-10.0, 9.0],
        };
        assert_eq!(s.resolved(&[8.6, 9.9], 1.0), 1);
        assert_eq!(s.resolved(&[-10.2, 9.3], 1.0), 2);
    }
}
