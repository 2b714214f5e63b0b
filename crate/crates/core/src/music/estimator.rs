use ndarray::{s, Array2};
use num_complex::Complex64;

use super::covariance::CovarianceMatrix;
use super::eigen::hermitian_eigen;
use crate::array::{steering_unchecked, ArrayGeometry};
use crate::error::{Error, Result};

/// Added to `||E^H a||^2` so exactly noiseless inputs stay finite.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

/// Uniform scan grid `lo, lo + step, ..., hi` in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    lo: f64,
    step: f64,
    len: usize,
}

impl AngleGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > -90.0 && hi < 90.0) {
            return Err(Error::Config(format!("music grid [{lo}, {hi}] must lie inside (-90, 90)")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("music grid step must be positive, got {step}")));
        }
        let len = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok(Self { lo, step, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.angle(i)).collect()
    }

    /// Index of the grid point closest to `theta`.
    pub fn nearest(&self, theta: f64) -> usize {
        let i = ((theta - self.lo) / self.step).round();
        i.clamp(0.0, (self.len - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicResult {
    pub grid: Vec<f64>,
    pub spectrum: Vec<f64>,
    /// Picked source angles, ascending.
    pub angles: Vec<f64>,
}

/// Eigenvectors of the `M - K` smallest eigenvalues, as columns.
pub fn noise_subspace(r: &CovarianceMatrix, num_sources: usize) -> Result<Array2<Complex64>> {
    let m = r.dim();
    if num_sources == 0 || num_sources >= m {
        return Err(Error::invalid(format!(
            "source count must satisfy 0 < K < M, got K={num_sources} M={m}"
        )));
    }
    let eig = hermitian_eigen(r.data())?;
    Ok(eig.vectors.slice(s![.., ..m - num_sources]).to_owned())
}

/// MUSIC over a fixed grid with the steering matrix precomputed.
#[derive(Debug, Clone)]
pub struct MusicEstimator {
    geometry: ArrayGeometry,
    grid: AngleGrid,
    /// `M x G`.
    steering: Array2<Complex64>,
}

impl MusicEstimator {
    pub fn new(geometry: ArrayGeometry, grid: AngleGrid) -> Self {
        let mut steering = Array2::zeros((geometry.num_sensors(), grid.len()));
        for (g, mut col) in steering.columns_mut().into_iter().enumerate() {
            col.assign(&steering_unchecked(grid.angle(g), &geometry));
        }
        Self {
            geometry,
            grid,
            steering,
        }
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn spectrum(&self, r: &CovarianceMatrix, num_sources: usize) -> Result<Vec<f64>> {
        if r.dim() != self.geometry.num_sensors() {
            return Err(Error::dim(format!(
                "covariance is {}x{0} but the array has {} sensors",
                r.dim(),
                self.geometry.num_sensors()
            )));
        }
        let en = noise_subspace(r, num_sources)?;
        let proj = en.t().mapv(|z| z.conj()).dot(&self.steering);
        Ok(proj
            .columns()
            .into_iter()
            .map(|c| 1.0 / (c.iter().map(|z| z.norm_sqr()).sum::<f64>() + SPECTRUM_FLOOR))
            .collect())
    }

    pub fn estimate(&self, r: &CovarianceMatrix, num_sources: usize) -> Result<MusicResult> {
        let spectrum = self.spectrum(r, num_sources)?;
        let angles = pick_peaks(&self.grid, &spectrum, num_sources);
        Ok(MusicResult {
            grid: self.grid.angles(),
            spectrum,
            angles,
        })
    }
}

pub fn music_spectrum(
    r: &CovarianceMatrix,
    num_sources: usize,
    geometry: &ArrayGeometry,
    grid: &AngleGrid,
) -> Result<MusicResult> {
    MusicEstimator::new(*geometry, *grid).estimate(r, num_sources)
}

/// Grid indices of the `k` strongest local maxima. A plateau counts once, at
/// its leftmost index; grid edges compare against a virtual `-inf`. When
/// fewer than `k` maxima exist the largest remaining values fill in.
pub fn peak_indices(spectrum: &[f64], k: usize) -> Vec<usize> {
    let n = spectrum.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && spectrum[j + 1] == spectrum[i] {
            j += 1;
        }
        let left_lower = i == 0 || spectrum[i - 1] < spectrum[i];
        let right_lower = j == n - 1 || spectrum[j + 1] < spectrum[i];
        if left_lower && right_lower {
            peaks.push(i);
        }
        i = j + 1;
    }
    let by_value = |a: &usize, b: &usize| spectrum[*b].total_cmp(&spectrum[*a]).then(a.cmp(b));
    peaks.sort_by(by_value);
    peaks.truncate(k);
    if peaks.len() < k {
        let mut rest: Vec<usize> = (0..n).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(by_value);
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }
    peaks.sort_unstable();
    peaks
}

/// The `k` picked angles, ascending.
pub fn pick_peaks(grid: &AngleGrid, spectrum: &[f64], k: usize) -> Vec<f64> {
    peak_indices(spectrum, k)
        .into_iter()
        .map(|i| grid.angle(i))
        .collect()
}
