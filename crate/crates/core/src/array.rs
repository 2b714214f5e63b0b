//! Uniform linear array observation model.
//!
//! Column `n` of a snapshot matrix is `x(n) = sum_k s_k(n) a(theta_k) + e(n)`
//! where `a` is the ULA steering vector and `e` is circular complex Gaussian
//! noise. Angles are in degrees at every public boundary.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Sensor count and inter-element spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_sensors: usize,
    spacing_over_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(num_sensors: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if num_sensors < 2 {
            return Err(Error::invalid(format!(
                "array needs at least 2 sensors, got {num_sensors}"
            )));
        }
        if !(spacing_over_wavelength > 0.0 && spacing_over_wavelength.is_finite()) {
            return Err(Error::invalid(format!(
                "sensor spacing must be positive, got {spacing_over_wavelength}"
            )));
        }
        Ok(Self {
            num_sensors,
            spacing_over_wavelength,
        })
    }

    /// Half-wavelength array with `num_sensors` elements.
    pub fn half_wavelength(num_sensors: usize) -> Result<Self> {
        Self::new(num_sensors, 0.5)
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_over_wavelength
    }
}

/// Source directions in degrees, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    angles: Vec<f64>,
}

impl SourceSet {
    pub fn new(mut angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("at least one source is required"));
        }
        if let Some(bad) = angles.iter().find(|a| !a.is_finite() || a.abs() >= 90.0) {
            return Err(Error::invalid(format!(
                "source angle {bad} outside the open interval (-90, 90)"
            )));
        }
        angles.sort_by(f64::total_cmp);
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Receiver noise level. `snr_db` is the per-source, per-sensor power ratio
/// for unit-modulus sources, so the complex noise variance is `10^(-snr/10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            variance: 10f64.powf(-snr_db / 10.0),
        }
    }

    pub fn noiseless() -> Self {
        Self { variance: 0.0 }
    }

    pub fn from_variance(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("noise variance {variance} invalid")));
        }
        Ok(Self { variance })
    }

    /// Variance per complex sample.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Standard deviation of each real component.
    pub fn component_std(&self) -> f64 {
        (self.variance / 2.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Clean,
    Quantized,
    Reconstructed,
}

/// `M x N` complex observations, one column per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: Array2<Complex64>,
    kind: SnapshotKind,
}

impl SnapshotMatrix {
    pub fn new(data: Array2<Complex64>, kind: SnapshotKind) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("snapshot matrix contains non-finite entries"));
        }
        Ok(Self { data, kind })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn kind(&self) -> SnapshotKind {
        self.kind
    }

    pub fn num_sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// Real-interleaved view of column `n`: `[Re(x_1..x_M), Im(x_1..x_M)]`.
    pub fn column_interleaved(&self, n: usize) -> Vec<f64> {
        to_real_interleaved(self.data.column(n))
    }

    /// Builds a matrix from real-interleaved columns (each of length `2M`).
    pub fn from_interleaved_columns<'a, I>(columns: I, kind: SnapshotKind) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let cols: Vec<Array1<Complex64>> = columns
            .into_iter()
            .map(from_real_interleaved)
            .collect::<Result<_>>()?;
        let m = cols.first().map(|c| c.len()).unwrap_or(0);
        if cols.iter().any(|c| c.len() != m) {
            return Err(Error::dim("interleaved columns differ in length"));
        }
        let mut data = Array2::zeros((m, cols.len()));
        for (n, c) in cols.iter().enumerate() {
            data.column_mut(n).assign(c);
        }
        Self::new(data, kind)
    }
}

/// `a(theta)_m = exp(j 2 pi (d/lambda) m sin(theta))`, `m = 0..M`.
pub fn steering_vector(theta_deg: f64, geom: &ArrayGeometry) -> Result<Array1<Complex64>> {
    if !theta_deg.is_finite() || theta_deg.abs() >= 90.0 {
        return Err(Error::invalid(format!(
            "steering angle {theta_deg} deg outside (-90, 90)"
        )));
    }
    Ok(steering_unchecked(theta_deg, geom))
}

pub(crate) fn steering_unchecked(theta_deg: f64, geom: &ArrayGeometry) -> Array1<Complex64> {
    let phase_step = 2.0 * PI * geom.spacing() * theta_deg.to_radians().sin();
    Array1::from_iter((0..geom.num_sensors()).map(|m| {
        if m == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, phase_step * m as f64)
        }
    }))
}

/// Draws `count` angles uniformly on `[lo, hi]`, redrawing the whole set until
/// every pairwise gap is at least `min_sep`. Returned sorted ascending.
pub fn draw_source_angles(
    count: usize,
    range: (f64, f64),
    min_sep: f64,
    rng: &mut Rng,
) -> Result<SourceSet> {
    let (lo, hi) = range;
    if count == 0 {
        return Err(Error::invalid("source count must be positive"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > -90.0 && hi < 90.0) {
        return Err(Error::invalid(format!("invalid angle range [{lo}, {hi}]")));
    }
    if min_sep < 0.0 || hi - lo < (count - 1) as f64 * min_sep {
        return Err(Error::invalid(format!(
            "cannot place {count} sources {min_sep} deg apart in [{lo}, {hi}]"
        )));
    }
    // Rejection sampling degenerates when the constraint is nearly tight.
    const MAX_ATTEMPTS: usize = 1_000_000;
    let mut angles = vec![0.0; count];
    for _ in 0..MAX_ATTEMPTS {
        for a in angles.iter_mut() {
            *a = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        angles.sort_by(f64::total_cmp);
        if angles.windows(2).all(|w| w[1] - w[0] >= min_sep) {
            return SourceSet::new(angles);
        }
    }
    Err(Error::invalid(format!(
        "failed to draw {count} sources {min_sep} deg apart in [{lo}, {hi}]"
    )))
}

/// Unit-modulus source amplitudes with independent uniform phase per source
/// and snapshot; shape `K x N`.
pub fn draw_amplitudes(num_sources: usize, num_snapshots: usize, rng: &mut Rng) -> Array2<Complex64> {
    let mut amps = Array2::zeros((num_sources, num_snapshots));
    for n in 0..num_snapshots {
        for k in 0..num_sources {
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            amps[[k, n]] = Complex64::from_polar(1.0, phase);
        }
    }
    amps
}

/// Clean snapshots with random-phase unit sources and complex Gaussian noise.
pub fn synthesize(
    sources: &SourceSet,
    geom: &ArrayGeometry,
    noise: &NoiseSpec,
    num_snapshots: usize,
    rng: &mut Rng,
) -> Result<SnapshotMatrix> {
    let amps = draw_amplitudes(sources.len(), num_snapshots, rng);
    synthesize_with_amplitudes(sources, &amps, geom, noise, rng)
}

/// Same as [`synthesize`] with caller-supplied `K x N` amplitudes.
pub fn synthesize_with_amplitudes(
    sources: &SourceSet,
    amplitudes: &Array2<Complex64>,
    geom: &ArrayGeometry,
    noise: &NoiseSpec,
    rng: &mut Rng,
) -> Result<SnapshotMatrix> {
    if amplitudes.nrows() != sources.len() {
        return Err(Error::dim(format!(
            "{} amplitude rows for {} sources",
            amplitudes.nrows(),
            sources.len()
        )));
    }
    let m = geom.num_sensors();
    let mut steering = Array2::zeros((m, sources.len()));
    for (k, &theta) in sources.angles().iter().enumerate() {
        steering.column_mut(k).assign(&steering_vector(theta, geom)?);
    }
    let mut data = steering.dot(amplitudes);
    let std = noise.component_std();
    if std > 0.0 {
        for z in data.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z += Complex64::new(std * re, std * im);
        }
    }
    SnapshotMatrix::new(data, SnapshotKind::Clean)
}

/// `[Re(x), Im(x)]` layout of a complex vector.
pub fn to_real_interleaved(column: ArrayView1<'_, Complex64>) -> Vec<f64> {
    column
        .iter()
        .map(|z| z.re)
        .chain(column.iter().map(|z| z.im))
        .collect()
}

pub fn from_real_interleaved(v: &[f64]) -> Result<Array1<Complex64>> {
    if !v.len().is_multiple_of(2) || v.is_empty() {
        return Err(Error::dim(format!(
            "interleaved vector must have positive even length, got {}",
            v.len()
        )));
    }
    let m = v.len() / 2;
    Ok(Array1::from_iter(
        (0..m).map(|i| Complex64::new(v[i], v[m + i])),
    ))
}
