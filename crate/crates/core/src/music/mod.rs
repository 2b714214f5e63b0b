//! MUSIC direction-of-arrival estimation.
//!
//! `R = Y Y^H / N` is split by a Hermitian eigendecomposition; the pseudo
//! spectrum `P(theta) = 1 / (||E_n^H a(theta)||^2 + 1e-12)` peaks where the
//! steering vector is orthogonal to the noise subspace `E_n`.

mod covariance;
pub mod eigen;
mod estimator;
mod metric;
pub mod trials;

pub use covariance::{sample_covariance, CovarianceMatrix};
pub use eigen::{hermitian_eigen, HermitianEigen};
pub use estimator::{
    music_spectrum, noise_subspace, pick_peaks, AngleGrid, MusicEstimator, MusicResult,
    SPECTRUM_FLOOR,
};
pub use metric::{doa_mse, doa_mse_with, Pairing};
pub use trials::{denoise_snapshots, run_paired_trials, run_trials, trial_base_seed, Pipeline, TrialStats};
