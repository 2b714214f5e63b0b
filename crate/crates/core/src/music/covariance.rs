use ndarray::{s, Array2};
use num_complex::Complex64;

use crate::array::SnapshotMatrix;
use crate::error::{Error, Result};

/// Hermitian positive semidefinite `M x M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: Array2<Complex64>,
}

impl CovarianceMatrix {
    /// Wraps `data` after symmetrizing `(A + A^H) / 2`.
    pub fn from_matrix(data: Array2<Complex64>) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(Error::dim(format!("covariance must be square, got {:?}", data.dim())));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        let herm = (&data + &data.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        Ok(Self { data: herm })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }
}

/// `(1/N) sum_n y(n) y(n)^H` over the first `num_snapshots` columns.
pub fn sample_covariance(y: &SnapshotMatrix, num_snapshots: usize) -> Result<CovarianceMatrix> {
    if num_snapshots == 0 {
        return Err(Error::invalid("covariance needs at least one snapshot"));
    }
    if num_snapshots > y.num_snapshots() {
        return Err(Error::invalid(format!(
            "{num_snapshots} snapshots requested, {} available",
            y.num_snapshots()
        )));
    }
    let cols = y.data().slice(s![.., ..num_snapshots]);
    let herm = cols.t().mapv(|z| z.conj());
    let r = cols.dot(&herm).mapv(|z| z / num_snapshots as f64);
    CovarianceMatrix::from_matrix(r)
}
