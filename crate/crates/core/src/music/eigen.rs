//! Cyclic Jacobi eigensolver for small complex Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` and then applies
//! a real Givens rotation, so the accumulated transform stays unitary to
//! machine precision.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: Array2<Complex64>,
}

const MAX_SWEEPS: usize = 100;

pub fn hermitian_eigen(a: &Array2<Complex64>) -> Result<HermitianEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dim("eigendecomposition needs a square matrix"));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite input".into()));
    }
    let mut m = a.clone();
    let mut v = Array2::<Complex64>::eye(n);
    let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let tol = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                let r = apq.norm();
                if r <= tol * 1e-3 {
                    continue;
                }
                let phase = apq / r;
                let tau = (m[[q, q]].re - m[[p, p]].re) / (2.0 * r);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane.
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                for k in 0..n {
                    let (kp, kq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = kp * gpp + kq * gqp;
                    m[[k, q]] = kp * gpq + kq * gqq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = gpp.conj() * pk + gqp.conj() * qk;
                    m[[q, k]] = gpq.conj() * pk + gqq.conj() * qk;
                }
                m[[p, q]] = Complex64::new(0.0, 0.0);
                m[[q, p]] = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let (kp, kq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = kp * gpp + kq * gqp;
                    v[[k, q]] = kp * gpq + kq * gqq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Eigen(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].re.total_cmp(&m[[j, j]].re));
    let values = order.iter().map(|&i| m[[i, i]].re).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_hermitian(n: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = rng_from_seed(seed);
        let b = Array2::from_shape_simple_fn((n, n), || {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        b.dot(&b.t().mapv(|z| z.conj()))
    }

    fn check(a: &Array2<Complex64>) {
        let n = a.nrows();
        let e = hermitian_eigen(a).unwrap();
        let scale = e.values.iter().map(|v| v.abs()).fold(1.0, f64::max);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let vh = e.vectors.t().mapv(|z| z.conj());
        let gram = vh.dot(&e.vectors);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - expect).norm() < 1e-12);
            }
        }
        let av = a.dot(&e.vectors);
        for i in 0..n {
            for k in 0..n {
                let r = av[[k, i]] - e.vectors[[k, i]] * e.values[i];
                assert!(r.norm() < 1e-10 * scale, "residual {}", r.norm());
            }
        }
    }

    #[test]
    fn diagonal_and_identity() {
        let mut d = Array2::<Complex64>::zeros((3, 3));
        d[[0, 0]] = Complex64::new(3.0, 0.0);
        d[[1, 1]] = Complex64::new(-1.0, 0.0);
        d[[2, 2]] = Complex64::new(2.0, 0.0);
        let e = hermitian_eigen(&d).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        check(&Array2::eye(5));
    }

    #[test]
    fn two_by_two_complex() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = ndarray::array![
            [Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)],
            [Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0)]
        ];
        let e = hermitian_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        check(&a);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Array2::<Complex64>::eye(3);
        a[[0, 1]] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(hermitian_eigen(&a), Err(Error::Eigen(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn random_hermitian_psd(n in 1usize..33, seed in 0u64..10_000) {
            check(&random_hermitian(n, seed));
        }
    }
}
