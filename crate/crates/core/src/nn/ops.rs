use ndarray::{Array1, Array2, Axis, Zip};

use super::{Activation, Real};
use crate::error::{Error, Result};

/// Elementwise `max(0, x)`.
pub fn relu<T: Real>(t: &Array2<T>) -> Array2<T> {
    t.mapv(|x| Activation::Relu.apply(x))
}

/// Per-feature batch normalization with learned scale/shift and running
/// statistics for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
    pub eps: T,
    /// Weight of the current batch in the running-average update.
    pub momentum: T,
}

/// Quantities from a train-mode pass needed for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub normalized: Array2<T>,
    pub inv_std: Array1<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(dim: usize, eps: T, momentum: T) -> Self {
        Self {
            gamma: Array1::from_elem(dim, T::one()),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::from_elem(dim, T::one()),
            eps,
            momentum,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with the batch mean and biased batch variance, then
    /// updates the running statistics.
    pub fn forward_train(&mut self, x: &Array2<T>) -> Result<(Array2<T>, BnCache<T>)> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::invalid(format!(
                "batch normalization in train mode needs batch size >= 2, got {n}"
            )));
        }
        self.check_width(x)?;
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let mut centered = x - &mean;
        let var = centered
            .map_axis(Axis(0), |col| col.iter().map(|&c| c * c).sum::<T>() / T::of(n as f64));
        let inv_std = var.mapv(|v| T::one() / (v + self.eps).sqrt());
        centered *= &inv_std;
        let out = &centered * &self.gamma + &self.beta;

        let keep = T::one() - self.momentum;
        Zip::from(&mut self.running_mean)
            .and(&mean)
            .for_each(|r, &m| *r = keep * *r + self.momentum * m);
        Zip::from(&mut self.running_var)
            .and(&var)
            .for_each(|r, &v| *r = keep * *r + self.momentum * v);

        Ok((
            out,
            BnCache {
                normalized: centered,
                inv_std,
            },
        ))
    }

    /// Normalizes with the running statistics only.
    pub fn forward_infer(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.check_width(x)?;
        let scale = Zip::from(&self.gamma)
            .and(&self.running_var)
            .map_collect(|&g, &v| g / (v + self.eps).sqrt());
        let shift = Zip::from(&self.beta)
            .and(&self.running_mean)
            .and(&scale)
            .map_collect(|&b, &m, &s| b - m * s);
        Ok(x * &scale + &shift)
    }

    /// Returns `(dx, dgamma, dbeta)` for upstream gradient `dy`.
    pub fn backward(&self, cache: &BnCache<T>, dy: &Array2<T>) -> (Array2<T>, Array1<T>, Array1<T>) {
        let n = T::of(dy.nrows() as f64);
        let dbeta = dy.sum_axis(Axis(0));
        let dgamma = (dy * &cache.normalized).sum_axis(Axis(0));
        // dx = inv_std / n * (n * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
        // with dxhat = dy * gamma, so the sums are gamma * dbeta and gamma * dgamma.
        let sum_dxhat = &dbeta * &self.gamma;
        let sum_dxhat_xhat = &dgamma * &self.gamma;
        let mut dx = dy * &self.gamma;
        dx *= n;
        dx -= &sum_dxhat;
        dx -= &(&cache.normalized * &sum_dxhat_xhat);
        dx *= &(&cache.inv_std / n);
        (dx, dgamma, dbeta)
    }

    fn check_width(&self, x: &Array2<T>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::dim(format!(
                "batch norm over {} features given width {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

pub fn batch_norm_train<T: Real>(t: &Array2<T>, bn: &mut BatchNorm<T>) -> Result<(Array2<T>, BnCache<T>)> {
    bn.forward_train(t)
}

pub fn batch_norm_infer<T: Real>(t: &Array2<T>, bn: &BatchNorm<T>) -> Result<Array2<T>> {
    bn.forward_infer(t)
}

fn check_same_shape<T>(output: &Array2<T>, target: &Array2<T>) -> Result<()> {
    if output.dim() != target.dim() {
        return Err(Error::dim(format!(
            "output {:?} vs target {:?}",
            output.dim(),
            target.dim()
        )));
    }
    if output.nrows() == 0 {
        return Err(Error::dim("empty batch"));
    }
    Ok(())
}

/// `||y - psi||^2 / (2M)` for every row.
pub fn per_sample_loss<T: Real>(output: &Array2<T>, target: &Array2<T>) -> Result<Array1<T>> {
    check_same_shape(output, target)?;
    let width = T::of(output.ncols() as f64);
    Ok(Zip::from(output.rows())
        .and(target.rows())
        .map_collect(|y, t| {
            y.iter()
                .zip(t.iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                / width
        }))
}

/// Batch mean of the per-sample reconstruction loss.
pub fn loss<T: Real>(output: &Array2<T>, target: &Array2<T>) -> Result<T> {
    let per = per_sample_loss(output, target)?;
    Ok(per.sum() / T::of(per.len() as f64))
}

/// Gradient of [`loss`] with respect to `output`.
pub fn loss_gradient<T: Real>(output: &Array2<T>, target: &Array2<T>) -> Result<Array2<T>> {
    check_same_shape(output, target)?;
    let scale = T::of(2.0 / (output.ncols() * output.nrows()) as f64);
    Ok((output - target) * scale)
}
