use std::time::Instant;

use ndarray::{s, Axis};
use rand::seq::SliceRandom;

use super::curves::CurvePoint;
use super::dataset::Dataset;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nn::{init_model, loss, per_sample_loss, Adam, AdamConfig, Architecture, DenoiserModel};
use crate::rng::{record_seed, rng_from_seed, stream_seed, streams};

const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Final model, or the last model with finite loss if training diverged.
    pub model: DenoiserModel<f32>,
    /// `(epoch, mean training loss)`, epochs counted from 1.
    pub train_curve: Vec<(usize, f64)>,
    /// `(epoch, test loss)` at every evaluation point.
    pub test_curve: Vec<(usize, f64)>,
    pub diverged: Option<usize>,
    pub steps: u64,
    /// Wall-clock seconds spent in the optimization loop.
    pub seconds: f64,
}

impl TrainReport {
    pub fn final_test_loss(&self) -> Option<f64> {
        self.test_curve.last().map(|&(_, l)| l)
    }

    pub fn curve_points(&self) -> Vec<CurvePoint> {
        self.train_curve
            .iter()
            .map(|&(e, l)| CurvePoint::new("train-loss", e as f64, l, 0.0))
            .chain(
                self.test_curve
                    .iter()
                    .map(|&(e, l)| CurvePoint::new("test-loss", e as f64, l, 0.0)),
            )
            .collect()
    }
}

/// Mean reconstruction loss of `model` over `data` in inference mode.
pub(crate) fn dataset_losses(model: &DenoiserModel<f32>, data: &Dataset) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.len());
    let mut start = 0;
    while start < data.len() {
        let end = (start + EVAL_CHUNK).min(data.len());
        let x = data.inputs.slice(s![start..end, ..]).to_owned();
        let t = data.targets.slice(s![start..end, ..]).to_owned();
        let y = model.infer(&x)?;
        out.extend(per_sample_loss(&y.mapv(f64::from), &t.mapv(f64::from))?.iter().copied());
        start = end;
    }
    Ok(out)
}

pub(crate) fn mean_loss(model: &DenoiserModel<f32>, data: &Dataset) -> Result<f64> {
    let l = dataset_losses(model, data)?;
    Ok(l.iter().sum::<f64>() / l.len() as f64)
}

pub fn train(config: &ScenarioConfig, train_set: &Dataset, test_set: &Dataset) -> Result<TrainReport> {
    train_with_architecture(config, &config.architecture(), train_set, test_set)
}

/// Shuffled mini-batch Adam on the reconstruction loss. A non-finite loss or
/// gradient stops training and returns the last finite model.
pub fn train_with_architecture(
    config: &ScenarioConfig,
    arch: &Architecture,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<TrainReport> {
    arch.validate(train_set.sensors)?;
    if train_set.width() != arch.widths[0] || test_set.width() != arch.widths[0] {
        return Err(Error::dim(format!(
            "dataset width {} does not match network input {}",
            train_set.width(),
            arch.widths[0]
        )));
    }
    let tc = &config.train;
    let mut rng = rng_from_seed(stream_seed(config.seed, streams::INIT));
    let mut model: DenoiserModel<f32> = init_model(arch, &mut rng)?;
    let mut adam = Adam::new(AdamConfig {
        lr: tc.lr,
        beta1: tc.beta1,
        beta2: tc.beta2,
        eps: tc.adam_eps,
    });
    let shuffle_base = stream_seed(config.seed, streams::SHUFFLE);
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut train_curve = Vec::new();
    let mut test_curve = Vec::new();
    let mut last_good = model.clone();
    let mut diverged = None;
    let mut steps = 0u64;
    let started = Instant::now();

    'epochs: for epoch in 1..=tc.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_from_seed(record_seed(shuffle_base, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(tc.batch_size) {
            // Batch norm needs at least two rows.
            if batch.len() < 2 || (tc.max_steps > 0 && steps >= tc.max_steps as u64) {
                continue;
            }
            let x = train_set.inputs.select(Axis(0), batch);
            let t = train_set.targets.select(Axis(0), batch);
            let cache = model.forward_train(&x)?;
            let l = loss(cache.output(), &t)? as f64;
            if !l.is_finite() {
                diverged = Some(epoch);
                break 'epochs;
            }
            let grads = model.backward(&cache, &t)?;
            match model.apply_adam(&grads, &mut adam) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient { .. }) => {
                    diverged = Some(epoch);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            steps += 1;
            loss_sum += l * batch.len() as f64;
            seen += batch.len();
        }
        if !model.is_finite() {
            diverged = Some(epoch);
            break;
        }
        if seen > 0 {
            train_curve.push((epoch, loss_sum / seen as f64));
        }
        if epoch % tc.eval_every == 0 || epoch == tc.epochs {
            let tl = mean_loss(&model, test_set)?;
            if !tl.is_finite() {
                diverged = Some(epoch);
                break;
            }
            test_curve.push((epoch, tl));
        }
        last_good = model.clone();
        if tc.max_steps > 0 && steps >= tc.max_steps as u64 {
            if test_curve.last().map(|&(e, _)| e) != Some(epoch) {
                test_curve.push((epoch, mean_loss(&model, test_set)?));
            }
            break;
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    if diverged.is_some() {
        model = last_good;
    }
    Ok(TrainReport {
        model,
        train_curve,
        test_curve,
        diverged,
        steps,
        seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{build_dataset, Split};

    fn tiny() -> ScenarioConfig {
        let mut c = ScenarioConfig::desk();
        c.array.sensors = 4;
        c.network.widths = vec![8, 32, 32, 32, 8];
        c.data.count = 600;
        c.data.test_count = 100;
        c.train.epochs = 6;
        c.train.eval_every = 2;
        c.train.batch_size = 64;
        c
    }

    #[test]
    fn training_is_reproducible_and_learns() {
        let c = tiny();
        let tr = build_dataset(&c, Split::Train).unwrap();
        let te = build_dataset(&c, Split::Test).unwrap();
        let a = train(&c, &tr, &te).unwrap();
        let b = train(&c, &tr, &te).unwrap();
        assert_eq!(a.train_curve, b.train_curve);
        assert_eq!(a.test_curve, b.test_curve);
        assert_eq!(a.model, b.model);
        assert_eq!(a.test_curve.iter().map(|t| t.0).collect::<Vec<_>>(), vec![2, 4, 6]);
        assert!(a.train_curve.last().unwrap().1 < a.train_curve[0].1);
        assert!(a.diverged.is_none());
        assert_eq!(a.steps, 6 * 10);
    }

    #[test]
    fn step_cap_is_honored() {
        let mut c = tiny();
        c.train.max_steps = 15;
        let tr = build_dataset(&c, Split::Train).unwrap();
        let te = build_dataset(&c, Split::Test).unwrap();
        let r = train(&c, &tr, &te).unwrap();
        assert_eq!(r.steps, 15);
        assert!(r.final_test_loss().is_some());
    }

    #[test]
    fn divergence_keeps_last_finite_model() {
        let mut c = tiny();
        c.train.lr = 1e30;
        c.network.batch_norm = false;
        c.network.activation = crate::nn::Activation::LeakyRelu;
        let tr = build_dataset(&c, Split::Train).unwrap();
        let te = build_dataset(&c, Split::Test).unwrap();
        let r = train(&c, &tr, &te).unwrap();
        assert!(r.diverged.is_some());
        assert!(r.model.is_finite());
        assert!(r.curve_points().iter().all(|p| p.y.is_finite()));
    }

    #[test]
    fn width_mismatch_rejected() {
        let c = tiny();
        let tr = build_dataset(&c, Split::Train).unwrap();
        let mut other = c.clone();
        other.array.sensors = 5;
        other.network.widths = vec![10, 32, 32, 32, 10];
        assert!(train(&other, &tr, &tr).is_err());
    }
}
