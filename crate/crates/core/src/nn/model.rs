use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;

use super::adam::Adam;
use super::ops::{loss_gradient, BatchNorm, BnCache};
use super::{Activation, Precision, Real};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Role of a fully connected layer inside the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// `act(x W + b)`.
    InputFc,
    /// First half of a block: `act(BN(x W + b))`.
    ResidualInner,
    /// Second half of a block with skip: `act(block_in + BN(h W + b))`.
    ResidualOuter,
    /// Second half of a block without skip: `act(BN(h W + b))`.
    PlainOuter,
    /// `x W + b`, no activation, no BN.
    OutputLinear,
}

impl LayerKind {
    pub fn tag(self) -> u8 {
        match self {
            LayerKind::InputFc => 0,
            LayerKind::ResidualInner => 1,
            LayerKind::ResidualOuter => 2,
            LayerKind::PlainOuter => 3,
            LayerKind::OutputLinear => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => LayerKind::InputFc,
            1 => LayerKind::ResidualInner,
            2 => LayerKind::ResidualOuter,
            3 => LayerKind::PlainOuter,
            4 => LayerKind::OutputLinear,
            _ => return None,
        })
    }

    fn is_outer(self) -> bool {
        matches!(self, LayerKind::ResidualOuter | LayerKind::PlainOuter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub has_bn: bool,
}

/// Network shape and structural switches.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    /// `[2M, N_1, ..., N_{L-1}, 2M]`, so `L = widths.len() - 1`.
    pub widths: Vec<usize>,
    pub batch_norm: bool,
    pub residual: bool,
    pub activation: Activation,
    pub input_bias: bool,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Architecture {
    /// `layers` FC layers of width `hidden` for an `sensors`-element array.
    pub fn uniform(sensors: usize, layers: usize, hidden: usize) -> Self {
        let mut widths = vec![hidden; layers + 1];
        widths[0] = 2 * sensors;
        widths[layers] = 2 * sensors;
        Self {
            widths,
            batch_norm: true,
            residual: true,
            activation: Activation::Relu,
            input_bias: true,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // negated compares also reject NaN
    pub fn validate(&self, sensors: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let w = &self.widths;
        let l = self.num_layers();
        if l < 2 {
            return bad(format!("network.widths needs at least 3 entries, got {}", w.len()));
        }
        if w[0] != 2 * sensors {
            return bad(format!(
                "network.widths[0] must equal 2M = {} (array.sensors = {sensors}), got {}",
                2 * sensors,
                w[0]
            ));
        }
        if w[l] != 2 * sensors {
            return bad(format!(
                "network.widths[L] must equal 2M = {}, got {}",
                2 * sensors,
                w[l]
            ));
        }
        if w.contains(&0) {
            return bad("network.widths must be positive".into());
        }
        if !(l - 2).is_multiple_of(2) {
            return bad(format!(
                "L - 2 hidden layers must pair into blocks; L = {l} leaves an unpaired layer"
            ));
        }
        if self.residual {
            for block in 0..(l - 2) / 2 {
                let (input, output) = (w[1 + 2 * block], w[3 + 2 * block]);
                if input != output {
                    return bad(format!(
                        "residual block {block} maps width {input} to {output}; skip needs equal widths"
                    ));
                }
            }
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("batch-norm eps must be positive and momentum in [0, 1]".into());
        }
        Ok(())
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let l = self.num_layers();
        (0..l)
            .map(|i| {
                let kind = if i == 0 {
                    LayerKind::InputFc
                } else if i == l - 1 {
                    LayerKind::OutputLinear
                } else if i % 2 == 1 {
                    LayerKind::ResidualInner
                } else if self.residual {
                    LayerKind::ResidualOuter
                } else {
                    LayerKind::PlainOuter
                };
                LayerSpec {
                    kind,
                    in_dim: self.widths[i],
                    out_dim: self.widths[i + 1],
                    has_bn: self.batch_norm
                        && (kind == LayerKind::ResidualInner || kind.is_outer()),
                }
            })
            .collect()
    }
}

/// `y = x W + b`, `W` stored `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((in_dim, out_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut z = x.dot(&self.weight);
        z += &self.bias;
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer<T> {
    pub kind: LayerKind,
    pub dense: Dense<T>,
    pub bn: Option<BatchNorm<T>>,
}

impl<T: Real> FcLayer<T> {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            kind: self.kind,
            in_dim: self.dense.weight.nrows(),
            out_dim: self.dense.weight.ncols(),
            has_bn: self.bn.is_some(),
        }
    }
}

/// The denoiser: input layer, residual blocks, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel<T = f32> {
    pub layers: Vec<FcLayer<T>>,
    pub activation: Activation,
    /// When false the input-layer bias is held at zero.
    pub input_bias: bool,
    pub precision: Precision,
    version: u64,
}

struct LayerCache<T> {
    input: Array2<T>,
    bn: Option<BnCache<T>>,
    pre_activation: Option<Array2<T>>,
}

/// Everything the backward pass needs from a train-mode forward pass.
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
    output: Array2<T>,
    version: u64,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &Array2<T> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

impl<T: Real> ForwardCache<T> {
    /// Smallest `|z|` over every activation input, i.e. the distance to the
    /// ReLU kink. `None` for a model without activations.
    pub fn min_activation_margin(&self) -> Option<T> {
        self.layers
            .iter()
            .filter_map(|l| l.pre_activation.as_ref())
            .flat_map(|p| p.iter().map(|v| v.abs()))
            .reduce(|a, b| if b < a { b } else { a })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub gamma: Option<Array1<T>>,
    pub beta: Option<Array1<T>>,
}

/// Parameter gradients, one entry per layer in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Real> Gradients<T> {
    /// Flat views in the same order as [`DenoiserModel::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.push(g.weight.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("standard layout"));
            if let (Some(gamma), Some(beta)) = (&g.gamma, &g.beta) {
                out.push(gamma.as_slice().expect("standard layout"));
                out.push(beta.as_slice().expect("standard layout"));
            }
        }
        out
    }
}

/// Glorot-uniform weights, zero biases, identity batch norm.
pub fn init_model<T: Real>(arch: &Architecture, rng: &mut Rng) -> Result<DenoiserModel<T>> {
    let sensors = arch.widths.first().copied().unwrap_or(0) / 2;
    arch.validate(sensors)?;
    let layers = arch
        .layer_specs()
        .into_iter()
        .map(|spec| {
            let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((spec.in_dim, spec.out_dim), || {
                T::of(rng.random_range(-limit..limit))
            });
            FcLayer {
                kind: spec.kind,
                dense: Dense {
                    weight,
                    bias: Array1::zeros(spec.out_dim),
                },
                bn: spec.has_bn.then(|| {
                    BatchNorm::new(spec.out_dim, T::of(arch.bn_eps), T::of(arch.bn_momentum))
                }),
            }
        })
        .collect();
    DenoiserModel::from_layers(layers, arch.activation, arch.input_bias, Precision::Fp32)
}

impl<T: Real> DenoiserModel<T> {
    /// Validates the layer sequence and dimension chain.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_layers(
        layers: Vec<FcLayer<T>>,
        activation: Activation,
        input_bias: bool,
        precision: Precision,
    ) -> Result<Self> {
        let n = layers.len();
        if n < 2 {
            return Err(Error::dim("model needs an input and an output layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            let expect = if i == 0 {
                &[LayerKind::InputFc][..]
            } else if i == n - 1 {
                &[LayerKind::OutputLinear][..]
            } else if i % 2 == 1 {
                &[LayerKind::ResidualInner][..]
            } else {
                &[LayerKind::ResidualOuter, LayerKind::PlainOuter][..]
            };
            if !expect.contains(&layer.kind) {
                return Err(Error::dim(format!(
                    "layer {i} has kind {:?}, expected one of {expect:?}",
                    layer.kind
                )));
            }
            let spec = layer.spec();
            if layer.dense.bias.len() != spec.out_dim {
                return Err(Error::dim(format!("layer {i} bias length mismatch")));
            }
            if let Some(bn) = &layer.bn {
                if bn.dim() != spec.out_dim
                    || bn.beta.len() != spec.out_dim
                    || bn.running_mean.len() != spec.out_dim
                    || bn.running_var.len() != spec.out_dim
                {
                    return Err(Error::dim(format!("layer {i} batch-norm width mismatch")));
                }
                if !(bn.eps > T::zero()) || bn.running_var.iter().any(|&v| v < T::zero()) {
                    return Err(Error::invalid(format!(
                        "layer {i} batch norm needs eps > 0 and non-negative running variance"
                    )));
                }
            }
            if matches!(layer.kind, LayerKind::InputFc | LayerKind::OutputLinear) && layer.bn.is_some() {
                return Err(Error::dim(format!("layer {i} ({:?}) cannot carry BN", layer.kind)));
            }
            if i > 0 && layers[i - 1].spec().out_dim != spec.in_dim {
                return Err(Error::dim(format!(
                    "layer {} outputs {} features but layer {i} expects {}",
                    i - 1,
                    layers[i - 1].spec().out_dim,
                    spec.in_dim
                )));
            }
            if layer.kind == LayerKind::ResidualOuter && spec.out_dim != layers[i - 1].spec().in_dim {
                return Err(Error::dim(format!("residual block ending at layer {i} changes width")));
            }
        }
        if layers[0].spec().in_dim != layers[n - 1].spec().out_dim {
            return Err(Error::dim("input and output widths differ"));
        }
        let model = Self {
            layers,
            activation,
            input_bias,
            precision,
            version: 0,
        };
        if !model.is_finite() {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(model)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].dense.weight.nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(FcLayer::spec).collect()
    }

    /// Trainable parameter count (W, b, gamma, beta).
    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.dense.weight.len() + l.dense.bias.len() + l.bn.as_ref().map_or(0, |b| 2 * b.dim())
            })
            .sum()
    }

    /// Stored values including running statistics.
    pub fn num_stored_values(&self) -> usize {
        self.num_parameters() + self.layers.iter().map(|l| l.bn.as_ref().map_or(0, |b| 2 * b.dim())).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.dense.weight.iter().chain(&l.dense.bias).all(|v| v.is_finite())
                && l.bn.as_ref().is_none_or(|b| {
                    b.gamma
                        .iter()
                        .chain(&b.beta)
                        .chain(&b.running_mean)
                        .chain(&b.running_var)
                        .all(|v| v.is_finite())
                })
        })
    }

    /// Counter bumped whenever parameters are updated by the optimizer.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    fn check_input(&self, input: &Array2<T>) -> Result<()> {
        if input.ncols() != self.input_width() {
            return Err(Error::dim(format!(
                "model expects {} input features, got {}",
                self.input_width(),
                input.ncols()
            )));
        }
        Ok(())
    }

    /// Inference pass; batch norm uses running statistics.
    pub fn infer(&self, input: &Array2<T>) -> Result<Array2<T>> {
        self.check_input(input)?;
        let act = self.activation;
        let mut x = input.to_owned();
        let mut block_input: Option<Array2<T>> = None;
        for layer in &self.layers {
            let mut z = layer.dense.forward(&x);
            if let Some(bn) = &layer.bn {
                z = bn.forward_infer(&z)?;
            }
            x = match layer.kind {
                LayerKind::OutputLinear => z,
                LayerKind::ResidualInner => {
                    block_input = Some(x);
                    z.mapv_into(|v| act.apply(v))
                }
                LayerKind::ResidualOuter => {
                    z += block_input.as_ref().expect("inner layer precedes outer");
                    z.mapv_into(|v| act.apply(v))
                }
                LayerKind::InputFc | LayerKind::PlainOuter => z.mapv_into(|v| act.apply(v)),
            };
        }
        Ok(x)
    }

    /// Train-mode pass: batch statistics, running-stat update, cache for
    /// [`DenoiserModel::backward`].
    pub fn forward_train(&mut self, input: &Array2<T>) -> Result<ForwardCache<T>> {
        self.check_input(input)?;
        let act = self.activation;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        let mut block_input: Option<Array2<T>> = None;
        for layer in &mut self.layers {
            let mut z = layer.dense.forward(&x);
            let bn_cache = match &mut layer.bn {
                Some(bn) => {
                    let (out, cache) = bn.forward_train(&z)?;
                    z = out;
                    Some(cache)
                }
                None => None,
            };
            let (pre, out) = match layer.kind {
                LayerKind::OutputLinear => (None, z),
                kind => {
                    if kind == LayerKind::ResidualInner {
                        block_input = Some(x.clone());
                    }
                    if kind == LayerKind::ResidualOuter {
                        z += block_input.as_ref().expect("inner layer precedes outer");
                    }
                    let out = z.mapv(|v| act.apply(v));
                    (Some(z), out)
                }
            };
            caches.push(LayerCache {
                input: std::mem::replace(&mut x, out),
                bn: bn_cache,
                pre_activation: pre,
            });
        }
        Ok(ForwardCache {
            layers: caches,
            output: x,
            version: self.version,
        })
    }

    /// Exact gradients of the batch reconstruction loss.
    pub fn backward(&self, cache: &ForwardCache<T>, target: &Array2<T>) -> Result<Gradients<T>> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        if cache.layers.len() != self.layers.len() {
            return Err(Error::dim("cache was produced by a different model"));
        }
        let act = self.activation;
        let mut upstream = loss_gradient(&cache.output, target)?;
        let mut grads: Vec<LayerGrads<T>> = Vec::with_capacity(self.layers.len());
        let mut skip_grad: Option<Array2<T>> = None;

        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            // Gradient with respect to this layer's normalized (or raw) FC output.
            let mut d = match &lc.pre_activation {
                Some(pre) => {
                    let mut d = upstream;
                    ndarray::Zip::from(&mut d)
                        .and(pre)
                        .for_each(|g, &p| *g *= act.derivative(p));
                    d
                }
                None => upstream,
            };
            if layer.kind == LayerKind::ResidualOuter {
                skip_grad = Some(d.clone());
            }
            let (gamma, beta) = match (&layer.bn, &lc.bn) {
                (Some(bn), Some(bc)) => {
                    let (dx, dg, db) = bn.backward(bc, &d);
                    d = dx;
                    (Some(dg), Some(db))
                }
                (None, None) => (None, None),
                _ => return Err(Error::dim("cache batch-norm layout differs from model")),
            };
            let weight = lc.input.t().dot(&d);
            let bias = if layer.kind == LayerKind::InputFc && !self.input_bias {
                Array1::zeros(d.ncols())
            } else {
                d.sum_axis(Axis(0))
            };
            upstream = d.dot(&layer.dense.weight.t());
            if layer.kind == LayerKind::ResidualInner {
                if let Some(s) = skip_grad.take() {
                    upstream += &s;
                }
            }
            grads.push(LayerGrads {
                weight,
                bias,
                gamma,
                beta,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Flat mutable views of W, b, gamma, beta per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.dense.weight.as_slice_mut().expect("standard layout"));
            out.push(l.dense.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut l.bn {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    /// One optimizer step. Leaves the model untouched and returns an error
    /// if any gradient is non-finite.
    pub fn apply_adam(&mut self, grads: &Gradients<T>, adam: &mut Adam<T>) -> Result<()> {
        let g = grads.slices();
        let mut params = self.param_slices_mut();
        adam.step(&mut params, &g)?;
        drop(params);
        if !self.input_bias {
            self.layers[0].dense.bias.fill(T::zero());
        }
        self.bump_version();
        Ok(())
    }

    /// Converts every stored value to another element type.
    pub fn cast<U: Real>(&self) -> DenoiserModel<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| U::of(v.as_f64()));
        DenoiserModel {
            layers: self
                .layers
                .iter()
                .map(|l| FcLayer {
                    kind: l.kind,
                    dense: Dense {
                        weight: l.dense.weight.mapv(|v| U::of(v.as_f64())),
                        bias: c1(&l.dense.bias),
                    },
                    bn: l.bn.as_ref().map(|b| BatchNorm {
                        gamma: c1(&b.gamma),
                        beta: c1(&b.beta),
                        running_mean: c1(&b.running_mean),
                        running_var: c1(&b.running_var),
                        eps: U::of(b.eps.as_f64()),
                        momentum: U::of(b.momentum.as_f64()),
                    }),
                })
                .collect(),
            activation: self.activation,
            input_bias: self.input_bias,
            precision: self.precision,
            version: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ops::loss;
    use crate::nn::AdamConfig;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
    }

    fn zero_model(arch: &Architecture) -> DenoiserModel<f64> {
        let mut m: DenoiserModel<f64> = init_model(arch, &mut rng_from_seed(0)).unwrap();
        for l in &mut m.layers {
            l.dense.weight.fill(0.0);
        }
        m
    }

    #[test]
    fn layer_specs_follow_block_structure() {
        let arch = Architecture::uniform(32, 10, 1024);
        let specs = arch.layer_specs();
        assert_eq!(specs.len(), 10);
        assert_eq!(specs[0].kind, LayerKind::InputFc);
        assert_eq!(specs[9].kind, LayerKind::OutputLinear);
        for b in 0..4 {
            assert_eq!(specs[1 + 2 * b].kind, LayerKind::ResidualInner);
            assert_eq!(specs[2 + 2 * b].kind, LayerKind::ResidualOuter);
            assert!(specs[1 + 2 * b].has_bn && specs[2 + 2 * b].has_bn);
        }
        assert!(!specs[0].has_bn && !specs[9].has_bn);
    }

    #[test]
    fn architecture_rejects_bad_shapes() {
        assert!(Architecture::uniform(8, 6, 64).validate(8).is_ok());
        assert!(Architecture::uniform(8, 6, 64).validate(4).is_err());
        assert!(Architecture::uniform(8, 5, 64).validate(8).is_err());
        let mut a = Architecture::uniform(8, 4, 64);
        a.widths[1] = 32;
        assert!(a.validate(8).is_err());
        a.residual = false;
        assert!(a.validate(8).is_ok());
    }

    #[test]
    fn init_rules() {
        let arch = Architecture::uniform(4, 6, 32);
        let a: DenoiserModel<f32> = init_model(&arch, &mut rng_from_seed(3)).unwrap();
        let b: DenoiserModel<f32> = init_model(&arch, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        for l in &a.layers {
            assert!(l.dense.bias.iter().all(|&v| v == 0.0));
            if let Some(bn) = &l.bn {
                assert!(bn.gamma.iter().all(|&v| v == 1.0));
                assert!(bn.beta.iter().all(|&v| v == 0.0));
                assert!(bn.running_mean.iter().all(|&v| v == 0.0));
                assert!(bn.running_var.iter().all(|&v| v == 1.0));
            }
        }
    }

    #[test]
    fn glorot_variance() {
        let arch = Architecture::uniform(500, 2, 1000);
        let m: DenoiserModel<f64> = init_model(&arch, &mut rng_from_seed(8)).unwrap();
        let w = &m.layers[0].dense.weight;
        assert_eq!(w.len(), 1_000_000);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let expect = 2.0 / 2000.0;
        assert!((var / expect - 1.0).abs() < 0.1, "{var} vs {expect}");
    }

    #[test]
    fn zero_weights_output_is_output_bias() {
        let arch = Architecture::uniform(2, 4, 5);
        let mut m = zero_model(&arch);
        let x = random_batch(3, 4, 1);
        assert!(m.infer(&x).unwrap().iter().all(|&v| v == 0.0));
        m.layers[3].dense.bias = ndarray::array![1.0, -2.0, 0.5, 3.0];
        let y = m.infer(&x).unwrap();
        for row in y.rows() {
            assert_eq!(row.to_vec(), vec![1.0, -2.0, 0.5, 3.0]);
        }
        let cache = m.forward_train(&x).unwrap();
        assert_eq!(cache.output(), &y);
    }

    #[test]
    fn residual_block_with_zero_weights_passes_relu_of_input() {
        // Input layer as identity so the block input is known exactly.
        let mut arch = Architecture::uniform(2, 4, 4);
        arch.input_bias = false;
        let mut m = zero_model(&arch);
        m.layers[0].dense.weight = Array2::eye(4);
        let x = random_batch(6, 4, 2);
        let block_in = x.mapv(|v| v.max(0.0));
        // Run only input layer + block by reading the output layer input.
        m.layers[3].dense.weight = Array2::eye(4);
        let y = m.infer(&x).unwrap();
        assert!((&y - &block_in.mapv(|v| v.max(0.0))).iter().all(|d| d.abs() < 1e-12));
        let cache = m.forward_train(&x).unwrap();
        assert!((cache.output() - &block_in).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn paper_scale_shape() {
        let arch = Architecture::uniform(32, 10, 1024);
        let m: DenoiserModel<f32> = init_model(&arch, &mut rng_from_seed(1)).unwrap();
        let x = Array2::<f32>::zeros((1, 64));
        assert_eq!(m.infer(&x).unwrap().dim(), (1, 64));
    }

    #[test]
    fn dimension_errors() {
        let arch = Architecture::uniform(2, 4, 5);
        let mut m: DenoiserModel<f64> = init_model(&arch, &mut rng_from_seed(0)).unwrap();
        assert!(m.infer(&Array2::zeros((2, 5))).is_err());
        assert!(m.forward_train(&Array2::zeros((2, 3))).is_err());
        let cache = m.forward_train(&random_batch(4, 4, 0)).unwrap();
        assert!(m.backward(&cache, &Array2::zeros((4, 3))).is_err());
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let arch = Architecture::uniform(2, 4, 5);
        let mut m: DenoiserModel<f64> = init_model(&arch, &mut rng_from_seed(0)).unwrap();
        let x = random_batch(4, 4, 3);
        let cache = m.forward_train(&x).unwrap();
        let g = m.backward(&cache, &x).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        m.apply_adam(&g, &mut adam).unwrap();
        assert!(matches!(m.backward(&cache, &x), Err(Error::StaleCache)));
    }

    #[test]
    fn perfect_fit_has_zero_output_bias_gradient() {
        let arch = Architecture::uniform(2, 4, 5);
        let mut m: DenoiserModel<f64> = init_model(&arch, &mut rng_from_seed(4)).unwrap();
        let x = random_batch(4, 4, 5);
        let cache = m.forward_train(&x).unwrap();
        let target = cache.output().clone();
        let g = m.backward(&cache, &target).unwrap();
        assert!(g.layers.last().unwrap().bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_unit_gets_no_weight_gradient() {
        let arch = Architecture::uniform(2, 4, 5);
        let mut m: DenoiserModel<f64> = init_model(&arch, &mut rng_from_seed(6)).unwrap();
        m.layers[0].dense.bias[2] = -1e3;
        let x = random_batch(8, 4, 7);
        let target = random_batch(8, 4, 8);
        let cache = m.forward_train(&x).unwrap();
        let g = m.backward(&cache, &target).unwrap();
        assert!(g.layers[0].weight.column(2).iter().all(|&v| v == 0.0));
        assert!(g.layers[0].weight.column(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn inference_is_deterministic_and_pure() {
        let arch = Architecture::uniform(3, 6, 16);
        let m: DenoiserModel<f32> = init_model(&arch, &mut rng_from_seed(2)).unwrap();
        let before = m.clone();
        let x = random_batch(5, 6, 9).mapv(|v| v as f32);
        assert_eq!(m.infer(&x).unwrap(), m.infer(&x).unwrap());
        assert_eq!(m, before);
    }

    #[test]
    fn disabled_input_bias_stays_zero() {
        let mut arch = Architecture::uniform(2, 4, 5);
        arch.input_bias = false;
        let mut m: DenoiserModel<f64> = init_model(&arch, &mut rng_from_seed(0)).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        let x = random_batch(8, 4, 1);
        let t = random_batch(8, 4, 2);
        for _ in 0..5 {
            let cache = m.forward_train(&x).unwrap();
            let g = m.backward(&cache, &t).unwrap();
            assert!(g.layers[0].bias.iter().all(|&v| v == 0.0));
            m.apply_adam(&g, &mut adam).unwrap();
        }
        assert!(m.layers[0].dense.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fifty_adam_steps_reduce_loss() {
        let arch = Architecture::uniform(4, 6, 32);
        let mut m: DenoiserModel<f32> = init_model(&arch, &mut rng_from_seed(10)).unwrap();
        let x = random_batch(256, 8, 11).mapv(|v| v as f32);
        let t = x.mapv(|v| (v * 0.7).sin());
        let mut adam = Adam::new(AdamConfig::default());
        let mut losses = Vec::new();
        for _ in 0..50 {
            let cache = m.forward_train(&x).unwrap();
            losses.push(loss(cache.output(), &t).unwrap() as f64);
            let g = m.backward(&cache, &t).unwrap();
            m.apply_adam(&g, &mut adam).unwrap();
        }
        let ma: Vec<f64> = losses.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        assert!(ma.windows(2).all(|w| w[1] < w[0]), "{ma:?}");
        assert!(losses[49] < losses[0]);
    }
}
