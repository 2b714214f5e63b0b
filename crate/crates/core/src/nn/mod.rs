//! Dense residual denoising network.
//!
//! Layout for `L` layers with widths `[2M, N_1, ..., N_{L-1}, 2M]`:
//!
//! ```text
//! Y1 = act(Y0 W1 + b1)
//! H  = act(BN(Y1 W2 + b2))            -- residual block, repeated
//! Y3 = act(Y1 + BN(H W3 + b3))
//! ...
//! YL = Y_{L-1} WL + bL                -- linear output
//! ```
//!
//! Training minimizes the per-sample squared error divided by `2M`, averaged
//! over the batch. Gradients are derived by hand, including the batch-statistic
//! terms of batch normalization.

pub mod adam;
pub mod checkpoint;
pub mod half;
mod model;
pub mod ops;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use model::{
    init_model, Architecture, Dense, DenoiserModel, FcLayer, ForwardCache, Gradients, LayerGrads,
    LayerKind, LayerSpec,
};
pub use ops::{loss, loss_gradient, per_sample_loss, relu, BatchNorm, BnCache};

/// Floating-point element type the network runs in (`f32` for training,
/// `f64` for gradient checks).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
}

impl Activation {
    const LEAK: f64 = 0.01;

    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu => {
                if x > T::zero() {
                    x
                } else {
                    x * T::of(Self::LEAK)
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative evaluated at the pre-activation `x`.
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(Self::LEAK)
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::LeakyRelu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::LeakyRelu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky-relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Storage precision of the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Fp32,
    /// Every parameter holds a binary16-representable value and is written
    /// to disk at 16 bits.
    Fp16,
}
