//! Quantized uniform-linear-array signal reconstruction.
//!
//! The crate covers the full chain used to study low-resolution ADCs in
//! direction-of-arrival estimation:
//!
//! * [`array`] synthesizes clean ULA snapshots from far-field sources,
//! * [`quantizer`] applies a B-bit mid-tread rounding ADC,
//! * [`nn`] is a dense residual denoising network with manual backprop and Adam,
//! * [`music`] estimates source directions with the MUSIC pseudo-spectrum,
//! * [`experiments`] wires datasets, training and evaluation campaigns together.
//!
//! [`config::ScenarioConfig`] is the single serialized description of a run.

pub mod array;
pub mod config;
pub mod error;
pub mod experiments;
pub mod music;
pub mod nn;
pub mod quantizer;
pub mod rng;

pub use array::{ArrayGeometry, NoiseSpec, SnapshotKind, SnapshotMatrix, SourceSet};
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use music::{AngleGrid, CovarianceMatrix, MusicEstimator, MusicResult};
pub use nn::{Architecture, DenoiserModel, Precision};
pub use quantizer::QuantizerSpec;
