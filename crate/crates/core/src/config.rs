//! Serialized run configuration.
//!
//! A config is a TOML key tree. Every section is optional in the file and falls
//! back to the desk-scale defaults; unknown keys are rejected. Dotted overrides
//! (`train.lr=0.01`) are applied on the fully populated tree, so an override can
//! only target an existing key.

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{ArrayGeometry, NoiseSpec};
use crate::error::{Error, Result};
use crate::music::{AngleGrid, Pairing};
use crate::nn::{Activation, Architecture};
use crate::quantizer::{default_full_scale, QuantizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub array: ArrayConfig,
    pub sources: SourceConfig,
    pub noise: NoiseConfig,
    pub quantizer: QuantizerConfig,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub music: MusicConfig,
    pub spectrum: SpectrumConfig,
    pub ablation: AblationConfig,
    pub bench: BenchConfig,
    pub compress: CompressConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub sensors: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub count: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub min_sep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FullScale {
    Auto,
    Volts(f64),
}

impl Serialize for FullScale {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FullScale::Auto => s.serialize_str("auto"),
            FullScale::Volts(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for FullScale {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(FullScale::Volts(v)),
            Raw::Int(v) => Ok(FullScale::Volts(v as f64)),
            Raw::Str(s) if s == "auto" => Ok(FullScale::Auto),
            Raw::Str(s) => Err(de::Error::custom(format!(
                "full_scale must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    /// Bit depth of the ADC whose output the denoiser is trained on.
    pub bits: u8,
    pub full_scale: FullScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Training records.
    pub count: usize,
    pub test_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// `[2M, N_1, ..., N_{L-1}, 2M]`.
    pub widths: Vec<usize>,
    pub batch_norm: bool,
    pub residual: bool,
    pub activation: Activation,
    pub input_bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Optimizer-step cap; 0 runs every epoch to completion.
    pub max_steps: usize,
    /// Test-loss evaluation interval in epochs.
    pub eval_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub snapshots: usize,
    pub trials: usize,
    pub pairing: Pairing,
    /// Bit depths of the raw quantized baselines.
    pub baseline_bits: Vec<u8>,
    /// SNRs for DOA evaluation; empty means `noise.snr_db`. Kept apart from
    /// the noise list so that the automatic full scale does not move.
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub angles: Vec<f64>,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Layer counts `L` to sweep (hidden widths copied from the base).
    pub depths: Vec<usize>,
    /// Hidden widths `N_l` to sweep.
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Include the no-BN and no-skip variants.
    pub structure: bool,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub widths: Vec<usize>,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressMetric {
    Recon,
    Doa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub metric: CompressMetric,
}

fn widths_for(sensors: usize, layers: usize, hidden: usize) -> Vec<usize> {
    let mut w = vec![hidden; layers + 1];
    w[0] = 2 * sensors;
    w[layers] = 2 * sensors;
    w
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            sensors: 8,
            spacing: 0.5,
        }
    }
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            count: 3,
            angle_min: -30.0,
            angle_max: 30.0,
            min_sep: 1.0,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        }
    }
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            bits: 1,
            full_scale: FullScale::Auto,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            count: 5000,
            test_count: 1000,
        }
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            widths: widths_for(8, 6, 128),
            batch_norm: true,
            residual: true,
            activation: Activation::Relu,
            input_bias: true,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            lr: 1e-3,
            epochs: 50,
            max_steps: 0,
            eval_every: 5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            grid_min: -30.0,
            grid_max: 30.0,
            grid_step: 0.01,
            snapshots: 5,
            trials: 200,
            pairing: Pairing::Sorted,
            baseline_bits: vec![1, 2, 3, 4],
            snr_db: Vec::new(),
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            angles: vec![-18.9346, 8.6346, 9.9462],
            snr_db: 50.0,
        }
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            depths: vec![4, 8],
            widths: vec![32, 64],
            activations: vec![Activation::Tanh],
            structure: true,
            epochs: 20,
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            widths: vec![32, 64, 128, 256],
            epochs: 2,
        }
    }
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self {
            metric: CompressMetric::Recon,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 2021,
            array: ArrayConfig::default(),
            sources: SourceConfig::default(),
            noise: NoiseConfig::default(),
            quantizer: QuantizerConfig::default(),
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            music: MusicConfig::default(),
            spectrum: SpectrumConfig::default(),
            ablation: AblationConfig::default(),
            bench: BenchConfig::default(),
            compress: CompressConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Laptop-sized run: `M = 8`, `L = 6`, `N_l = 128`, 5000/1000 records.
    pub fn desk() -> Self {
        Self::default()
    }

    /// Larger training recipe: 20000 records, 300 epochs, `N_l = 512`.
    pub fn extended() -> Self {
        let mut c = Self::default();
        c.data.count = 20_000;
        c.train.epochs = 300;
        c.train.eval_every = 25;
        c.network.widths = widths_for(c.array.sensors, 6, 512);
        c
    }

    /// Full-size setup: 32-element array, `L = 10`, `N_l = 1024`, 1000 trials.
    pub fn paper() -> Self {
        let mut c = Self::default();
        c.array.sensors = 32;
        c.network.widths = widths_for(32, 10, 1024);
        c.data.count = 100_000;
        c.data.test_count = 5000;
        c.train.epochs = 300;
        c.train.eval_every = 10;
        c.music.trials = 1000;
        c.ablation.depths = vec![6, 14];
        c.ablation.widths = vec![128, 512, 2048];
        c.bench.widths = vec![128, 512, 1024, 2048];
        c
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" | "base" => Some(Self::desk()),
            "extended" => Some(Self::extended()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Applies `key.path=value` overrides; the value is parsed as a TOML
    /// literal, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut tree = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (path, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {raw:?} is not KEY=VALUE")))?;
            let path = path.trim();
            set_path(&mut tree, path, parse_literal(value.trim()))?;
        }
        tree.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes to JSON");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.array.sensors, self.array.spacing)
    }

    pub fn full_scale(&self) -> f64 {
        match self.quantizer.full_scale {
            FullScale::Auto => default_full_scale(self),
            FullScale::Volts(v) => v,
        }
    }

    /// Quantizer at `bits` sharing this scenario's full scale.
    pub fn quantizer_spec(&self, bits: u8) -> Result<QuantizerSpec> {
        QuantizerSpec::new(bits, self.full_scale())
    }

    pub fn grid(&self) -> Result<AngleGrid> {
        AngleGrid::new(self.music.grid_min, self.music.grid_max, self.music.grid_step)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            widths: self.network.widths.clone(),
            batch_norm: self.network.batch_norm,
            residual: self.network.residual,
            activation: self.network.activation,
            input_bias: self.network.input_bias,
            bn_eps: self.train.bn_eps,
            bn_momentum: self.train.bn_momentum,
        }
    }

    pub fn angle_range(&self) -> (f64, f64) {
        (self.sources.angle_min, self.sources.angle_max)
    }

    /// SNR list used by the DOA evaluations.
    pub fn eval_snrs(&self) -> &[f64] {
        if self.music.snr_db.is_empty() {
            &self.noise.snr_db
        } else {
            &self.music.snr_db
        }
    }

    pub fn noise_at(&self, snr_db: f64) -> NoiseSpec {
        NoiseSpec::from_snr_db(snr_db)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // negated compares also reject NaN
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let m = self.array.sensors;
        if m < 2 {
            return bad(format!("array.sensors must be >= 2, got {m}"));
        }
        if !(self.array.spacing > 0.0 && self.array.spacing.is_finite()) {
            return bad("array.spacing must be positive".into());
        }
        let s = &self.sources;
        if s.count == 0 || s.count >= m {
            return bad(format!(
                "sources.count must satisfy 1 <= K < array.sensors, got K={} M={m}",
                s.count
            ));
        }
        if !(s.angle_min < s.angle_max && s.angle_min > -90.0 && s.angle_max < 90.0) {
            return bad("sources angle range must satisfy -90 < angle_min < angle_max < 90".into());
        }
        if s.min_sep < 0.0 || s.angle_max - s.angle_min < (s.count - 1) as f64 * s.min_sep {
            return bad("sources.min_sep infeasible for the angle range".into());
        }
        if self.noise.snr_db.is_empty() || self.noise.snr_db.iter().any(|v| !v.is_finite()) {
            return bad("noise.snr_db must be a non-empty list of finite values".into());
        }
        if self.music.snr_db.iter().any(|v| !v.is_finite()) {
            return bad("music.snr_db must hold finite values".into());
        }
        if let FullScale::Volts(v) = self.quantizer.full_scale {
            if !(v > 0.0 && v.is_finite()) {
                return bad("quantizer.full_scale must be positive or \"auto\"".into());
            }
        }
        for &b in std::iter::once(&self.quantizer.bits).chain(&self.music.baseline_bits) {
            if !(1..=24).contains(&b) {
                return bad(format!("bit depth {b} outside 1..=24"));
            }
        }
        if self.data.count == 0 || self.data.test_count == 0 {
            return bad("data.count and data.test_count must be positive".into());
        }
        self.architecture().validate(m)?;
        let t = &self.train;
        if t.batch_size < 2 {
            return bad("train.batch_size must be >= 2 for batch normalization".into());
        }
        if !(t.lr > 0.0) || t.epochs == 0 || t.eval_every == 0 {
            return bad("train.lr, train.epochs and train.eval_every must be positive".into());
        }
        if !(0.0..1.0).contains(&t.beta1) || !(0.0..1.0).contains(&t.beta2) || !(t.adam_eps > 0.0) {
            return bad("Adam hyper-parameters out of range".into());
        }
        if !(0.0..=1.0).contains(&t.bn_momentum) || !(t.bn_eps > 0.0) {
            return bad("train.bn_momentum must be in [0, 1] and train.bn_eps > 0".into());
        }
        let mu = &self.music;
        self.grid()?;
        if mu.snapshots == 0 || mu.trials == 0 {
            return bad("music.snapshots and music.trials must be positive".into());
        }
        if self.spectrum.angles.iter().any(|a| !(a.abs() < 90.0)) {
            return bad("spectrum.angles must lie in (-90, 90)".into());
        }
        if self.spectrum.angles.len() >= m {
            return bad("spectrum.angles must be fewer than array.sensors".into());
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(tree: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut node = tree;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path {path:?}: {key:?} is not a table")))?;
        let slot = table
            .get_mut(key)
            .ok_or_else(|| Error::Config(format!("unknown config key {path:?}")))?;
        if parts.peek().is_none() {
            *slot = coerce_like(slot, value);
            return Ok(());
        }
        node = slot;
    }
    Err(Error::Config(format!("empty override path {path:?}")))
}

// TOML distinguishes 1 from 1.0; let `train.lr=1` land on a float key.
fn coerce_like(existing: &toml::Value, value: toml::Value) -> toml::Value {
    match (existing, value) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (toml::Value::Array(old), toml::Value::Array(new))
            if old.first().is_some_and(|v| v.is_float()) =>
        {
            toml::Value::Array(
                new.into_iter()
                    .map(|v| match v {
                        toml::Value::Integer(i) => toml::Value::Float(i as f64),
                        other => other,
                    })
                    .collect(),
            )
        }
        (_, v) => v,
    }
}
