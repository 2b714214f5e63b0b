//! Training/test records and their binary file format (little-endian).
//!
//! ```text
//! "QDST" | version u16 | M u32 | K u32 | record count u64
//! SNR list length u32 | SNR values f64...
//! quantizer bits u8 | full scale f64
//! records: input 2M x f32 | target 2M x f32 | snr f64 | angles K x f64 | seed u64
//! CRC32 (IEEE) of every preceding byte, u32
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::array::{draw_source_angles, synthesize};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::quantizer::{quantize_snapshots, QuantizerSpec};
use crate::rng::{record_seed, rng_from_seed, stream_seed, streams};

pub const MAGIC: &[u8; 4] = b"QDST";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Base seed of a split; record `i` uses `split_seed ^ i`.
pub fn split_seed(config: &ScenarioConfig, split: Split) -> u64 {
    stream_seed(
        config.seed,
        match split {
            Split::Train => streams::TRAIN,
            Split::Test => streams::TEST,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    /// Interleaved quantized snapshot.
    pub input: Vec<f32>,
    /// Interleaved clean snapshot.
    pub target: Vec<f32>,
    pub snr_db: f64,
    pub angles: Vec<f64>,
    pub seed: u64,
}

/// Records stored column-major by role for direct batching.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sensors: usize,
    pub num_sources: usize,
    pub snr_list: Vec<f64>,
    pub bits: u8,
    pub full_scale: f64,
    /// `n x 2M`.
    pub inputs: Array2<f32>,
    /// `n x 2M`.
    pub targets: Array2<f32>,
    pub snr: Vec<f64>,
    /// `n x K`.
    pub angles: Array2<f64>,
    pub seeds: Vec<u64>,
}

/// Record `index` of the stream rooted at `base`: draw angles, synthesize one
/// snapshot at the round-robin SNR, quantize.
pub fn generate_record(
    config: &ScenarioConfig,
    quantizer: &QuantizerSpec,
    base: u64,
    index: u64,
) -> Result<DatasetRecord> {
    let seed = record_seed(base, index);
    let mut rng = rng_from_seed(seed);
    let snrs = &config.noise.snr_db;
    let snr_db = snrs[(index % snrs.len() as u64) as usize];
    let geom = config.geometry()?;
    let sources = draw_source_angles(
        config.sources.count,
        config.angle_range(),
        config.sources.min_sep,
        &mut rng,
    )?;
    let x = synthesize(&sources, &geom, &config.noise_at(snr_db), 1, &mut rng)?;
    let y = quantize_snapshots(&x, quantizer);
    let f = |v: Vec<f64>| v.into_iter().map(|a| a as f32).collect();
    Ok(DatasetRecord {
        input: f(y.column_interleaved(0)),
        target: f(x.column_interleaved(0)),
        snr_db,
        angles: sources.angles().to_vec(),
        seed,
    })
}

pub fn build_dataset(config: &ScenarioConfig, split: Split) -> Result<Dataset> {
    config.validate()?;
    let count = match split {
        Split::Train => config.data.count,
        Split::Test => config.data.test_count,
    };
    let quantizer = config.quantizer_spec(config.quantizer.bits)?;
    let base = split_seed(config, split);
    let records: Vec<DatasetRecord> = (0..count as u64)
        .into_par_iter()
        .map(|i| generate_record(config, &quantizer, base, i))
        .collect::<Result<_>>()?;
    Dataset::from_records(config, &records)
}

impl Dataset {
    pub fn from_records(config: &ScenarioConfig, records: &[DatasetRecord]) -> Result<Self> {
        let m = config.array.sensors;
        let k = config.sources.count;
        let n = records.len();
        let mut inputs = Array2::zeros((n, 2 * m));
        let mut targets = Array2::zeros((n, 2 * m));
        let mut angles = Array2::zeros((n, k));
        for (i, r) in records.iter().enumerate() {
            if r.input.len() != 2 * m || r.target.len() != 2 * m || r.angles.len() != k {
                return Err(Error::dim(format!("record {i} does not match M={m}, K={k}")));
            }
            inputs.row_mut(i).assign(&ndarray::ArrayView1::from(&r.input));
            targets.row_mut(i).assign(&ndarray::ArrayView1::from(&r.target));
            angles.row_mut(i).assign(&ndarray::ArrayView1::from(&r.angles));
        }
        Ok(Self {
            sensors: m,
            num_sources: k,
            snr_list: config.noise.snr_db.clone(),
            bits: config.quantizer.bits,
            full_scale: config.full_scale(),
            inputs,
            targets,
            snr: records.iter().map(|r| r.snr_db).collect(),
            angles,
            seeds: records.iter().map(|r| r.seed).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        2 * self.sensors
    }

    pub fn record(&self, i: usize) -> DatasetRecord {
        DatasetRecord {
            input: self.inputs.row(i).to_vec(),
            target: self.targets.row(i).to_vec(),
            snr_db: self.snr[i],
            angles: self.angles.row(i).to_vec(),
            seed: self.seeds[i],
        }
    }

    /// Mean of `||input - target||^2 / (2M)`: the loss of passing quantized
    /// input through unchanged.
    pub fn quantization_noise_power(&self) -> f64 {
        let w = self.width() as f64;
        let total: f64 = self
            .inputs
            .rows()
            .into_iter()
            .zip(self.targets.rows())
            .map(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                    .sum::<f64>()
                    / w
            })
            .sum();
        total / self.len() as f64
    }

    /// Record indices grouped by SNR, in `snr_list` order.
    pub fn snr_buckets(&self) -> Vec<(f64, Vec<usize>)> {
        self.snr_list
            .iter()
            .map(|&s| {
                (
                    s,
                    (0..self.len()).filter(|&i| self.snr[i] == s).collect(),
                )
            })
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sensors as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_sources as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.snr_list.len() as u32).to_le_bytes());
        for s in &self.snr_list {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.push(self.bits);
        out.extend_from_slice(&self.full_scale.to_le_bytes());
        for i in 0..self.len() {
            for v in self.inputs.row(i).iter().chain(self.targets.row(i).iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&self.snr[i].to_le_bytes());
            for a in self.angles.row(i) {
                out.extend_from_slice(&a.to_le_bytes());
            }
            out.extend_from_slice(&self.seeds[i].to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 2 + 4 + 4 + 8 + 4 + 1 + 8 + 4 {
            return Err(Error::format("dataset file too short"));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        let mut r = Cursor { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("bad magic, not a QDST dataset"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::format(format!("unsupported dataset version {version}")));
        }
        let m = u32::from_le_bytes(r.array()?) as usize;
        let k = u32::from_le_bytes(r.array()?) as usize;
        let n = u64::from_le_bytes(r.array()?) as usize;
        let snr_len = u32::from_le_bytes(r.array()?) as usize;
        if m < 2 || k == 0 || snr_len == 0 {
            return Err(Error::format(format!("invalid dataset header M={m} K={k} snrs={snr_len}")));
        }
        let snr_list = (0..snr_len)
            .map(|_| r.array().map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let bits = r.take(1)?[0];
        let full_scale = f64::from_le_bytes(r.array()?);
        let record_bytes = 4 * 4 * m + 8 + 8 * k + 8;
        let need = n
            .checked_mul(record_bytes)
            .ok_or_else(|| Error::format("record count overflow"))?;
        if body.len() - r.pos != need {
            return Err(Error::format(format!(
                "expected {need} record bytes for {n} records, found {}",
                body.len() - r.pos
            )));
        }
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
            return Err(Error::format("CRC mismatch"));
        }
        let mut inputs = Array2::zeros((n, 2 * m));
        let mut targets = Array2::zeros((n, 2 * m));
        let mut angles = Array2::zeros((n, k));
        let mut snr = Vec::with_capacity(n);
        let mut seeds = Vec::with_capacity(n);
        for i in 0..n {
            for v in inputs.row_mut(i).iter_mut() {
                *v = f32::from_le_bytes(r.array()?);
            }
            for v in targets.row_mut(i).iter_mut() {
                *v = f32::from_le_bytes(r.array()?);
            }
            snr.push(f64::from_le_bytes(r.array()?));
            for a in angles.row_mut(i).iter_mut() {
                *a = f64::from_le_bytes(r.array()?);
            }
            seeds.push(u64::from_le_bytes(r.array()?));
        }
        Ok(Self {
            sensors: m,
            num_sources: k,
            snr_list,
            bits,
            full_scale,
            inputs,
            targets,
            snr,
            angles,
            seeds,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format("truncated dataset"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}
