//! Uniformly sampled pressure sequences and their `TSER` file format.
//!
//! Layout (little-endian): magic `b"TSER"`, version `u32`, sample rate `f64`,
//! sample count `u64`, then `count` samples as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::{read_exact_array, read_f64, read_magic, read_u32, read_u64};
use crate::error::{Error, Result};

pub const TSER_MAGIC: &[u8; 4] = b"TSER";
pub const TSER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample rate {sample_rate} must be > 0")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i} of time series")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Self { samples: vec![0.0; len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean-square power over the whole sequence.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    /// Copy of `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.samples.len() {
            return Err(Error::SignalTooShort { needed: start + len, available: self.samples.len() });
        }
        Ok(Self { samples: self.samples[start..start + len].to_vec(), sample_rate: self.sample_rate })
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self { samples: self.samples.iter().map(|v| v * gain).collect(), sample_rate: self.sample_rate }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TSER_MAGIC)?;
        w.write_all(&TSER_VERSION.to_le_bytes())?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for &s in &self.samples {
            w.write_all(&(s as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        read_magic(&mut r, TSER_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != TSER_VERSION {
            return Err(Error::Format(format!("unsupported TSER version {version}")));
        }
        let sample_rate = read_f64(&mut r)?;
        let count = read_u64(&mut r)? as usize;
        let raw: Vec<f32> = read_exact_array(&mut r, count)?;
        Self::new(raw.into_iter().map(f64::from).collect(), sample_rate)
            .map_err(|e| Error::Format(format!("TSER payload: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

pub fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}
