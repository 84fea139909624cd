use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::{read_exact_array, read_f32, read_magic, read_u32, read_u64, read_u8};
use crate::error::{Error, Result};

pub const CEPS_MAGIC: &[u8; 4] = b"CEPS";
pub const CEPS_VERSION: u32 = 1;

/// One example: the range label in meters (`None` when no vessel is
/// present) and the row-major `m x n` feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub range: Option<f32>,
    pub feature: Vec<f32>,
}

impl LabeledExample {
    pub fn present(&self) -> bool {
        self.range.is_some()
    }
}

/// Feature dataset. Layout (little-endian): magic `b"CEPS"`, version `u32`,
/// `m` `u32`, `n` `u32`, count `u64`, then per example the range label
/// `f32` (NaN when absent), presence `u8` and `m * n` feature `f32`s.
/// The example id is the position in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub m: usize,
    pub n: usize,
    pub examples: Vec<LabeledExample>,
}

impl DatasetFile {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::ShapeMismatch("dataset dimensions must be positive".into()));
        }
        for (i, e) in self.examples.iter().enumerate() {
            if e.feature.len() != self.m * self.n {
                return Err(Error::ShapeMismatch(format!(
                    "example {i} has {} values, expected {}",
                    e.feature.len(),
                    self.m * self.n
                )));
            }
            if e.range.is_some_and(|r| !r.is_finite()) || e.feature.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("example {i}")));
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        w.write_all(CEPS_MAGIC)?;
        w.write_all(&CEPS_VERSION.to_le_bytes())?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.examples.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(5 + 4 * self.m * self.n);
        for e in &self.examples {
            buf.clear();
            buf.extend_from_slice(&e.range.unwrap_or(f32::NAN).to_le_bytes());
            buf.push(u8::from(e.present()));
            for v in &e.feature {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        read_magic(&mut r, CEPS_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != CEPS_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let m = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        let count = read_u64(&mut r)?;
        if m == 0 || n == 0 {
            return Err(Error::Format("dataset dimensions must be positive".into()));
        }
        let mut examples = Vec::new();
        for i in 0..count {
            let range = read_f32(&mut r)?;
            let presence = read_u8(&mut r)?;
            let range = match (presence, range.is_nan()) {
                (0, true) => None,
                (1, false) => Some(range),
                (0 | 1, _) => return Err(Error::Format(format!("example {i}: range label must be NaN exactly when absent"))),
                _ => return Err(Error::Format(format!("example {i}: presence byte {presence} is not 0 or 1"))),
            };
            examples.push(LabeledExample { range, feature: read_exact_array(&mut r, m * n)? });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format(format!("trailing bytes after {count} examples")));
        }
        let d = Self { m, n, examples };
        d.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn present_count(&self) -> usize {
        self.examples.iter().filter(|e| e.present()).count()
    }
}
