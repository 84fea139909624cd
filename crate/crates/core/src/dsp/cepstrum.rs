use rustfft::num_complex::Complex64;

use super::spectrum::{power_spectrum, PowerSpectrum};
use crate::error::{Error, Result};
use crate::fft;
use crate::series::TimeSeries;

/// Lower lifter bound: shorter quefrencies carry source-dependent pitch
/// structure rather than multipath delays.
pub const LIFTER_LOW_TIME: f64 = 84e-6;
/// Upper lifter bound: no useful surface TDOA exists beyond this in the
/// modelled geometry.
pub const LIFTER_HIGH_TIME: f64 = 1.4e-3;

/// Power cepstrum; `values[k]` sits at quefrency `k * quefrency_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cepstrum {
    pub values: Vec<f64>,
    pub quefrency_step: f64,
}

/// Inclusive band of retained quefrency indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifterWindow {
    pub low_index: usize,
    pub high_index: usize,
}

impl LifterWindow {
    pub fn new(low_index: usize, high_index: usize) -> Result<Self> {
        if low_index > high_index {
            return Err(Error::InvalidArgument(format!(
                "lifter low index {low_index} exceeds high index {high_index}"
            )));
        }
        Ok(Self { low_index, high_index })
    }

    /// Rounds quefrency bounds in seconds to indices at `sample_rate`.
    pub fn from_times(low: f64, high: f64, sample_rate: f64) -> Result<Self> {
        if !(low >= 0.0 && high >= low && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("bad lifter times [{low}, {high}] s")));
        }
        Self::new((low * sample_rate).round() as usize, (high * sample_rate).round() as usize)
    }

    /// 84 us .. 1.4 ms; indices 21..=350 at 250 kHz.
    pub fn ranging(sample_rate: f64) -> Result<Self> {
        Self::from_times(LIFTER_LOW_TIME, LIFTER_HIGH_TIME, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.high_index - self.low_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.low_index..=self.high_index).contains(&index)
    }
}

/// Inverse transform of the floored log spectrum. Returns the real part and
/// the largest imaginary residue relative to the largest real magnitude.
pub(crate) fn inverse_log_spectrum(
    spec: &PowerSpectrum,
    floor_epsilon: f64,
    lines: Option<LineSuppression>,
) -> Result<(Vec<f64>, f64)> {
    if spec.values.is_empty() {
        return Err(Error::EmptyInput("power spectrum".into()));
    }
    if let Some(i) = spec.values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite(format!("power spectrum bin {i} = {}", spec.values[i])));
    }
    if !(floor_epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("floor epsilon {floor_epsilon} must be >= 0")));
    }
    let peak = spec.values.iter().cloned().fold(0.0, f64::max);
    let floor = floor_epsilon * peak;
    let mut buf: Vec<Complex64> = Vec::with_capacity(spec.values.len());
    for (k, &v) in spec.values.iter().enumerate() {
        let v = if peak == 0.0 && floor_epsilon > 0.0 {
            // Silent spectrum: treat as flat at the relative floor.
            floor_epsilon
        } else {
            v.max(floor)
        };
        if v == 0.0 {
            return Err(Error::ZeroPower(format!("spectrum bin {k} is zero and no log floor is set")));
        }
        buf.push(Complex64::new(v.ln(), 0.0));
    }
    if let Some(lines) = lines {
        let mut log: Vec<f64> = buf.iter().map(|c| c.re).collect();
        suppress_lines(&mut log, lines)?;
        buf.iter_mut().zip(log).for_each(|(c, v)| c.re = v);
    }
    fft::inverse(&mut buf);
    let max_re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let max_im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    Ok((buf.into_iter().map(|c| c.re).collect(), residue))
}

/// Real cepstrum `IFFT(log(max(P, eps * max(P))))`.
pub fn cepstrum(spec: &PowerSpectrum, floor_epsilon: f64) -> Result<Cepstrum> {
    let (values, _) = inverse_log_spectrum(spec, floor_epsilon, None)?;
    Ok(Cepstrum { values, quefrency_step: 1.0 / spec.sample_rate() })
}

/// Narrowband line removal applied to the log spectrum before the inverse
/// transform. A bin more than `threshold_db` above the median of the
/// `2 * half_width + 1` bins centred on it (circularly, so the spectrum
/// stays symmetric) is replaced by that median.
///
/// Tonal lines otherwise leave a source-specific ripple across every
/// quefrency. Multipath ripple peaks sit at most about 3 dB above the local
/// median, so a 6 dB threshold leaves it intact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSuppression {
    pub half_width: usize,
    pub threshold_db: f64,
}

impl Default for LineSuppression {
    fn default() -> Self {
        Self { half_width: 16, threshold_db: 6.0 }
    }
}

pub fn suppress_lines(log_spectrum: &mut [f64], s: LineSuppression) -> Result<()> {
    let n = log_spectrum.len();
    if s.half_width == 0 || !(s.threshold_db > 0.0) {
        return Err(Error::InvalidArgument(format!("bad line suppression {s:?}")));
    }
    let width = 2 * s.half_width + 1;
    if width > n {
        return Err(Error::InvalidArgument(format!("line suppression window {width} exceeds spectrum length {n}")));
    }
    let threshold = s.threshold_db * std::f64::consts::LN_10 / 10.0;
    let original = log_spectrum.to_vec();
    let mut window = vec![0.0; width];
    for (k, out) in log_spectrum.iter_mut().enumerate() {
        for (j, w) in window.iter_mut().enumerate() {
            *w = original[(k + n + j - s.half_width) % n];
        }
        let (_, &mut median, _) = window.select_nth_unstable_by(s.half_width, f64::total_cmp);
        if original[k] > median + threshold {
            *out = median;
        }
    }
    Ok(())
}

/// Keeps indices `low_index..=high_index`.
pub fn lifter(c: &Cepstrum, w: LifterWindow) -> Result<Vec<f64>> {
    if w.high_index >= c.values.len() {
        return Err(Error::InvalidArgument(format!(
            "lifter high index {} outside cepstrum of length {}",
            w.high_index,
            c.values.len()
        )));
    }
    Ok(c.values[w.low_index..=w.high_index].to_vec())
}

/// Spectral estimation settings shared by every featurization path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub window_length: usize,
    pub overlap_fraction: f64,
    pub floor_epsilon: f64,
    pub lines: Option<LineSuppression>,
}

impl Default for SpectralParams {
    /// 8192-sample Hann segments, 50% overlap, log floor 1e-12 of the peak,
    /// default line suppression.
    fn default() -> Self {
        Self { window_length: 8192, overlap_fraction: 0.5, floor_epsilon: 1e-12, lines: Some(LineSuppression::default()) }
    }
}

/// Liftered cepstrum of a whole segment.
pub fn liftered_cepstrum(x: &TimeSeries, w: LifterWindow, params: &SpectralParams) -> Result<Vec<f64>> {
    let spec = power_spectrum(x, params.window_length, params.overlap_fraction)?;
    let (values, _) = inverse_log_spectrum(&spec, params.floor_epsilon, params.lines)?;
    lifter(&Cepstrum { values, quefrency_step: 1.0 / spec.sample_rate() }, w)
}

/// m x n quefrency-by-time matrix, row-major (`values[row * n + col]`).
#[derive(Debug, Clone, PartialEq)]
pub struct CepstrogramFeature {
    pub values: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub lifter: LifterWindow,
    pub quefrency_step: f64,
}

impl CepstrogramFeature {
    pub fn from_columns(columns: &[Vec<f64>], lifter: LifterWindow, quefrency_step: f64) -> Result<Self> {
        let n = columns.len();
        if n == 0 {
            return Err(Error::EmptyInput("cepstrogram columns".into()));
        }
        let m = lifter.len();
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::ShapeMismatch(format!("every column must have {m} rows")));
        }
        let mut values = vec![0.0; m * n];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * n + j] = v;
            }
        }
        Ok(Self { values, m, n, lifter, quefrency_step })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.at(i, col)).collect()
    }
}

/// Splits `x` into `n` equal contiguous sections (a trailing remainder is
/// dropped) and stacks their liftered cepstra as columns in time order.
pub fn cepstrogram(x: &TimeSeries, n: usize, w: LifterWindow, params: &SpectralParams) -> Result<CepstrogramFeature> {
    if n == 0 {
        return Err(Error::InvalidArgument("cepstrogram width n must be >= 1".into()));
    }
    let section = x.len() / n;
    if section < params.window_length {
        return Err(Error::SignalTooShort { needed: n * params.window_length, available: x.len() });
    }
    if w.high_index >= params.window_length {
        return Err(Error::InvalidArgument(format!(
            "lifter high index {} needs window length > {}",
            w.high_index, w.high_index
        )));
    }
    let columns = (0..n)
        .map(|j| liftered_cepstrum(&x.slice(j * section, section)?, w, params))
        .collect::<Result<Vec<_>>>()?;
    CepstrogramFeature::from_columns(&columns, w, 1.0 / x.sample_rate)
}
