//! Synthetic broadband radiated-noise sources and spectrally shaped noise.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::series::TimeSeries;

/// Radiated-noise character of a simulated vessel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    /// Smooth broadband hump centred near 5 kHz (training vessel).
    A,
    /// Steeper low-frequency tilt plus narrowband tonal lines (unseen vessel).
    B,
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(SourceKind::A),
            "b" => Ok(SourceKind::B),
            other => Err(Error::InvalidArgument(format!("unknown source kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::A => "a",
            SourceKind::B => "b",
        })
    }
}

/// Tonal line frequencies of kind B, in hertz.
pub const KIND_B_TONALS: [f64; 6] = [1250.0, 2900.0, 4700.0, 7300.0, 11100.0, 16900.0];
/// Tonal level above the continuum, measured in a `sample_rate / 8192` band.
pub const KIND_B_TONAL_DB: f64 = 25.0;

const SPECTRAL_FLOOR: f64 = 1e-4;

impl SourceKind {
    /// Relative continuum power spectral density at `f` hertz.
    pub fn continuum_psd(self, f: f64) -> f64 {
        match self {
            SourceKind::A => {
                let x = (f.max(1.0) / 5000.0).ln() / 1.2;
                SPECTRAL_FLOOR + (-0.5 * x * x).exp()
            }
            SourceKind::B => SPECTRAL_FLOOR + (1.0 + f / 1000.0).powf(-1.5),
        }
    }
}

/// Pink-tilted ambient background used as the "no vessel" recording model.
pub fn ambient_psd(f: f64) -> f64 {
    1e-3 + 1.0 / (1.0 + f / 500.0)
}

const DESIGN_POINTS: usize = 4096;
const FILTER_TAPS: usize = 2047;
const BLOCK: usize = 1 << 16;

/// Linear-phase FIR whose squared magnitude follows a target PSD, with
/// unit energy so filtered unit-variance white noise stays unit variance.
#[derive(Debug, Clone)]
pub struct ShapingFilter {
    taps: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl ShapingFilter {
    pub fn design(psd: impl Fn(f64) -> f64, sample_rate: f64) -> Self {
        let mut grid: Vec<Complex64> = (0..DESIGN_POINTS)
            .map(|k| {
                let p = psd(fft::bin_frequency(k, DESIGN_POINTS, sample_rate)).max(0.0);
                Complex64::new(p.sqrt(), 0.0)
            })
            .collect();
        fft::inverse(&mut grid);
        let half = FILTER_TAPS / 2;
        let window = fft::hann(FILTER_TAPS + 1);
        let mut taps: Vec<f64> = (0..FILTER_TAPS)
            .map(|i| {
                let lag = (i + DESIGN_POINTS - half) % DESIGN_POINTS;
                grid[lag].re * window[i + 1]
            })
            .collect();
        let energy: f64 = taps.iter().map(|t| t * t).sum();
        if energy > 0.0 {
            let g = energy.sqrt().recip();
            taps.iter_mut().for_each(|t| *t *= g);
        }
        let mut spectrum = vec![Complex64::default(); BLOCK];
        for (s, &t) in spectrum.iter_mut().zip(&taps) {
            s.re = t;
        }
        fft::forward(&mut spectrum);
        Self { taps, spectrum }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Filters `len` samples of fresh white Gaussian noise drawn from `rng`
    /// (overlap-save, so output is stationary across block boundaries).
    pub fn shaped_noise(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let l = self.taps.len();
        let hop = BLOCK - (l - 1);
        let mut out = Vec::with_capacity(len);
        let mut buf = vec![Complex64::default(); BLOCK];
        // Input window slides by `hop`; the first l-1 samples carry over.
        let mut window: Vec<f64> = (0..l - 1).map(|_| rng.sample(StandardNormal)).collect();
        while out.len() < len {
            let take = hop.min(len - out.len());
            window.extend((0..take).map(|_| rng.sample::<f64, _>(StandardNormal)));
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(window.get(i).copied().unwrap_or(0.0), 0.0);
            }
            fft::forward(&mut buf);
            for (b, h) in buf.iter_mut().zip(&self.spectrum) {
                *b *= h;
            }
            fft::inverse(&mut buf);
            out.extend(buf[l - 1..l - 1 + take].iter().map(|c| c.re));
            window.drain(..take);
        }
        out
    }
}

/// Generates `duration` seconds of the radiated noise of a `kind` vessel,
/// normalized to unit variance. Deterministic in `seed`.
pub fn source_signal(kind: SourceKind, duration: f64, sample_rate: f64, seed: u64) -> Result<TimeSeries> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration {duration} must be > 0")));
    }
    let len = (duration * sample_rate).round() as usize;
    source_signal_samples(kind, len, sample_rate, seed)
}

/// As [`source_signal`], with an exact sample count.
pub fn source_signal_samples(kind: SourceKind, len: usize, sample_rate: f64, seed: u64) -> Result<TimeSeries> {
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidArgument(format!("sample rate {sample_rate} must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filter = ShapingFilter::design(|f| kind.continuum_psd(f), sample_rate);
    let mut samples = filter.shaped_noise(len, &mut rng);

    if kind == SourceKind::B {
        // One-sided continuum density of the unit-variance noise at f.
        let df = sample_rate / DESIGN_POINTS as f64;
        let total: f64 = (0..DESIGN_POINTS)
            .map(|k| kind.continuum_psd(fft::bin_frequency(k, DESIGN_POINTS, sample_rate)) * df)
            .sum();
        let reference_band = sample_rate / 8192.0;
        let mut tonal_power = 0.0;
        for &f in KIND_B_TONALS.iter().filter(|&&f| f < sample_rate / 2.0) {
            let density = 2.0 * kind.continuum_psd(f) / total;
            let power = 10f64.powf(KIND_B_TONAL_DB / 10.0) * density * reference_band;
            let amp = (2.0 * power).sqrt();
            let phase = rng.random::<f64>() * 2.0 * PI;
            let w = 2.0 * PI * f / sample_rate;
            for (n, s) in samples.iter_mut().enumerate() {
                *s += amp * (w * n as f64 + phase).sin();
            }
            tonal_power += power;
        }
        let g = (1.0 + tonal_power).sqrt().recip();
        samples.iter_mut().for_each(|s| *s *= g);
    }
    TimeSeries::new(samples, sample_rate)
}
