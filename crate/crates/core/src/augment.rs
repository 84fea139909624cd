//! Background-noise PSD models, colored-noise synthesis and training-time
//! augmentation.
//!
//! `PSDM` file layout (little-endian): magic `b"PSDM"`, version `u32`,
//! sample rate `f64`, bin width `f64`, bin count `u64`, then `f32` powers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::acoustics::mix_at_snr;
use crate::binio::{read_exact_array, read_f64, read_magic, read_u32, read_u64, write_f32s};
use crate::dsp::{power_spectrum, CepstrogramFeature};
use crate::error::{Error, Result};
use crate::fft;
use crate::series::TimeSeries;

pub const PSDM_MAGIC: &[u8; 4] = b"PSDM";
pub const PSDM_VERSION: u32 = 1;

/// Training-time SNR range in dB.
pub const AUGMENT_SNR_RANGE: [f64; 2] = [-10.0, 50.0];

/// Two-sided power per bin, same layout as [`crate::dsp::PowerSpectrum`];
/// the bins sum to the modelled mean-square power.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdModel {
    pub band_powers: Vec<f64>,
    pub bin_width: f64,
    pub sample_rate: f64,
}

impl PsdModel {
    pub fn total_power(&self) -> f64 {
        self.band_powers.iter().sum()
    }

    /// Per-bin power interpolated at `f` hertz (linear in frequency).
    fn power_at(&self, f: f64) -> f64 {
        let n = self.band_powers.len();
        let pos = (f.abs() / self.bin_width).min((n / 2) as f64);
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        let a = self.band_powers[k];
        let b = self.band_powers[(k + 1).min(n / 2)];
        a + frac * (b - a)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PSDM_MAGIC)?;
        w.write_all(&PSDM_VERSION.to_le_bytes())?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&self.bin_width.to_le_bytes())?;
        w.write_all(&(self.band_powers.len() as u64).to_le_bytes())?;
        write_f32s(&mut w, self.band_powers.iter().map(|&p| p as f32))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        read_magic(&mut r, PSDM_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != PSDM_VERSION {
            return Err(Error::Format(format!("unsupported PSDM version {version}")));
        }
        let sample_rate = read_f64(&mut r)?;
        let bin_width = read_f64(&mut r)?;
        let count = read_u64(&mut r)? as usize;
        let band_powers: Vec<f64> = read_exact_array(&mut r, count)?.into_iter().map(f64::from).collect();
        if band_powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Format("PSDM powers must be finite and non-negative".into()));
        }
        Ok(Self { band_powers, bin_width, sample_rate })
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

/// Averaged-periodogram PSD of a background recording (Hann, 50% overlap).
pub fn estimate_psd(noise: &TimeSeries, window_length: usize) -> Result<PsdModel> {
    if window_length == 0 || noise.len() < 4 * window_length {
        return Err(Error::SignalTooShort { needed: 4 * window_length.max(1), available: noise.len() });
    }
    let spec = power_spectrum(noise, window_length, 0.5)?;
    Ok(PsdModel { band_powers: spec.values, bin_width: spec.bin_width, sample_rate: noise.sample_rate })
}

/// Gaussian noise whose expected PSD matches `psd`: white noise is
/// transformed, each bin scaled by the square root of the target, and
/// transformed back. Deterministic in `seed`.
pub fn colored_noise(psd: &PsdModel, length: usize, seed: u64) -> Result<TimeSeries> {
    if length == 0 {
        return Err(Error::InvalidArgument("colored noise length must be > 0".into()));
    }
    if psd.band_powers.is_empty() {
        return Err(Error::EmptyInput("PSD model".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex64> = (0..length)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    fft::forward(&mut buf);
    // E|W_k|^2 = L, so scaling by sqrt(N_model * P(f_k)) makes the output
    // variance mean_k(N_model * P(f_k)) = total modelled power.
    let model_bins = psd.band_powers.len() as f64;
    for (k, b) in buf.iter_mut().enumerate() {
        let f = fft::bin_frequency(k, length, psd.sample_rate);
        *b *= (model_bins * psd.power_at(f)).sqrt();
    }
    fft::inverse(&mut buf);
    TimeSeries::new(buf.into_iter().map(|c| c.re).collect(), psd.sample_rate)
}

/// SNR drawn uniformly from `range` for `seed`, as used by [`augment_snr`].
pub fn draw_snr(range: [f64; 2], seed: u64) -> Result<f64> {
    Ok(augment_rng(range, seed)?.1)
}

fn augment_rng(range: [f64; 2], seed: u64) -> Result<(ChaCha8Rng, f64)> {
    let [low, high] = range;
    if !(low <= high) {
        return Err(Error::InvalidArgument(format!("SNR range [{low}, {high}] is inverted")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random();
    Ok((rng, low + u * (high - low)))
}

/// Adds colored noise from `psd` at an SNR drawn uniformly from
/// `snr_range_db`. Returns the augmented copy and the drawn SNR.
pub fn augment_snr(
    segment: &TimeSeries,
    psd: &PsdModel,
    snr_range_db: [f64; 2],
    seed: u64,
) -> Result<(TimeSeries, f64)> {
    let (mut rng, snr) = augment_rng(snr_range_db, seed)?;
    if !(segment.power() > 0.0) {
        return Err(Error::ZeroPower("segment to augment".into()));
    }
    let noise = colored_noise(psd, segment.len(), rng.random())?;
    Ok((mix_at_snr(segment, &noise, snr)?, snr))
}

/// Independent seed for stream `stream` under `base`, so per-item noise
/// does not depend on processing order.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.random()
}

/// Reverses the time columns; quefrency rows keep their delay meaning.
pub fn flip_width(f: &CepstrogramFeature) -> Result<CepstrogramFeature> {
    if f.n < 2 {
        return Err(Error::InvalidArgument("width flip needs n > 1".into()));
    }
    let mut out = f.clone();
    for row in out.values.chunks_mut(f.n) {
        row.reverse();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::ambient_psd;
    use crate::dsp::LifterWindow;
    use approx::assert_relative_eq;

    const FS: f64 = 250_000.0;

    fn white(len: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSeries::new((0..len).map(|_| rng.sample(StandardNormal)).collect(), FS).unwrap()
    }

    fn flat(total: f64, bins: usize) -> PsdModel {
        PsdModel { band_powers: vec![total / bins as f64; bins], bin_width: FS / bins as f64, sample_rate: FS }
    }

    fn shaped_model(bins: usize) -> PsdModel {
        let raw: Vec<f64> = (0..bins).map(|k| ambient_psd(fft::bin_frequency(k, bins, FS))).collect();
        let total: f64 = raw.iter().sum();
        PsdModel { band_powers: raw.iter().map(|p| 2.0 * p / total).collect(), bin_width: FS / bins as f64, sample_rate: FS }
    }

    #[test]
    fn white_noise_psd_integrates_to_variance() {
        let psd = estimate_psd(&white(1024 * 130, 1), 1024).unwrap();
        assert_relative_eq!(psd.total_power(), 1.0, max_relative = 0.05);
    }

    #[test]
    fn sinusoid_psd_has_one_dominant_band() {
        let n = 512;
        let x: Vec<f64> = (0..n * 8).map(|i| (2.0 * std::f64::consts::PI * 40.0 * i as f64 / n as f64).sin()).collect();
        let psd = estimate_psd(&TimeSeries::new(x, FS).unwrap(), n).unwrap();
        let half = &psd.band_powers[..n / 2];
        let (kmax, _) = half.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(kmax, 40);
    }

    #[test]
    fn zero_input_zero_psd_and_short_rejected() {
        let psd = estimate_psd(&TimeSeries::zeros(4096, FS), 1024).unwrap();
        assert!(psd.band_powers.iter().all(|&p| p == 0.0));
        assert!(estimate_psd(&TimeSeries::zeros(4095, FS), 1024).is_err());
        let z = colored_noise(&psd, 1000, 3).unwrap();
        assert!(z.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_psd_gives_uncorrelated_noise() {
        let x = colored_noise(&flat(2.0, 1024), 200_000, 4).unwrap();
        let var = x.power();
        assert_relative_eq!(var, 2.0, max_relative = 0.02);
        for lag in 1..6 {
            let r: f64 = x.samples.iter().zip(&x.samples[lag..]).map(|(a, b)| a * b).sum::<f64>()
                / (x.len() - lag) as f64
                / var;
            assert!(r.abs() < 0.05, "lag {lag}: {r}");
        }
    }

    #[test]
    fn colored_noise_is_zero_mean() {
        let x = colored_noise(&flat(1.0, 256), 100_000, 5).unwrap();
        let mean = x.samples.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 3.0 / (x.len() as f64).sqrt());
    }

    #[test]
    fn psd_round_trip_within_one_db() {
        let bins = 1024;
        let model = shaped_model(bins);
        let x = colored_noise(&model, 1 << 20, 6).unwrap();
        let est = estimate_psd(&x, bins).unwrap();
        let total = model.total_power();
        let band = 16;
        let mut deviations = Vec::new();
        for b in 0..bins / 2 / band {
            let r = b * band..(b + 1) * band;
            let target: f64 = model.band_powers[r.clone()].iter().sum();
            if 2.0 * target < 0.01 * total {
                continue;
            }
            let got: f64 = est.band_powers[r].iter().sum();
            deviations.push(10.0 * (got / target).log10());
        }
        assert!(!deviations.is_empty());
        let mean_abs = deviations.iter().map(|d| d.abs()).sum::<f64>() / deviations.len() as f64;
        assert!(mean_abs < 1.0, "mean log-spectral deviation {mean_abs:.2} dB");
    }

    #[test]
    fn degenerate_snr_range() {
        let seg = white(50_000, 7);
        let model = shaped_model(512);
        let (out, snr) = augment_snr(&seg, &model, [0.0, 0.0], 8).unwrap();
        assert_eq!(snr, 0.0);
        let noise: Vec<f64> = out.samples.iter().zip(&seg.samples).map(|(o, s)| o - s).collect();
        let pn = crate::series::mean_square(&noise);
        assert_relative_eq!(pn, seg.power(), max_relative = 1e-9);
    }

    #[test]
    fn snr_draws_are_uniform() {
        // Kolmogorov-Smirnov against U(-10, 50); 5% critical value for
        // n = 1000 is 1.358 / sqrt(n).
        let mut draws: Vec<f64> = (0..1000).map(|s| draw_snr(AUGMENT_SNR_RANGE, s).unwrap()).collect();
        draws.sort_by(f64::total_cmp);
        assert!(draws[0] >= -10.0 && draws[999] <= 50.0);
        let d = draws
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let cdf = (v + 10.0) / 60.0;
                (cdf - i as f64 / 1000.0).abs().max(((i + 1) as f64 / 1000.0 - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.358 / 1000f64.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn augmentation_deterministic_and_pure() {
        let seg = white(20_000, 9);
        let copy = seg.clone();
        let model = shaped_model(256);
        let a = augment_snr(&seg, &model, AUGMENT_SNR_RANGE, 10).unwrap();
        let b = augment_snr(&seg, &model, AUGMENT_SNR_RANGE, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(seg, copy);
        assert_eq!(a.0.len(), seg.len());
        assert!(augment_snr(&TimeSeries::zeros(100, FS), &model, [0.0, 1.0], 1).is_err());
        assert!(augment_snr(&seg, &model, [5.0, 1.0], 1).is_err());
    }

    #[test]
    fn flip_reverses_columns() {
        let m = 3;
        let n = 8;
        let f = CepstrogramFeature {
            values: (0..m * n).map(|v| v as f64).collect(),
            m,
            n,
            lifter: LifterWindow::new(0, 2).unwrap(),
            quefrency_step: 1.0,
        };
        let g = flip_width(&f).unwrap();
        for i in 0..m {
            for j in 0..n {
                assert_eq!(g.at(i, j), f.at(i, n - 1 - j));
            }
        }
        assert_eq!(flip_width(&g).unwrap(), f);
        let single = CepstrogramFeature { values: vec![1.0; 3], n: 1, ..f };
        assert!(flip_width(&single).is_err());
    }

    #[test]
    fn psdm_round_trip() {
        let model = shaped_model(64);
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"PSDM");
        let back = PsdModel::read_from(&buf[..]).unwrap();
        assert_eq!(back.sample_rate, FS);
        assert_eq!(back.bin_width, model.bin_width);
        for (a, b) in model.band_powers.iter().zip(&back.band_powers) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }
}
