use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::series::TimeSeries;

/// Two-sided averaged power spectrum. `values[k]` is power in bin `k` (bins
/// past `len/2` are negative frequencies), so `values.iter().sum()` is the
/// taper-weighted mean-square power of the input (see [`power_spectrum`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub values: Vec<f64>,
    pub bin_width: f64,
}

impl PowerSpectrum {
    pub fn sample_rate(&self) -> f64 {
        self.bin_width * self.values.len() as f64
    }
}

/// Segment start offsets for an averaged periodogram.
pub(crate) fn segment_starts(len: usize, window_length: usize, overlap_fraction: f64) -> Vec<usize> {
    let hop = (((1.0 - overlap_fraction) * window_length as f64).round() as usize).max(1);
    (0..)
        .map(|i| i * hop)
        .take_while(|s| s + window_length <= len)
        .collect()
}

/// Averaged modified periodogram with a periodic Hann taper.
///
/// Each segment contributes `|FFT(w * x)|^2 / (N * sum(w^2))`, so the bins of
/// one segment sum to `sum((w * x)^2) / sum(w^2)` (Parseval); the result is
/// the mean over segments.
pub fn power_spectrum(x: &TimeSeries, window_length: usize, overlap_fraction: f64) -> Result<PowerSpectrum> {
    if window_length == 0 {
        return Err(Error::InvalidArgument("window length must be > 0".into()));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidArgument(format!("overlap fraction {overlap_fraction} not in [0, 1)")));
    }
    if window_length > x.len() {
        return Err(Error::SignalTooShort { needed: window_length, available: x.len() });
    }
    let taper = fft::hann(window_length);
    let taper_energy: f64 = taper.iter().map(|w| w * w).sum();
    let starts = segment_starts(x.len(), window_length, overlap_fraction);
    let mut acc = vec![0.0; window_length];
    let mut buf = vec![Complex64::default(); window_length];
    for &s in &starts {
        for ((b, &v), &w) in buf.iter_mut().zip(&x.samples[s..s + window_length]).zip(&taper) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft::forward(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (starts.len() as f64 * window_length as f64 * taper_energy);
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(PowerSpectrum { values: acc, bin_width: x.sample_rate / window_length as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn gaussian(len: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSeries::new((0..len).map(|_| StandardNormal.sample(&mut rng)).collect(), 1000.0).unwrap()
    }

    #[test]
    fn bin_centred_sinusoid() {
        // Hann: a bin-centred sinusoid leaks into exactly the two neighbouring
        // bins with amplitudes 1/2 of the centre, so the centre pair holds
        // 1 / (1 + 2 * 1/4) = 2/3 of the power and the main lobe all of it.
        let n = 256;
        let k0 = 20;
        let x: Vec<f64> = (0..4096).map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).cos()).collect();
        let spec = power_spectrum(&TimeSeries::new(x, 1000.0).unwrap(), n, 0.5).unwrap();
        let total: f64 = spec.values.iter().sum();
        let pair = spec.values[k0] + spec.values[n - k0];
        let lobe: f64 = (k0 - 1..=k0 + 1).chain(n - k0 - 1..=n - k0 + 1).map(|k| spec.values[k]).sum();
        assert_relative_eq!(pair / total, 2.0 / 3.0, max_relative = 1e-9);
        assert!(lobe / total >= 0.99);
        let dominant = spec.values.iter().cloned().fold(0.0, f64::max);
        assert_eq!(dominant, spec.values[k0].max(spec.values[n - k0]));
    }

    #[test]
    fn zero_signal_gives_zero_spectrum() {
        let spec = power_spectrum(&TimeSeries::zeros(1024, 8.0), 128, 0.5).unwrap();
        assert!(spec.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_is_flat() {
        // 64+ averages: per-bin spread is ~1/sqrt(K); band-average to 16 bins
        // to compare against the +-1.5 dB flatness bound.
        let x = gaussian(256 * 130, 7);
        let spec = power_spectrum(&x, 256, 0.5).unwrap();
        let mean = spec.values.iter().sum::<f64>() / 256.0;
        for band in spec.values.chunks(16) {
            let avg = band.iter().sum::<f64>() / band.len() as f64;
            let db = 10.0 * (avg / mean).log10();
            assert!(db.abs() < 1.5, "band deviates {db:.2} dB");
        }
    }

    #[test]
    fn parseval_matches_windowed_mean_square() {
        let x = gaussian(5000, 8);
        let n = 512;
        let spec = power_spectrum(&x, n, 0.5).unwrap();
        let taper = fft::hann(n);
        let tw: f64 = taper.iter().map(|w| w * w).sum();
        let starts = segment_starts(x.len(), n, 0.5);
        let direct: f64 = starts
            .iter()
            .map(|&s| x.samples[s..s + n].iter().zip(&taper).map(|(v, w)| (v * w).powi(2)).sum::<f64>() / tw)
            .sum::<f64>()
            / starts.len() as f64;
        assert_relative_eq!(spec.values.iter().sum::<f64>(), direct, max_relative = 1e-6);
    }

    #[test]
    fn rejects_long_window() {
        let x = gaussian(100, 1);
        assert!(matches!(power_spectrum(&x, 101, 0.5), Err(Error::SignalTooShort { .. })));
        assert!(power_spectrum(&x, 50, 1.0).is_err());
    }
}
