//! Thin wrappers around `rustfft` with a per-thread plan cache.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward transform (no scaling).
pub fn forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place inverse transform, scaled by `1/N`.
pub fn inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

pub fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Periodic Hann (raised-cosine) taper.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Frequency in hertz of two-sided bin `k` on an `n`-point grid; bins past
/// Nyquist map to their mirrored (positive) frequency.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = if k <= n / 2 { k } else { n - k };
    k as f64 * sample_rate / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let x: Vec<f64> = (0..37).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut buf = real_to_complex(&x);
        forward(&mut buf);
        inverse(&mut buf);
        for (a, b) in x.iter().zip(&buf) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn mirrored_bins() {
        assert_eq!(bin_frequency(1, 8, 8.0), 1.0);
        assert_eq!(bin_frequency(7, 8, 8.0), 1.0);
        assert_eq!(bin_frequency(4, 8, 8.0), 4.0);
    }
}
