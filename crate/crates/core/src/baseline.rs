//! Conventional ranging: pick the surface-reflection TDOA from a liftered
//! cepstrum and invert the two-path geometry.

use crate::acoustics::{two_path_difference, Environment};
use crate::dsp::LifterWindow;
use crate::error::{Error, Result};

/// Default minimum ratio of the peak to the median absolute cepstral value.
pub const DEFAULT_MIN_PROMINENCE: f64 = 6.0;
pub const DEFAULT_MEDIAN_WINDOW: usize = 5;

/// Candidates must reach this fraction of the largest peak.
const CANDIDATE_FRACTION: f64 = 0.5;

/// A peak is rejected when the same-signed energy at 1.5 times its
/// quefrency reaches this fraction of its own. A second-order multipath at
/// roughly twice the surface TDOA carries a cross term at their sum, which
/// identifies it once the surface TDOA itself has left the band.
pub const RAHMONIC_GATE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    /// Seconds.
    pub quefrency: f64,
    pub peak_value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangingGeometry {
    pub source_depth: f64,
    pub receiver_depth: f64,
    pub sound_speed: f64,
}

impl RangingGeometry {
    pub fn from_environment(env: &Environment, source_depth: f64) -> Self {
        Self { source_depth, receiver_depth: env.receiver_depth(), sound_speed: env.sound_speed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_depth > 0.0 && self.receiver_depth > 0.0 && self.sound_speed > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid ranging geometry {self:?}")));
        }
        Ok(())
    }

    /// Surface-minus-direct delay at horizontal range `r`.
    pub fn tdoa(&self, r: f64) -> f64 {
        two_path_difference(r, self.source_depth, self.receiver_depth) / self.sound_speed
    }

    /// Largest TDOA, reached directly above the receiver.
    pub fn tau_max(&self) -> f64 {
        self.tdoa(0.0)
    }

    /// Horizontal range at which the TDOA drops to `tau`; beyond it a peak
    /// below quefrency `tau` cannot be measured.
    pub fn threshold_range(&self, tau: f64) -> Result<f64> {
        tdoa_to_range(tau, self)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn neighbourhood(abs: &[f64], signed: &[f64], centre: f64, sign: f64) -> f64 {
    let k = centre.round() as isize;
    (k - 1..=k + 1)
        .filter(|&i| i >= 0 && (i as usize) < abs.len())
        .map(|i| i as usize)
        .filter(|&i| signed[i] * sign > 0.0)
        .map(|i| abs[i])
        .sum()
}

/// Surface-TDOA peak of a liftered cepstrum. `liftered[i]` is quefrency
/// index `w.low_index + i`; `quefrency_step` is seconds per index.
///
/// Among interior local maxima of `|c|`, the earliest within half of the
/// largest is taken, since the surface echo precedes its rahmonics and the
/// longer multipaths. Returns `None` when the largest peak's prominence is
/// below `min_prominence` or the rahmonic gate rejects the pick.
pub fn pick_peak(liftered: &[f64], w: LifterWindow, quefrency_step: f64, min_prominence: f64) -> Option<PeakEstimate> {
    if liftered.len() != w.len() || liftered.len() < 3 {
        return None;
    }
    let abs: Vec<f64> = liftered.iter().map(|v| v.abs()).collect();
    let candidates: Vec<usize> = (1..abs.len() - 1).filter(|&i| abs[i] > abs[i - 1] && abs[i] >= abs[i + 1]).collect();
    let top = candidates.iter().map(|&i| abs[i]).fold(0.0, f64::max);
    if top <= 0.0 {
        return None;
    }
    let med = median(&mut abs.clone());
    let prominence = if med > 0.0 { top / med } else { f64::INFINITY };
    if !(prominence >= min_prominence) {
        return None;
    }
    let k = *candidates.iter().find(|&&i| abs[i] >= CANDIDATE_FRACTION * top)?;
    let sign = liftered[k].signum();
    let own = neighbourhood(&abs, liftered, k as f64, sign);
    let echo_at = 1.5 * (w.low_index + k) as f64 - w.low_index as f64;
    if echo_at.round() < abs.len() as f64 - 1.0 && neighbourhood(&abs, liftered, echo_at, sign) >= RAHMONIC_GATE * own {
        return None;
    }
    let (ym, y0, yp) = (abs[k - 1], abs[k], abs[k + 1]);
    let curvature = ym - 2.0 * y0 + yp;
    let offset = if curvature < 0.0 { (0.5 * (ym - yp) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
    Some(PeakEstimate {
        quefrency: ((w.low_index + k) as f64 + offset) * quefrency_step,
        peak_value: liftered[k],
        prominence: top / med.max(f64::MIN_POSITIVE),
    })
}

/// Inverts `sqrt(r^2 + (zr + zs)^2) - sqrt(r^2 + (zr - zs)^2) = c * tau` by
/// bisection to 0.01 m.
pub fn tdoa_to_range(tau: f64, g: &RangingGeometry) -> Result<f64> {
    g.validate()?;
    let tau_max = g.tau_max();
    if !(tau > 0.0 && tau <= tau_max) {
        return Err(Error::OutOfGeometry { tau, tau_max });
    }
    if tau == tau_max {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while g.tdoa(hi) > tau {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::OutOfGeometry { tau, tau_max });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 0.005 {
        let mid = 0.5 * (lo + hi);
        if g.tdoa(mid) > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sliding median over the detected entries only; `None` entries pass
/// through and do not count towards the window.
pub fn median_smooth(values: &[Option<f64>], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("median window {window} must be odd")));
    }
    let detected: Vec<f64> = values.iter().flatten().copied().collect();
    let half = window / 2;
    let mut smoothed = (0..detected.len()).map(|i| {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(detected.len());
        median(&mut detected[lo..hi].to_vec())
    });
    Ok(values.iter().map(|v| v.and_then(|_| smoothed.next())).collect())
}

/// Per-frame peak pick and inversion followed by median smoothing. A peak
/// outside the geometry counts as no detection.
pub fn track_ranges(
    frames: &[Vec<f64>],
    w: LifterWindow,
    quefrency_step: f64,
    g: &RangingGeometry,
    min_prominence: f64,
    median_window: usize,
) -> Result<Vec<Option<f64>>> {
    g.validate()?;
    let raw: Vec<Option<f64>> = frames.iter().map(|c| estimate_range(c, w, quefrency_step, g, min_prominence)).collect();
    median_smooth(&raw, median_window)
}

/// Single-frame range: peak pick then inversion, `None` when either fails.
pub fn estimate_range(
    liftered: &[f64],
    w: LifterWindow,
    quefrency_step: f64,
    g: &RangingGeometry,
    min_prominence: f64,
) -> Option<f64> {
    pick_peak(liftered, w, quefrency_step, min_prominence).and_then(|p| tdoa_to_range(p.quefrency, g).ok())
}
