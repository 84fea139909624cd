use super::environment::Environment;
use crate::error::{Error, Result};

/// Geometry, kinematics and sampling for one simulated transit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub environment: Environment,
    pub source_depth: f64,
    pub start_range: f64,
    pub end_range: f64,
    pub speed: f64,
    /// Lateral distance at the closest point of approach.
    pub cpa_offset: f64,
    /// Ground-truth logging interval in seconds.
    pub track_interval: f64,
    pub sample_rate: f64,
    pub max_reflection_order: u32,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            environment: Environment::default(),
            source_depth: 1.0,
            start_range: 500.0,
            end_range: 500.0,
            speed: 5.0,
            cpa_offset: 10.0,
            track_interval: 0.1,
            sample_rate: 250_000.0,
            max_reflection_order: 2,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.source_depth > 0.0 && self.source_depth < self.environment.water_depth) {
            return bad(format!("source_depth {} must lie in (0, water_depth)", self.source_depth));
        }
        if !(self.start_range > 0.0 && self.end_range > 0.0) {
            return bad("start_range and end_range must be > 0".into());
        }
        if !(self.speed > 0.0) {
            return bad(format!("speed {} must be > 0", self.speed));
        }
        if !(self.cpa_offset >= 0.0) {
            return bad(format!("cpa_offset {} must be >= 0", self.cpa_offset));
        }
        if self.start_range < self.cpa_offset || self.end_range < self.cpa_offset {
            return bad(format!(
                "start/end ranges ({}, {}) must be >= cpa_offset {}",
                self.start_range, self.end_range, self.cpa_offset
            ));
        }
        if !(self.track_interval > 0.0) {
            return bad(format!("track_interval {} must be > 0", self.track_interval));
        }
        if !(self.sample_rate > 0.0) {
            return bad(format!("sample_rate {} must be > 0", self.sample_rate));
        }
        Ok(())
    }
}

/// Ground-truth positions of the source, one entry per logging interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitTrack {
    pub timestamps: Vec<f64>,
    pub slant_ranges: Vec<f64>,
    pub horizontal_ranges: Vec<f64>,
    pub interval: f64,
}

impl TransitTrack {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Entry governing time `t` (each entry holds for one interval).
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.interval).floor().max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    /// Track holding a single fixed horizontal range for `points` intervals.
    pub fn stationary(horizontal_range: f64, vertical_offset: f64, points: usize, interval: f64) -> Self {
        Self {
            timestamps: (0..points).map(|i| i as f64 * interval).collect(),
            slant_ranges: vec![horizontal_range.hypot(vertical_offset); points],
            horizontal_ranges: vec![horizontal_range; points],
            interval,
        }
    }
}

/// Straight, constant-speed pass over the receiver: the horizontal range
/// falls from `start_range` to `cpa_offset` and rises to `end_range`.
pub fn make_transit_track(cfg: &ScenarioConfig) -> Result<TransitTrack> {
    cfg.validate()?;
    let cpa2 = cfg.cpa_offset * cfg.cpa_offset;
    let x_start = -(cfg.start_range * cfg.start_range - cpa2).sqrt();
    let x_end = (cfg.end_range * cfg.end_range - cpa2).sqrt();
    let duration = (x_end - x_start) / cfg.speed;
    // Tolerate rounding so an exact multiple of the interval keeps its endpoint.
    let points = (duration / cfg.track_interval + 1e-9).floor() as usize + 1;
    let vertical = cfg.environment.receiver_depth() - cfg.source_depth;

    let mut track = TransitTrack {
        timestamps: Vec::with_capacity(points),
        slant_ranges: Vec::with_capacity(points),
        horizontal_ranges: Vec::with_capacity(points),
        interval: cfg.track_interval,
    };
    for i in 0..points {
        let t = i as f64 * cfg.track_interval;
        let x = x_start + cfg.speed * t;
        let horizontal = x.hypot(cfg.cpa_offset);
        track.timestamps.push(t);
        track.horizontal_ranges.push(horizontal);
        track.slant_ranges.push(horizontal.hypot(vertical));
    }
    Ok(track)
}
