//! Experiment configuration.
//!
//! Every key is optional; missing keys take the defaults below. Keys may be
//! grouped under `[section]` headers (see [`crate::config`]).
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `seed` | 1 | root of every derived seed |
//! | `scenario.water_depth` | 30 | m |
//! | `scenario.sound_speed` | 1500 | m/s |
//! | `scenario.receiver_height` | 1 | hydrophone height above the bottom, m |
//! | `scenario.surface_coeff` | -1 | surface reflection coefficient |
//! | `scenario.bottom_coeff` | 0.5 | bottom reflection coefficient |
//! | `scenario.source_depth` | 1 | m |
//! | `scenario.start_range`, `scenario.end_range` | 500 | m |
//! | `scenario.speed` | 5 | m/s |
//! | `scenario.cpa_offset` | 10 | m |
//! | `scenario.track_interval` | 0.1 | ground-truth logging interval, s |
//! | `scenario.sample_rate` | 250000 | Hz |
//! | `scenario.max_reflection_order` | 2 | |
//! | `recording.snr_db` | 20 | ambient-noise SNR over the first segment of each transit |
//! | `spectral.window_length` | 8192 | samples |
//! | `spectral.overlap` | 0.5 | |
//! | `spectral.floor_epsilon` | 1e-12 | log floor relative to the largest bin |
//! | `spectral.line_half_width` | 16 | bins either side for tonal-line suppression; 0 turns it off |
//! | `spectral.line_threshold_db` | 6 | excess over the local median that marks a line |
//! | `lifter.low_index`, `lifter.high_index` | 84 µs, 1.4 ms | quefrency indices |
//! | `segment.duration`, `segment.hop` | 1.0, 0.5 | s |
//! | `transits.{train,val,test,generalization}` | 6, 2, 2, 2 | recordings per split |
//! | `examples.{train,val,test,generalization}` | 4000, 1000, 800, 800 | examples per split, half with a vessel |
//! | `augment.snr_low`, `augment.snr_high` | -10, 50 | dB |
//! | `augment.psd_window` | 8192 | samples |
//! | `model.conv_filters` | 48 | |
//! | `model.kernel_height` | 10 | |
//! | `model.hidden_units` | 200 | |
//! | `model.dropout_rate` | 0.5 | |
//! | `model.range_scale` | largest transit range | m per normalized range unit |
//! | `train.*` | see below | shared by both phases |
//! | `phase1.*`, `phase2.*` | | per-phase overrides of `train.*` |
//! | `sweep.snr_db` | -10,0,10,20,30,40,50,60 | comma list |
//! | `report.bin_edges` | 0,50,...,500 | comma list, m |
//! | `baseline.min_prominence` | 6 | |
//! | `baseline.median_window` | 5 | odd |
//!
//! Training keys: `learning_rate` (0.003), `weight_decay` (5e-4), `momentum`
//! (0.9), `batch_size` (32), `alpha` (0 then 0.99), `patience` (5),
//! `min_rel_improvement` (1e-3), `max_epochs` (12), `random_flip` (true).

use std::collections::BTreeSet;
use std::path::Path;

use crate::acoustics::{Environment, ScenarioConfig};
use crate::augment::{stream_seed, AUGMENT_SNR_RANGE};
use crate::baseline::{RangingGeometry, DEFAULT_MEDIAN_WINDOW, DEFAULT_MIN_PROMINENCE};
use crate::config::KvConfig;
use crate::dsp::{LifterWindow, LineSuppression, SpectralParams};
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, TrainConfig};

/// Dataset partitions. Splits are per recording, so overlapping segments
/// never cross a split boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
    Generalization,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::Test, Split::Generalization];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Generalization => "gen",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown split {s:?}")))
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub generalization: usize,
}

impl SplitCounts {
    pub fn get(&self, s: Split) -> usize {
        match s {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
            Split::Generalization => self.generalization,
        }
    }
}

/// One of the four trained networks: cepstrum width and augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variant {
    pub n: usize,
    pub augment: bool,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant { n: 1, augment: false },
        Variant { n: 1, augment: true },
        Variant { n: 8, augment: false },
        Variant { n: 8, augment: true },
    ];

    /// `n1`/`n8` and `on`/`off`, as on the command line.
    pub fn parse(width: &str, augment: &str) -> Result<Self> {
        let n = match width {
            "n1" => 1,
            "n8" => 8,
            _ => return Err(Error::InvalidArgument(format!("variant {width:?} must be n1 or n8"))),
        };
        let augment = match augment {
            "on" => true,
            "off" => false,
            _ => return Err(Error::InvalidArgument(format!("augment {augment:?} must be on or off"))),
        };
        Ok(Self { n, augment })
    }

    pub fn tag(self) -> String {
        format!("n{}_{}", self.n, if self.augment { "aug" } else { "noaug" })
    }

    fn index(self) -> u64 {
        (self.n as u64) * 2 + u64::from(self.augment)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub recording_snr_db: f64,
    pub spectral: SpectralParams,
    pub lifter: LifterWindow,
    pub segment_duration: f64,
    pub segment_hop: f64,
    pub transits: SplitCounts,
    pub examples: SplitCounts,
    pub augment_snr_db: [f64; 2],
    pub psd_window: usize,
    pub conv_filters: usize,
    pub kernel_height: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub range_scale: f64,
    pub phases: [TrainConfig; 2],
    pub sweep_snr_db: Vec<f64>,
    pub bin_edges: Vec<f64>,
    pub baseline_min_prominence: f64,
    pub baseline_median_window: usize,
}

const TRAIN_FIELDS: [&str; 9] = [
    "learning_rate",
    "weight_decay",
    "momentum",
    "batch_size",
    "alpha",
    "patience",
    "min_rel_improvement",
    "max_epochs",
    "random_flip",
];

const KEYS: [&str; 44] = [
    "seed",
    "scenario.water_depth",
    "scenario.sound_speed",
    "scenario.receiver_height",
    "scenario.surface_coeff",
    "scenario.bottom_coeff",
    "scenario.source_depth",
    "scenario.start_range",
    "scenario.end_range",
    "scenario.speed",
    "scenario.cpa_offset",
    "scenario.track_interval",
    "scenario.sample_rate",
    "scenario.max_reflection_order",
    "recording.snr_db",
    "spectral.window_length",
    "spectral.overlap",
    "spectral.floor_epsilon",
    "spectral.line_half_width",
    "spectral.line_threshold_db",
    "lifter.low_index",
    "lifter.high_index",
    "segment.duration",
    "segment.hop",
    "transits.train",
    "transits.val",
    "transits.test",
    "transits.generalization",
    "examples.train",
    "examples.val",
    "examples.test",
    "examples.generalization",
    "augment.snr_low",
    "augment.snr_high",
    "augment.psd_window",
    "model.conv_filters",
    "model.kernel_height",
    "model.hidden_units",
    "model.dropout_rate",
    "model.range_scale",
    "sweep.snr_db",
    "report.bin_edges",
    "baseline.min_prominence",
    "baseline.median_window",
];

fn parse_list(kv: &KvConfig, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
    match kv.raw(key) {
        None => Ok(default),
        Some(text) => text
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("cannot parse `{key} = {text}`"))))
            .collect(),
    }
}

fn list_text(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_kv(&KvConfig::default()).expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let mut known: BTreeSet<String> = KEYS.iter().map(|k| k.to_string()).collect();
        for prefix in ["train", "phase1", "phase2"] {
            known.extend(TRAIN_FIELDS.iter().map(|f| format!("{prefix}.{f}")));
        }
        kv.check_known(&known.iter().map(String::as_str).collect())?;

        let env_default = Environment::default();
        let sc_default = ScenarioConfig::default();
        let environment = Environment {
            water_depth: kv.get_or("scenario.water_depth", env_default.water_depth)?,
            sound_speed: kv.get_or("scenario.sound_speed", env_default.sound_speed)?,
            receiver_height_above_bottom: kv.get_or("scenario.receiver_height", env_default.receiver_height_above_bottom)?,
            surface_reflection_coeff: kv.get_or("scenario.surface_coeff", env_default.surface_reflection_coeff)?,
            bottom_reflection_coeff: kv.get_or("scenario.bottom_coeff", env_default.bottom_reflection_coeff)?,
        };
        let seed = kv.get_or("seed", 1u64)?;
        let scenario = ScenarioConfig {
            environment,
            source_depth: kv.get_or("scenario.source_depth", sc_default.source_depth)?,
            start_range: kv.get_or("scenario.start_range", sc_default.start_range)?,
            end_range: kv.get_or("scenario.end_range", sc_default.end_range)?,
            speed: kv.get_or("scenario.speed", sc_default.speed)?,
            cpa_offset: kv.get_or("scenario.cpa_offset", sc_default.cpa_offset)?,
            track_interval: kv.get_or("scenario.track_interval", sc_default.track_interval)?,
            sample_rate: kv.get_or("scenario.sample_rate", sc_default.sample_rate)?,
            max_reflection_order: kv.get_or("scenario.max_reflection_order", sc_default.max_reflection_order)?,
            seed,
        };
        scenario.validate()?;
        let fs = scenario.sample_rate;
        let sp_default = SpectralParams::default();
        let spectral = SpectralParams {
            window_length: kv.get_or("spectral.window_length", sp_default.window_length)?,
            overlap_fraction: kv.get_or("spectral.overlap", sp_default.overlap_fraction)?,
            floor_epsilon: kv.get_or("spectral.floor_epsilon", sp_default.floor_epsilon)?,
            lines: {
                let d = LineSuppression::default();
                let half_width = kv.get_or("spectral.line_half_width", d.half_width)?;
                let threshold_db = kv.get_or("spectral.line_threshold_db", d.threshold_db)?;
                (half_width > 0).then_some(LineSuppression { half_width, threshold_db })
            },
        };
        let ranging = LifterWindow::ranging(fs)?;
        let lifter = LifterWindow::new(
            kv.get_or("lifter.low_index", ranging.low_index)?,
            kv.get_or("lifter.high_index", ranging.high_index)?,
        )?;
        let counts = |group: &str, d: [usize; 4]| -> Result<SplitCounts> {
            Ok(SplitCounts {
                train: kv.get_or(&format!("{group}.train"), d[0])?,
                val: kv.get_or(&format!("{group}.val"), d[1])?,
                test: kv.get_or(&format!("{group}.test"), d[2])?,
                generalization: kv.get_or(&format!("{group}.generalization"), d[3])?,
            })
        };

        let train_default = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 32,
            max_epochs: 12,
            random_flip: true,
            ..TrainConfig::default()
        };
        let mut phases = [TrainConfig { alpha: 0.0, ..train_default }, TrainConfig { alpha: 0.99, ..train_default }];
        for (i, phase) in phases.iter_mut().enumerate() {
            let key = |f: &str| format!("phase{}.{f}", i + 1);
            let shared = |f: &str| format!("train.{f}");
            macro_rules! field {
                ($name:ident) => {{
                    let f = stringify!($name);
                    let base = kv.get_or(&shared(f), phase.$name)?;
                    phase.$name = kv.get_or(&key(f), base)?;
                }};
            }
            field!(learning_rate);
            field!(weight_decay);
            field!(momentum);
            field!(batch_size);
            field!(patience);
            field!(min_rel_improvement);
            field!(max_epochs);
            // Each phase keeps its own alpha unless overridden per phase.
            phase.alpha = kv.get_or(&key("alpha"), phase.alpha)?;
            let flip = kv.get_bool_or(&shared("random_flip"), phase.random_flip)?;
            phase.random_flip = kv.get_bool_or(&key("random_flip"), flip)?;
        }
        if kv.raw("train.alpha").is_some() {
            return Err(Error::InvalidConfig("alpha is per phase: use phase1.alpha / phase2.alpha".into()));
        }

        let max_range = scenario.start_range.max(scenario.end_range);
        let cfg = Self {
            seed,
            scenario,
            recording_snr_db: kv.get_or("recording.snr_db", 20.0)?,
            spectral,
            lifter,
            segment_duration: kv.get_or("segment.duration", 1.0)?,
            segment_hop: kv.get_or("segment.hop", 0.5)?,
            transits: counts("transits", [6, 2, 2, 2])?,
            examples: counts("examples", [4000, 1000, 800, 800])?,
            augment_snr_db: [
                kv.get_or("augment.snr_low", AUGMENT_SNR_RANGE[0])?,
                kv.get_or("augment.snr_high", AUGMENT_SNR_RANGE[1])?,
            ],
            psd_window: kv.get_or("augment.psd_window", 8192)?,
            conv_filters: kv.get_or("model.conv_filters", 48)?,
            kernel_height: kv.get_or("model.kernel_height", 10)?,
            hidden_units: kv.get_or("model.hidden_units", 200)?,
            dropout_rate: kv.get_or("model.dropout_rate", 0.5)?,
            range_scale: kv.get_or("model.range_scale", max_range)?,
            phases,
            sweep_snr_db: parse_list(kv, "sweep.snr_db", vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0])?,
            bin_edges: parse_list(kv, "report.bin_edges", (0..=10).map(|i| i as f64 * max_range / 10.0).collect())?,
            baseline_min_prominence: kv.get_or("baseline.min_prominence", DEFAULT_MIN_PROMINENCE)?,
            baseline_median_window: kv.get_or("baseline.median_window", DEFAULT_MEDIAN_WINDOW)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvConfig::load(path)?)
    }

    /// Every setting as explicit keys; parsing the result gives `self` back.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::default();
        let s = &self.scenario;
        let e = &s.environment;
        kv.set("seed", self.seed);
        kv.set("scenario.water_depth", e.water_depth);
        kv.set("scenario.sound_speed", e.sound_speed);
        kv.set("scenario.receiver_height", e.receiver_height_above_bottom);
        kv.set("scenario.surface_coeff", e.surface_reflection_coeff);
        kv.set("scenario.bottom_coeff", e.bottom_reflection_coeff);
        kv.set("scenario.source_depth", s.source_depth);
        kv.set("scenario.start_range", s.start_range);
        kv.set("scenario.end_range", s.end_range);
        kv.set("scenario.speed", s.speed);
        kv.set("scenario.cpa_offset", s.cpa_offset);
        kv.set("scenario.track_interval", s.track_interval);
        kv.set("scenario.sample_rate", s.sample_rate);
        kv.set("scenario.max_reflection_order", s.max_reflection_order);
        kv.set("recording.snr_db", self.recording_snr_db);
        kv.set("spectral.window_length", self.spectral.window_length);
        kv.set("spectral.overlap", self.spectral.overlap_fraction);
        kv.set("spectral.floor_epsilon", self.spectral.floor_epsilon);
        let lines = self.spectral.lines.unwrap_or(LineSuppression { half_width: 0, ..Default::default() });
        kv.set("spectral.line_half_width", lines.half_width);
        kv.set("spectral.line_threshold_db", lines.threshold_db);
        kv.set("lifter.low_index", self.lifter.low_index);
        kv.set("lifter.high_index", self.lifter.high_index);
        kv.set("segment.duration", self.segment_duration);
        kv.set("segment.hop", self.segment_hop);
        for (group, c) in [("transits", self.transits), ("examples", self.examples)] {
            kv.set(&format!("{group}.train"), c.train);
            kv.set(&format!("{group}.val"), c.val);
            kv.set(&format!("{group}.test"), c.test);
            kv.set(&format!("{group}.generalization"), c.generalization);
        }
        kv.set("augment.snr_low", self.augment_snr_db[0]);
        kv.set("augment.snr_high", self.augment_snr_db[1]);
        kv.set("augment.psd_window", self.psd_window);
        kv.set("model.conv_filters", self.conv_filters);
        kv.set("model.kernel_height", self.kernel_height);
        kv.set("model.hidden_units", self.hidden_units);
        kv.set("model.dropout_rate", self.dropout_rate);
        kv.set("model.range_scale", self.range_scale);
        for (i, p) in self.phases.iter().enumerate() {
            let k = |f: &str| format!("phase{}.{f}", i + 1);
            kv.set(&k("learning_rate"), p.learning_rate);
            kv.set(&k("weight_decay"), p.weight_decay);
            kv.set(&k("momentum"), p.momentum);
            kv.set(&k("batch_size"), p.batch_size);
            kv.set(&k("alpha"), p.alpha);
            kv.set(&k("patience"), p.patience);
            kv.set(&k("min_rel_improvement"), p.min_rel_improvement);
            kv.set(&k("max_epochs"), p.max_epochs);
            kv.set(&k("random_flip"), p.random_flip);
        }
        kv.set("sweep.snr_db", list_text(&self.sweep_snr_db));
        kv.set("report.bin_edges", list_text(&self.bin_edges));
        kv.set("baseline.min_prominence", self.baseline_min_prominence);
        kv.set("baseline.median_window", self.baseline_median_window);
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.scenario.validate()?;
        let seg = self.segment_samples();
        if !(self.segment_duration > 0.0 && self.segment_hop > 0.0) {
            return bad("segment duration and hop must be > 0".into());
        }
        if self.spectral.window_length * 8 > seg {
            return bad(format!(
                "spectral window {} must fit eight times in a {}-sample segment (n = 8 sections)",
                self.spectral.window_length, seg
            ));
        }
        if self.lifter.high_index >= self.spectral.window_length {
            return bad("lifter high index must lie below the spectral window length".into());
        }
        if let Some(l) = self.spectral.lines {
            if !(l.threshold_db > 0.0) || 2 * l.half_width + 1 > self.spectral.window_length {
                return bad(format!("line suppression {l:?} needs a positive threshold and a window inside the spectrum"));
            }
        }
        for s in Split::ALL {
            if self.transits.get(s) == 0 || self.examples.get(s) < 2 {
                return bad(format!("split {} needs at least one recording and two examples", s.name()));
            }
        }
        let [lo, hi] = self.augment_snr_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("augmentation SNR range [{lo}, {hi}] is invalid"));
        }
        if !self.recording_snr_db.is_finite() {
            return bad("recording SNR must be finite".into());
        }
        if self.sweep_snr_db.is_empty() || self.sweep_snr_db.iter().any(|v| !v.is_finite()) {
            return bad("sweep SNR list must be non-empty and finite".into());
        }
        if self.bin_edges.len() < 2 || self.bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return bad("report bin edges must be strictly increasing".into());
        }
        if self.baseline_median_window % 2 == 0 {
            return bad("baseline median window must be odd".into());
        }
        if self.psd_window < 2 || self.psd_window > seg {
            return bad(format!("PSD window {} must lie in [2, segment length]", self.psd_window));
        }
        for v in [1, 8] {
            self.model_config(v).validate()?;
        }
        for p in &self.phases {
            p.validate()?;
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.scenario.sample_rate
    }

    pub fn segment_samples(&self) -> usize {
        (self.segment_duration * self.scenario.sample_rate).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        ((self.segment_hop * self.scenario.sample_rate).round() as usize).max(1)
    }

    pub fn model_config(&self, n: usize) -> ModelConfig {
        ModelConfig {
            conv_filters: self.conv_filters,
            kernel_height: self.kernel_height,
            hidden_units: self.hidden_units,
            dropout_rate: self.dropout_rate,
            range_scale: self.range_scale,
            ..ModelConfig::new(self.lifter.len(), n)
        }
    }

    pub fn geometry(&self) -> RangingGeometry {
        RangingGeometry::from_environment(&self.scenario.environment, self.scenario.source_depth)
    }

    /// Range beyond which the surface TDOA falls below the lifter's low
    /// bound and the cepstral-peak method can no longer see it.
    pub fn far_field_threshold(&self) -> Result<f64> {
        self.geometry().threshold_range(self.lifter.low_index as f64 / self.sample_rate())
    }

    /// Phase settings for `v`, each phase with its own derived seed.
    pub fn phases_for(&self, v: Variant) -> Vec<TrainConfig> {
        self.phases
            .iter()
            .enumerate()
            .map(|(i, p)| TrainConfig { seed: self.derive(Stream::Phase(v, i)), ..*p })
            .collect()
    }

    pub fn derive(&self, stream: Stream) -> u64 {
        let id = match stream {
            Stream::Transit(s, i) => 1_000 + s.index() * 100 + i as u64,
            Stream::Background(s, i) => 2_000 + s.index() * 100 + i as u64,
            Stream::Selection(s) => 3_000 + s.index(),
            Stream::Augment(v) => 4_000 + v.index(),
            Stream::Init(v) => 5_000 + v.index(),
            Stream::Phase(v, i) => 6_000 + v.index() * 10 + i as u64,
            Stream::Sweep => 7_000,
        };
        stream_seed(self.seed, id)
    }
}

/// Independent random streams derived from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Transit(Split, usize),
    Background(Split, usize),
    Selection(Split),
    Augment(Variant),
    Init(Variant),
    Phase(Variant, usize),
    Sweep,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let c = ExperimentConfig::default();
        assert_eq!(c.lifter.len(), 330);
        assert_eq!(c.model_config(8).input_height, 330);
        assert_eq!(c.phases[0].alpha, 0.0);
        assert_eq!(c.phases[1].alpha, 0.99);
        assert_eq!(c.examples.train, 4000);
        assert_eq!(c.segment_samples(), 250_000);
        assert!((c.far_field_threshold().unwrap() - 459.4).abs() < 0.5);
    }

    #[test]
    fn text_round_trip() {
        let kv = KvConfig::parse("seed = 9\n[phase2]\nlearning_rate = 0.001\n[train]\nbatch_size = 16\n").unwrap();
        let c = ExperimentConfig::from_kv(&kv).unwrap();
        assert_eq!(c.phases[0].batch_size, 16);
        assert_eq!(c.phases[1].learning_rate, 0.001);
        assert_eq!(c.phases[0].learning_rate, 3e-3);
        let again = ExperimentConfig::from_kv(&KvConfig::parse(&c.to_kv().to_text()).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_typos_and_bad_values() {
        assert!(ExperimentConfig::from_kv(&KvConfig::parse("sead = 3").unwrap()).is_err());
        assert!(ExperimentConfig::from_kv(&KvConfig::parse("examples.test = 1").unwrap()).is_err());
        assert!(ExperimentConfig::from_kv(&KvConfig::parse("train.alpha = 0.5").unwrap()).is_err());
        assert!(ExperimentConfig::from_kv(&KvConfig::parse("sweep.snr_db = 1,x").unwrap()).is_err());
        assert!(ExperimentConfig::from_kv(&KvConfig::parse("baseline.median_window = 4").unwrap()).is_err());
    }

    #[test]
    fn variants_and_streams_are_distinct() {
        let c = ExperimentConfig::default();
        let tags: BTreeSet<String> = Variant::ALL.iter().map(|v| v.tag()).collect();
        assert_eq!(tags.len(), 4);
        let mut seeds = BTreeSet::new();
        for v in Variant::ALL {
            seeds.insert(c.derive(Stream::Init(v)));
            seeds.insert(c.derive(Stream::Augment(v)));
        }
        assert_eq!(seeds.len(), 8);
        assert_eq!(Variant::parse("n8", "on").unwrap(), Variant { n: 8, augment: true });
        assert!(Variant::parse("n4", "on").is_err());
    }
}
