use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Split, Stream};
use crate::acoustics::{
    ambient_psd, make_transit_track, propagate, required_source_len, snr_gain, source_signal_samples, ShapingFilter, SourceKind,
    TransitTrack,
};
use crate::augment::{augment_snr, estimate_psd, stream_seed, PsdModel};
use crate::dsp::cepstrogram;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const PSD_FILE: &str = "background.psdm";
const MANIFEST_HEADER: &str = "name,kind,split,source,samples,sample_rate";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingKind {
    Transit,
    Background,
}

impl RecordingKind {
    fn name(self) -> &'static str {
        match self {
            RecordingKind::Transit => "transit",
            RecordingKind::Background => "background",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub name: String,
    pub kind: RecordingKind,
    pub split: Split,
    /// Vessel type for transits.
    pub source: Option<SourceKind>,
    pub samples: usize,
}

impl Recording {
    pub fn audio_file(&self) -> String {
        format!("{}.tser", self.name)
    }

    pub fn track_file(&self) -> String {
        format!("{}.track.csv", self.name)
    }
}

/// Index of a simulated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub sample_rate: f64,
    pub recordings: Vec<Recording>,
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = format!("{MANIFEST_HEADER}\n");
        for r in &self.recordings {
            let source = r.source.map(|s| s.to_string()).unwrap_or_default();
            writeln!(text, "{},{},{},{},{},{}", r.name, r.kind.name(), r.split.name(), source, r.samples, self.sample_rate).unwrap();
        }
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Format(format!("cannot read corpus manifest {}: {e}", path.display())))?;
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(Error::Format("corpus manifest has an unexpected header".into()));
        }
        let mut recordings = Vec::new();
        let mut sample_rate = None;
        for (i, line) in lines.enumerate() {
            let bad = |what: &str| Error::Format(format!("manifest line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad("field count"));
            }
            let kind = match f[1] {
                "transit" => RecordingKind::Transit,
                "background" => RecordingKind::Background,
                _ => return Err(bad("kind")),
            };
            let source = if f[3].is_empty() { None } else { Some(f[3].parse::<SourceKind>()?) };
            let fs: f64 = f[5].parse().map_err(|_| bad("sample_rate"))?;
            if sample_rate.is_some_and(|s| s != fs) {
                return Err(bad("sample_rate (recordings disagree)"));
            }
            sample_rate = Some(fs);
            recordings.push(Recording {
                name: f[0].to_string(),
                kind,
                split: Split::parse(f[2])?,
                source,
                samples: f[4].parse().map_err(|_| bad("samples"))?,
            });
        }
        let sample_rate = sample_rate.ok_or_else(|| Error::Format("corpus manifest lists no recordings".into()))?;
        Ok(Self { sample_rate, recordings })
    }

    pub fn of(&self, kind: RecordingKind, split: Split) -> impl Iterator<Item = (usize, &Recording)> {
        self.recordings.iter().enumerate().filter(move |(_, r)| r.kind == kind && r.split == split)
    }
}

pub fn write_track(path: &Path, track: &TransitTrack) -> Result<()> {
    let mut text = String::from("time,horizontal_range,slant_range\n");
    for i in 0..track.len() {
        writeln!(text, "{},{},{}", track.timestamps[i], track.horizontal_ranges[i], track.slant_ranges[i]).unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_track(path: &Path, interval: f64) -> Result<TransitTrack> {
    let text = fs::read_to_string(path)?;
    let mut track = TransitTrack { timestamps: vec![], slant_ranges: vec![], horizontal_ranges: vec![], interval };
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("{} line {}: not numeric", path.display(), i + 1)))?;
        if f.len() != 3 {
            return Err(Error::Format(format!("{} line {}: expected 3 fields", path.display(), i + 1)));
        }
        track.timestamps.push(f[0]);
        track.horizontal_ranges.push(f[1]);
        track.slant_ranges.push(f[2]);
    }
    if track.is_empty() {
        return Err(Error::Format(format!("{} holds no track points", path.display())));
    }
    Ok(track)
}

fn ambient(len: usize, sample_rate: f64, seed: u64) -> Vec<f64> {
    ShapingFilter::design(ambient_psd, sample_rate).shaped_noise(len, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// One transit with ambient noise scaled so the first segment (the far end
/// of the track) sits at the configured recording SNR.
pub fn simulate_transit(cfg: &ExperimentConfig, kind: SourceKind, seed: u64) -> Result<(TimeSeries, TransitTrack)> {
    let sc = crate::acoustics::ScenarioConfig { seed, ..cfg.scenario.clone() };
    let track = make_transit_track(&sc)?;
    let fs = sc.sample_rate;
    let need = required_source_len(&track, &sc.environment, sc.source_depth, sc.max_reflection_order, fs)?;
    let source = source_signal_samples(kind, need, fs, stream_seed(seed, 0))?;
    let clean = propagate(&track, &source, &sc.environment, sc.source_depth, sc.max_reflection_order)?;
    drop(source);
    let noise = TimeSeries::new(ambient(clean.len(), fs, stream_seed(seed, 1)), fs)?;
    let head = cfg.segment_samples().min(clean.len());
    let g = snr_gain(&clean.slice(0, head)?, &noise.slice(0, head)?, cfg.recording_snr_db)?;
    let samples = clean.samples.iter().zip(&noise.samples).map(|(s, n)| s + g * n).collect();
    Ok((TimeSeries::new(samples, fs)?, track))
}

pub fn simulate_background(cfg: &ExperimentConfig, len: usize, seed: u64) -> Result<TimeSeries> {
    TimeSeries::new(ambient(len, cfg.sample_rate(), seed), cfg.sample_rate())
}

/// Writes every transit (with its ground-truth track) and background
/// recording of every split, the background PSD model used for
/// augmentation (estimated from the first training background) and the
/// manifest. Generalization transits use the second vessel type.
pub fn simulate_corpus(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut recordings = Vec::new();
    let mut transit_len = None;
    for split in Split::ALL {
        let kind = if split == Split::Generalization { SourceKind::B } else { SourceKind::A };
        for i in 0..cfg.transits.get(split) {
            let (audio, track) = simulate_transit(cfg, kind, cfg.derive(Stream::Transit(split, i)))?;
            let rec = Recording {
                name: format!("transit_{}_{i:02}", split.name()),
                kind: RecordingKind::Transit,
                split,
                source: Some(kind),
                samples: audio.len(),
            };
            audio.save(&dir.join(rec.audio_file()))?;
            write_track(&dir.join(rec.track_file()), &track)?;
            transit_len = Some(audio.len());
            recordings.push(rec);
        }
    }
    let len = transit_len.ok_or_else(|| Error::InvalidConfig("no transits configured".into()))?;
    for split in Split::ALL {
        for i in 0..cfg.transits.get(split) {
            let audio = simulate_background(cfg, len, cfg.derive(Stream::Background(split, i)))?;
            if split == Split::Train && i == 0 {
                estimate_psd(&audio, cfg.psd_window)?.save(&dir.join(PSD_FILE))?;
            }
            let rec = Recording {
                name: format!("background_{}_{i:02}", split.name()),
                kind: RecordingKind::Background,
                split,
                source: None,
                samples: audio.len(),
            };
            audio.save(&dir.join(rec.audio_file()))?;
            recordings.push(rec);
        }
    }
    let manifest = Manifest { sample_rate: cfg.sample_rate(), recordings };
    manifest.save(dir)?;
    Ok(manifest)
}

pub fn load_psd(dir: &Path) -> Result<PsdModel> {
    PsdModel::load(&dir.join(PSD_FILE))
}

/// A segment of a corpus recording with its label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRef {
    pub recording: usize,
    pub start: usize,
    /// Segment midpoint, seconds from the start of the recording.
    pub mid_time: f64,
    /// Horizontal range at the midpoint; `None` for background.
    pub range: Option<f64>,
}

/// Every segment start of a recording, labeled from its track (transits)
/// or as absent (background).
pub fn segments_of(cfg: &ExperimentConfig, index: usize, rec: &Recording, track: Option<&TransitTrack>) -> Vec<SegmentRef> {
    let (seg, hop, fs) = (cfg.segment_samples(), cfg.hop_samples(), cfg.sample_rate());
    let mut out = Vec::new();
    let mut start = 0;
    while start + seg <= rec.samples {
        let mid_time = (start as f64 + seg as f64 / 2.0) / fs;
        let range = track.map(|t| t.horizontal_ranges[t.index_at(mid_time)]);
        out.push(SegmentRef { recording: index, start, mid_time, range });
        start += hop;
    }
    out
}

pub fn load_track(cfg: &ExperimentConfig, dir: &Path, rec: &Recording) -> Result<TransitTrack> {
    read_track(&dir.join(rec.track_file()), cfg.scenario.track_interval)
}

fn check_rate(cfg: &ExperimentConfig, manifest: &Manifest) -> Result<()> {
    if manifest.sample_rate != cfg.sample_rate() {
        return Err(Error::InvalidConfig(format!(
            "corpus was simulated at {} Hz but the configuration says {} Hz",
            manifest.sample_rate,
            cfg.sample_rate()
        )));
    }
    Ok(())
}

/// Balanced example draw for `split`: `ceil(size / 2)` transit segments
/// and `floor(size / 2)` background segments, sampled without replacement
/// and returned in recording order.
pub fn select_examples(cfg: &ExperimentConfig, dir: &Path, manifest: &Manifest, split: Split) -> Result<Vec<SegmentRef>> {
    check_rate(cfg, manifest)?;
    let size = cfg.examples.get(split);
    let (need_present, need_absent) = (size - size / 2, size / 2);
    let mut present = Vec::new();
    for (i, rec) in manifest.of(RecordingKind::Transit, split) {
        present.extend(segments_of(cfg, i, rec, Some(&load_track(cfg, dir, rec)?)));
    }
    let mut absent = Vec::new();
    for (i, rec) in manifest.of(RecordingKind::Background, split) {
        absent.extend(segments_of(cfg, i, rec, None));
    }
    if present.len() < need_present || absent.len() < need_absent {
        return Err(Error::SignalTooShort { needed: size, available: present.len().min(absent.len()) * 2 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.derive(Stream::Selection(split)));
    present.shuffle(&mut rng);
    absent.shuffle(&mut rng);
    let mut chosen: Vec<SegmentRef> = present.into_iter().take(need_present).chain(absent.into_iter().take(need_absent)).collect();
    chosen.sort_by_key(|s| (s.recording, s.start));
    Ok(chosen)
}

/// Noise applied to raw audio before featurization.
#[derive(Debug, Clone, Copy)]
pub struct Augmentation<'a> {
    pub psd: &'a PsdModel,
    pub snr_range_db: [f64; 2],
    /// Per-example seeds are derived from this and the example id.
    pub seed: u64,
}

/// Width-`n` features of `refs` (example id = position), loading each
/// recording once.
pub fn extract_features(
    cfg: &ExperimentConfig,
    dir: &Path,
    manifest: &Manifest,
    refs: &[SegmentRef],
    n: usize,
    augmentation: Option<Augmentation<'_>>,
) -> Result<Vec<Vec<f64>>> {
    let seg = cfg.segment_samples();
    let mut out = vec![Vec::new(); refs.len()];
    let mut order: Vec<usize> = (0..refs.len()).collect();
    order.sort_by_key(|&i| (refs[i].recording, refs[i].start));
    let mut loaded: Option<(usize, TimeSeries)> = None;
    for i in order {
        let r = refs[i];
        if loaded.as_ref().map(|l| l.0) != Some(r.recording) {
            let rec = manifest
                .recordings
                .get(r.recording)
                .ok_or_else(|| Error::Format(format!("segment refers to missing recording {}", r.recording)))?;
            let audio = TimeSeries::load(&dir.join(rec.audio_file()))?;
            if audio.len() != rec.samples {
                return Err(Error::Format(format!("{} has {} samples, manifest says {}", rec.name, audio.len(), rec.samples)));
            }
            loaded = Some((r.recording, audio));
        }
        let audio = &loaded.as_ref().expect("loaded above").1;
        let mut x = audio.slice(r.start, seg)?;
        if let Some(a) = augmentation {
            x = augment_snr(&x, a.psd, a.snr_range_db, stream_seed(a.seed, i as u64))?.0;
        }
        out[i] = cepstrogram(&x, n, cfg.lifter, &cfg.spectral)?.values;
    }
    Ok(out)
}

/// Sidecar linking each example id to its recording, offset and label.
pub fn index_text(manifest: &Manifest, refs: &[SegmentRef]) -> String {
    let mut text = String::from("example_id,recording,start_sample,mid_time,range\n");
    for (i, r) in refs.iter().enumerate() {
        let range = r.range.map(|v| v.to_string()).unwrap_or_default();
        writeln!(text, "{i},{},{},{},{range}", manifest.recordings[r.recording].name, r.start, r.mid_time).unwrap();
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::tiny_config;

    #[test]
    fn corpus_counts_and_determinism() {
        let cfg = tiny_config();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m = simulate_corpus(&cfg, d1.path()).unwrap();
        simulate_corpus(&cfg, d2.path()).unwrap();
        assert_eq!(m.recordings.len(), 8);
        assert_eq!(m.of(RecordingKind::Transit, Split::Generalization).next().unwrap().1.source, Some(SourceKind::B));
        assert_eq!(m.of(RecordingKind::Transit, Split::Train).next().unwrap().1.source, Some(SourceKind::A));
        assert_eq!(Manifest::load(d1.path()).unwrap(), m);
        for r in &m.recordings {
            let a = fs::read(d1.path().join(r.audio_file())).unwrap();
            assert_eq!(a, fs::read(d2.path().join(r.audio_file())).unwrap(), "{}", r.name);
        }
        assert!(load_psd(d1.path()).is_ok());
    }

    #[test]
    fn selection_is_balanced_and_traceable() {
        let cfg = tiny_config();
        let d = tempfile::tempdir().unwrap();
        let m = simulate_corpus(&cfg, d.path()).unwrap();
        let refs = select_examples(&cfg, d.path(), &m, Split::Train).unwrap();
        assert_eq!(refs.len(), 8);
        assert_eq!(refs.iter().filter(|r| r.range.is_some()).count(), 4);
        let track = load_track(&cfg, d.path(), &m.recordings[0]).unwrap();
        for r in refs.iter().filter(|r| r.range.is_some()) {
            assert_eq!(m.recordings[r.recording].split, Split::Train);
            assert_eq!(r.range, Some(track.horizontal_ranges[track.index_at(r.mid_time)]));
        }
        assert_eq!(refs, select_examples(&cfg, d.path(), &m, Split::Train).unwrap());
        let feats = extract_features(&cfg, d.path(), &m, &refs, 2, None).unwrap();
        assert!(feats.iter().all(|f| f.len() == cfg.lifter.len() * 2));
    }
}
