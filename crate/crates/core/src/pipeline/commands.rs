use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Split, Stream, Variant};
use super::corpus::{
    extract_features, index_text, load_psd, load_track, segments_of, select_examples, simulate_corpus, Augmentation, Manifest,
    RecordingKind, SegmentRef,
};
use super::dataset::{DatasetFile, LabeledExample};
use crate::baseline::{estimate_range, median_smooth};
use crate::dsp::{fit_normalization, CepstrogramFeature};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_record, compare_report, load_records, network_record, save_records, snr_sweep, ErrorSummary, FeatureSettings,
    MethodSummary, PredictionRecord, RangeTrack, ReportInput, SweepMethod, SweepRow, SweepSegment, TrackPoint,
    DETECTION_THRESHOLD,
};
use crate::nn::{train, Checkpoint, Label, Sample, TrainLog};

pub const BASELINE_TAG: &str = "baseline";

/// Where each command reads and writes under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.txt")
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn dataset(&self, v: Variant, split: Split) -> PathBuf {
        self.root.join("features").join(v.tag()).join(format!("{}.ceps", split.name()))
    }

    pub fn dataset_index(&self, v: Variant, split: Split) -> PathBuf {
        self.root.join("features").join(v.tag()).join(format!("{}.index.csv", split.name()))
    }

    pub fn model(&self, v: Variant) -> PathBuf {
        self.root.join("models").join(format!("{}.cnnm", v.tag()))
    }

    pub fn train_log(&self, v: Variant) -> PathBuf {
        self.root.join("models").join(format!("{}.log.csv", v.tag()))
    }

    pub fn records_dir(&self) -> PathBuf {
        self.root.join("records")
    }

    pub fn records(&self, method: &str, split: Split) -> PathBuf {
        self.records_dir().join(format!("{method}.{}.csv", split.name()))
    }

    pub fn tracks_dir(&self) -> PathBuf {
        self.root.join("tracks")
    }

    pub fn track(&self, method: &str) -> PathBuf {
        self.tracks_dir().join(format!("{method}.csv"))
    }

    pub fn sweep(&self) -> PathBuf {
        self.root.join("sweep.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Splits whose predictions are reported.
pub const EVAL_SPLITS: [Split; 2] = [Split::Test, Split::Generalization];

/// Simulates the corpus and records the effective configuration.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let layout = Layout::new(out);
    fs::create_dir_all(out)?;
    fs::write(layout.config(), cfg.to_kv().to_text())?;
    simulate_corpus(cfg, &layout.corpus())
}

fn load_manifest(layout: &Layout) -> Result<Manifest> {
    Manifest::load(&layout.corpus())
}

/// Writes one dataset per split for variant `v`. Only the training split
/// is augmented, and only when `v.augment` is set.
pub fn cmd_featurize(cfg: &ExperimentConfig, out: &Path, v: Variant) -> Result<Vec<(Split, DatasetFile)>> {
    let layout = Layout::new(out);
    let corpus = layout.corpus();
    let manifest = load_manifest(&layout)?;
    let psd = if v.augment { Some(load_psd(&corpus)?) } else { None };
    let mut written = Vec::new();
    for split in Split::ALL {
        let refs = select_examples(cfg, &corpus, &manifest, split)?;
        let augmentation = match (&psd, split) {
            (Some(psd), Split::Train) => {
                Some(Augmentation { psd, snr_range_db: cfg.augment_snr_db, seed: cfg.derive(Stream::Augment(v)) })
            }
            _ => None,
        };
        let features = extract_features(cfg, &corpus, &manifest, &refs, v.n, augmentation)?;
        let examples = refs
            .iter()
            .zip(features)
            .map(|(r, f)| LabeledExample { range: r.range.map(|x| x as f32), feature: f.into_iter().map(|x| x as f32).collect() })
            .collect();
        let data = DatasetFile { m: cfg.lifter.len(), n: v.n, examples };
        let path = layout.dataset(v, split);
        create_parent(&path)?;
        data.save(&path)?;
        fs::write(layout.dataset_index(v, split), index_text(&manifest, &refs))?;
        written.push((split, data));
    }
    Ok(written)
}

fn load_dataset(layout: &Layout, v: Variant, split: Split) -> Result<DatasetFile> {
    let path = layout.dataset(v, split);
    let d = DatasetFile::load(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if d.n != v.n {
        return Err(Error::Format(format!("{} holds width {} features, variant {} needs {}", path.display(), d.n, v.tag(), v.n)));
    }
    Ok(d)
}

fn as_feature(cfg: &ExperimentConfig, m: usize, n: usize, values: Vec<f64>) -> CepstrogramFeature {
    CepstrogramFeature { values, m, n, lifter: cfg.lifter, quefrency_step: 1.0 / cfg.sample_rate() }
}

/// Trains variant `v` with the two-phase schedule, normalizing features by
/// training-set row statistics, and saves the checkpoint and log.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, v: Variant) -> Result<TrainLog> {
    let layout = Layout::new(out);
    let train_data = load_dataset(&layout, v, Split::Train)?;
    let val_data = load_dataset(&layout, v, Split::Val)?;
    let model_cfg = cfg.model_config(v.n);
    if train_data.m != model_cfg.input_height {
        return Err(Error::Format(format!("dataset height {} does not match the lifter ({})", train_data.m, model_cfg.input_height)));
    }
    let widen = |d: &DatasetFile| -> Vec<CepstrogramFeature> {
        d.examples.iter().map(|e| as_feature(cfg, d.m, d.n, e.feature.iter().map(|&x| f64::from(x)).collect())).collect()
    };
    let train_features = widen(&train_data);
    let norm = fit_normalization(&train_features)?;
    let samples = |d: &DatasetFile, feats: Vec<CepstrogramFeature>| -> Result<Vec<Sample<f32>>> {
        d.examples
            .iter()
            .zip(feats)
            .map(|(e, mut f)| {
                norm.apply_in_place(&mut f.values, f.n)?;
                Ok(Sample {
                    input: f.values.into_iter().map(|x| x as f32).collect(),
                    label: Label { present: e.present(), range: e.range.map(|r| f64::from(r) / cfg.range_scale) },
                })
            })
            .collect()
    };
    let train_set = samples(&train_data, train_features)?;
    let val_set = samples(&val_data, widen(&val_data))?;
    drop((train_data, val_data));
    let (model, log) = train(&train_set, &val_set, model_cfg, &cfg.phases_for(v), cfg.derive(Stream::Init(v)))?;
    let path = layout.model(v);
    create_parent(&path)?;
    Checkpoint { model, norm: Some(norm) }.save(&path)?;
    fs::write(layout.train_log(v), log.to_string())?;
    Ok(log)
}

/// Segments of the first test transit, in time order, for range tracks.
fn track_segments(cfg: &ExperimentConfig, layout: &Layout, manifest: &Manifest) -> Result<(String, Vec<SegmentRef>)> {
    let (i, rec) = manifest
        .of(RecordingKind::Transit, Split::Test)
        .next()
        .ok_or_else(|| Error::Format("corpus has no test transit".into()))?;
    let track = load_track(cfg, &layout.corpus(), rec)?;
    Ok((rec.name.clone(), segments_of(cfg, i, rec, Some(&track))))
}

fn range_track(transit: &str, method: &str, refs: &[SegmentRef], estimates: &[Option<f64>]) -> RangeTrack {
    RangeTrack {
        transit: transit.to_string(),
        method_tag: method.to_string(),
        points: refs
            .iter()
            .zip(estimates)
            .map(|(r, &e)| TrackPoint { time: r.mid_time, true_range: r.range.expect("transit segments carry ranges"), estimate: e })
            .collect(),
    }
}

/// Predicts the test and generalization splits with variant `v`'s
/// checkpoint, and tracks the first test transit.
pub fn cmd_eval(cfg: &ExperimentConfig, out: &Path, v: Variant) -> Result<Vec<PredictionRecord>> {
    let layout = Layout::new(out);
    let path = layout.model(v);
    let ck = Checkpoint::load(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let tag = v.tag();
    let mut all = Vec::new();
    for split in EVAL_SPLITS {
        let data = load_dataset(&layout, v, split)?;
        let wide: Vec<Vec<f64>> = data.examples.iter().map(|e| e.feature.iter().map(|&x| f64::from(x)).collect()).collect();
        let refs: Vec<&[f64]> = wide.iter().map(Vec::as_slice).collect();
        let preds = ck.predict_raw(&refs)?;
        let records: Vec<PredictionRecord> = data
            .examples
            .iter()
            .zip(preds)
            .enumerate()
            .map(|(i, (e, p))| network_record(i as u64, e.range.map(f64::from), p, &tag))
            .collect();
        let path = layout.records(&tag, split);
        create_parent(&path)?;
        save_records(&path, &records)?;
        all.extend(records);
    }
    let manifest = load_manifest(&layout)?;
    let (transit, segs) = track_segments(cfg, &layout, &manifest)?;
    let feats = extract_features(cfg, &layout.corpus(), &manifest, &segs, v.n, None)?;
    let refs: Vec<&[f64]> = feats.iter().map(Vec::as_slice).collect();
    let estimates: Vec<Option<f64>> = ck
        .predict_raw(&refs)?
        .into_iter()
        .map(|p| (p.presence_probability >= DETECTION_THRESHOLD).then_some(p.range_estimate))
        .collect();
    write_track(&layout.track(&tag), &range_track(&transit, &tag, &segs, &estimates))?;
    Ok(all)
}

/// Conventional cepstral-peak ranging on the test and generalization
/// examples (width-1 cepstra of the same segments), plus a median-smoothed
/// track of the first test transit.
pub fn cmd_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PredictionRecord>> {
    let layout = Layout::new(out);
    let corpus = layout.corpus();
    let manifest = load_manifest(&layout)?;
    let g = cfg.geometry();
    let step = 1.0 / cfg.sample_rate();
    let estimate = |c: &[f64]| estimate_range(c, cfg.lifter, step, &g, cfg.baseline_min_prominence);
    let mut all = Vec::new();
    for split in EVAL_SPLITS {
        let refs = select_examples(cfg, &corpus, &manifest, split)?;
        let feats = extract_features(cfg, &corpus, &manifest, &refs, 1, None)?;
        let records: Vec<PredictionRecord> = refs
            .iter()
            .zip(&feats)
            .enumerate()
            .map(|(i, (r, c))| baseline_record(i as u64, r.range, estimate(c), BASELINE_TAG))
            .collect();
        let path = layout.records(BASELINE_TAG, split);
        create_parent(&path)?;
        save_records(&path, &records)?;
        all.extend(records);
    }
    let (transit, segs) = track_segments(cfg, &layout, &manifest)?;
    let feats = extract_features(cfg, &corpus, &manifest, &segs, 1, None)?;
    let raw: Vec<Option<f64>> = feats.iter().map(|c| estimate(c)).collect();
    let smoothed = median_smooth(&raw, cfg.baseline_median_window)?;
    write_track(&layout.track(BASELINE_TAG), &range_track(&transit, BASELINE_TAG, &segs, &smoothed))?;
    Ok(all)
}

/// Far-field segments of every test transit (true range beyond the
/// baseline threshold), numbered in corpus order.
pub fn far_field_segments(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepSegment>> {
    let layout = Layout::new(out);
    let corpus = layout.corpus();
    let manifest = load_manifest(&layout)?;
    let threshold = cfg.far_field_threshold()?;
    let mut segments = Vec::new();
    let mut id = 0u64;
    for (i, rec) in manifest.of(RecordingKind::Transit, Split::Test) {
        let track = load_track(cfg, &corpus, rec)?;
        let audio = crate::series::TimeSeries::load(&corpus.join(rec.audio_file()))?;
        for s in segments_of(cfg, i, rec, Some(&track)) {
            let range = s.range.expect("transit segments carry ranges");
            if range > threshold {
                segments.push(SweepSegment { example_id: id, audio: audio.slice(s.start, cfg.segment_samples())?, true_range: range });
            }
            id += 1;
        }
    }
    Ok(segments)
}

/// Far-field error against test SNR for every trained variant found under
/// `out` and the baseline.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let layout = Layout::new(out);
    let mut checkpoints = Vec::new();
    for v in Variant::ALL {
        let path = layout.model(v);
        if path.exists() {
            checkpoints.push((v.tag(), Checkpoint::load(&path)?));
        }
    }
    let mut methods: Vec<SweepMethod<'_>> =
        checkpoints.iter().map(|(tag, ck)| SweepMethod::Network { tag: tag.clone(), checkpoint: ck }).collect();
    methods.push(SweepMethod::Baseline {
        tag: BASELINE_TAG.into(),
        geometry: cfg.geometry(),
        min_prominence: cfg.baseline_min_prominence,
    });
    let segments = far_field_segments(cfg, out)?;
    let psd = load_psd(&layout.corpus())?;
    let features = FeatureSettings { lifter: cfg.lifter, spectral: cfg.spectral };
    let rows = snr_sweep(
        &methods,
        &segments,
        &psd,
        &features,
        &cfg.sweep_snr_db,
        cfg.far_field_threshold()?,
        cfg.derive(Stream::Sweep),
    )?;
    write_sweep(&layout.sweep(), &rows)?;
    Ok(rows)
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    files.sort();
    Ok(files)
}

/// Renders the comparison report from every record, track and sweep file
/// under `out`. Records are tagged `<method>.<split>` in the report.
pub fn cmd_report(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MethodSummary>> {
    let layout = Layout::new(out);
    let mut records = Vec::new();
    for path in sorted_files(&layout.records_dir())? {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        for mut r in load_records(&path)? {
            r.method_tag = stem.clone();
            records.push(r);
        }
    }
    let mut tracks = Vec::new();
    for path in sorted_files(&layout.tracks_dir())? {
        tracks.push(read_track_file(&path)?);
    }
    let sweep = if layout.sweep().exists() { read_sweep(&layout.sweep())? } else { Vec::new() };
    let input = ReportInput {
        records: &records,
        bin_edges: &cfg.bin_edges,
        far_threshold: cfg.far_field_threshold()?,
        sweep: &sweep,
        tracks: &tracks,
    };
    compare_report(&input, &layout.report())
}

/// Every stage in order: simulate, then featurize, train and evaluate the
/// four variants, then baseline, sweep and report.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MethodSummary>> {
    cmd_simulate(cfg, out)?;
    for v in Variant::ALL {
        cmd_featurize(cfg, out, v)?;
        cmd_train(cfg, out, v)?;
        cmd_eval(cfg, out, v)?;
    }
    cmd_baseline(cfg, out)?;
    cmd_sweep(cfg, out)?;
    cmd_report(cfg, out)
}

const TRACK_HEADER: &str = "transit,method,time,true_range,estimated_range";
const SWEEP_HEADER: &str = "snr_db,method,count,detected,mean_abs_relative_error";

fn write_track(path: &Path, t: &RangeTrack) -> Result<()> {
    create_parent(path)?;
    let mut text = format!("{TRACK_HEADER}\n");
    for p in &t.points {
        let e = p.estimate.map(|e| e.to_string()).unwrap_or_default();
        writeln!(text, "{},{},{},{},{e}", t.transit, t.method_tag, p.time, p.true_range).unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

fn parse_err(path: &Path, line: usize) -> Error {
    Error::Format(format!("{} line {line}: malformed", path.display()))
}

fn read_track_file(path: &Path) -> Result<RangeTrack> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(TRACK_HEADER) {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    let mut track = RangeTrack { transit: String::new(), method_tag: String::new(), points: Vec::new() };
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let err = || parse_err(path, i + 2);
        if f.len() != 5 {
            return Err(err());
        }
        track.transit = f[0].to_string();
        track.method_tag = f[1].to_string();
        track.points.push(TrackPoint {
            time: f[2].parse().map_err(|_| err())?,
            true_range: f[3].parse().map_err(|_| err())?,
            estimate: if f[4].is_empty() { None } else { Some(f[4].parse().map_err(|_| err())?) },
        });
    }
    Ok(track)
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let e = r.far_field.mean_abs_relative_error.map(|e| e.to_string()).unwrap_or_default();
        writeln!(text, "{},{},{},{},{e}", r.snr_db, r.method_tag, r.far_field.count, r.far_field.detected).unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let err = || parse_err(path, i + 2);
            if f.len() != 5 {
                return Err(err());
            }
            Ok(SweepRow {
                snr_db: f[0].parse().map_err(|_| err())?,
                method_tag: f[1].to_string(),
                far_field: ErrorSummary {
                    count: f[2].parse().map_err(|_| err())?,
                    detected: f[3].parse().map_err(|_| err())?,
                    mean_abs_relative_error: if f[4].is_empty() { None } else { Some(f[4].parse().map_err(|_| err())?) },
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::KvConfig;
    use crate::pipeline::tiny_config;

    fn quick(extra: &str) -> ExperimentConfig {
        let mut kv = tiny_config().to_kv();
        for (k, v) in KvConfig::parse(extra).unwrap().iter() {
            kv.set(k, v);
        }
        ExperimentConfig::from_kv(&kv).unwrap()
    }

    #[test]
    fn featurize_writes_balanced_consistent_datasets() {
        let cfg = quick("");
        let d = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, d.path()).unwrap();
        let v = Variant { n: 8, augment: true };
        let sets = cmd_featurize(&cfg, d.path(), v).unwrap();
        for (split, data) in &sets {
            assert_eq!((data.m, data.n), (cfg.lifter.len(), 8));
            let size = cfg.examples.get(*split);
            assert_eq!(data.examples.len(), size);
            assert_eq!(data.present_count(), size - size / 2);
            assert_eq!(&DatasetFile::load(&Layout::new(d.path()).dataset(v, *split)).unwrap(), data);
        }
        // Augmentation touches the training split only.
        let plain = cmd_featurize(&cfg, d.path(), Variant { n: 8, augment: false }).unwrap();
        assert_ne!(plain[0].1, sets[0].1);
        for k in 1..4 {
            assert_eq!(plain[k].1, sets[k].1);
        }
    }

    #[test]
    fn sweep_and_track_files_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let rows = vec![
            SweepRow {
                snr_db: -10.0,
                method_tag: "n8_aug".into(),
                far_field: ErrorSummary { count: 5, detected: 4, mean_abs_relative_error: Some(0.1 + 0.2) },
            },
            SweepRow { snr_db: 0.5, method_tag: "baseline".into(), far_field: ErrorSummary { count: 5, detected: 0, mean_abs_relative_error: None } },
        ];
        let p = d.path().join("s.csv");
        write_sweep(&p, &rows).unwrap();
        assert_eq!(read_sweep(&p).unwrap(), rows);
        let t = RangeTrack {
            transit: "transit_test_00".into(),
            method_tag: "baseline".into(),
            points: vec![TrackPoint { time: 0.5, true_range: 499.9, estimate: None }, TrackPoint { time: 1.0, true_range: 1.0 / 3.0, estimate: Some(2.5) }],
        };
        let p = d.path().join("t.csv");
        write_track(&p, &t).unwrap();
        assert_eq!(read_track_file(&p).unwrap(), t);
    }

    fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for e in fs::read_dir(&dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn experiment_is_byte_reproducible() {
        let cfg = quick("train.max_epochs = 2\ntrain.batch_size = 4");
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let summaries = run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        // Four variants and the baseline, each on two splits.
        assert_eq!(summaries.len(), 10);
        let (ta, tb) = (tree(a.path()), tree(b.path()));
        assert!(ta.iter().any(|(p, _)| p.ends_with("report/summary.txt")));
        assert!(ta.iter().any(|(p, _)| p.ends_with("models/n8_aug.cnnm")));
        assert_eq!(ta.len(), tb.len());
        for ((pa, da), (pb, db)) in ta.iter().zip(&tb) {
            assert_eq!(pa, pb);
            assert!(da == db, "{} differs", pa.display());
        }
    }

    #[test]
    fn commands_fail_cleanly_without_inputs() {
        let cfg = quick("");
        let d = tempfile::tempdir().unwrap();
        let v = Variant { n: 1, augment: false };
        assert!(cmd_featurize(&cfg, d.path(), v).is_err());
        assert!(cmd_train(&cfg, d.path(), v).is_err());
        assert!(cmd_eval(&cfg, d.path(), v).is_err());
        assert!(cmd_baseline(&cfg, d.path()).is_err());
        assert!(cmd_report(&cfg, d.path()).is_err());
    }
}
