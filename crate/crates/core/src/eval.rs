use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::augment::{augment_snr, stream_seed, PsdModel};
use crate::baseline::{estimate_range, RangingGeometry};
use crate::dsp::{cepstrogram, liftered_cepstrum, LifterWindow, SpectralParams};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::series::TimeSeries;

/// Presence probability at or above which a network output counts as a
/// detection and its range estimate is reported.
pub const DETECTION_THRESHOLD: f64 = 0.5;

/// True ranges below this many meters are left out of relative errors.
pub const MIN_RELATIVE_RANGE: f64 = 1.0;

pub const RECORD_HEADER: &str = "example_id,true_presence,true_range,score,predicted_range,method_tag";

/// One method's output for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub example_id: u64,
    pub true_presence: bool,
    /// Meters; `None` when no vessel is present.
    pub true_range: Option<f64>,
    /// Presence probability in [0, 1].
    pub score: f64,
    /// Meters; `None` means no detection.
    pub predicted_range: Option<f64>,
    pub method_tag: String,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidArgument(format!("example {}: score {} outside [0, 1]", self.example_id, self.score)));
        }
        if self.true_presence != self.true_range.is_some() {
            return Err(Error::InvalidArgument(format!(
                "example {}: true range must be given exactly when a vessel is present",
                self.example_id
            )));
        }
        if self.true_range.is_some_and(|r| !(r.is_finite() && r >= 0.0))
            || self.predicted_range.is_some_and(|r| !r.is_finite())
        {
            return Err(Error::NonFinite(format!("range of example {}", self.example_id)));
        }
        validate_tag(&self.method_tag)
    }

    /// `|predicted - true| / true`, when both exist and the true range
    /// clears [`MIN_RELATIVE_RANGE`].
    pub fn relative_error(&self) -> Option<f64> {
        let t = self.true_range.filter(|&t| t >= MIN_RELATIVE_RANGE)?;
        self.predicted_range.map(|p| (p - t).abs() / t)
    }
}

fn validate_tag(tag: &str) -> Result<()> {
    if tag.is_empty() || tag.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!("method tag {tag:?} must be non-empty without commas, quotes or newlines")));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records as CSV under [`RECORD_HEADER`]. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_records<W: Write>(records: &[PredictionRecord], mut w: W) -> Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        r.validate()?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.example_id,
            u8::from(r.true_presence),
            opt(r.true_range),
            r.score,
            opt(r.predicted_range),
            r.method_tag
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(RECORD_HEADER) {
        return Err(Error::Format(format!("record file must start with {RECORD_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("record line {}: bad {what}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("field count"));
        }
        let num = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        let rec = PredictionRecord {
            example_id: f[0].parse().map_err(|_| bad("example_id"))?,
            true_presence: match f[1] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("true_presence")),
            },
            true_range: num(f[2], "true_range")?,
            score: num(f[3], "score")?.ok_or_else(|| bad("score"))?,
            predicted_range: num(f[4], "predicted_range")?,
            method_tag: f[5].to_string(),
        };
        rec.validate().map_err(|e| Error::Format(format!("record line {}: {e}", i + 2)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn save_records(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    write_records(records, BufWriter::new(File::create(path)?))
}

pub fn load_records(path: &Path) -> Result<Vec<PredictionRecord>> {
    read_records(BufReader::new(File::open(path)?))
}

fn ap_of_ranking(labels: impl Iterator<Item = bool>) -> f64 {
    let (mut hits, mut sum) = (0usize, 0.0);
    for (rank, positive) in labels.enumerate() {
        if positive {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / hits as f64
}

fn check_classes(labels: &[bool]) -> Result<()> {
    if !labels.iter().any(|&l| l) {
        return Err(Error::SingleClass("no positive examples"));
    }
    if !labels.iter().any(|&l| !l) {
        return Err(Error::SingleClass("no negative examples"));
    }
    Ok(())
}

/// Mean precision at the ranks of the positives, ranking by descending
/// score with ties kept in input order.
pub fn average_precision_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch("scores and labels differ in length".into()));
    }
    check_classes(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(ap_of_ranking(order.into_iter().map(|i| labels[i])))
}

/// Average precision over records, ranked by descending score with ties
/// broken by ascending `example_id`.
pub fn average_precision(records: &[PredictionRecord]) -> Result<f64> {
    for r in records {
        r.validate()?;
    }
    check_classes(&records.iter().map(|r| r.true_presence).collect::<Vec<_>>())?;
    let mut order: Vec<&PredictionRecord> = records.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.example_id.cmp(&b.example_id)));
    Ok(ap_of_ranking(order.into_iter().map(|r| r.true_presence)))
}

/// Count, detections and mean relative error of a set of ranged records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub count: usize,
    pub detected: usize,
    /// Mean over detected records; `None` when nothing was detected.
    pub mean_abs_relative_error: Option<f64>,
}

impl ErrorSummary {
    pub fn detection_fraction(&self) -> Option<f64> {
        (self.count > 0).then(|| self.detected as f64 / self.count as f64)
    }
}

/// Order-independent summary: errors are sorted before summation so any
/// permutation of the input yields the same bits.
fn summarize<'a>(records: impl Iterator<Item = &'a PredictionRecord>) -> ErrorSummary {
    let (mut count, mut detected, mut errors) = (0, 0, Vec::new());
    for r in records {
        count += 1;
        if r.predicted_range.is_some() {
            detected += 1;
        }
        errors.extend(r.relative_error());
    }
    errors.sort_by(f64::total_cmp);
    let mean = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    ErrorSummary { count, detected, mean_abs_relative_error: mean }
}

/// Summary over present examples whose true range lies in `[low, high)`.
pub fn summarize_range(records: &[PredictionRecord], low: f64, high: f64) -> ErrorSummary {
    summarize(records.iter().filter(|r| r.true_range.is_some_and(|t| t >= low && t < high)))
}

/// Per-bin range error and detection fraction against true range.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeBinTable {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub detected: Vec<usize>,
    /// `None` for bins with no detected record.
    pub mean_abs_relative_error: Vec<Option<f64>>,
    /// `None` for empty bins.
    pub detection_fraction: Vec<Option<f64>>,
}

/// Bins are `[edge_i, edge_{i+1})` except the last, which also takes its
/// upper edge. Records outside every bin are skipped.
pub fn range_error_by_bin(records: &[PredictionRecord], bin_edges: &[f64]) -> Result<RangeBinTable> {
    if bin_edges.len() < 2 || bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("bin edges must be finite, strictly increasing, at least two".into()));
    }
    for r in records {
        r.validate()?;
    }
    if !records.iter().any(|r| r.true_range.is_some()) {
        return Err(Error::EmptyInput("no record carries a true range".into()));
    }
    let bins = bin_edges.len() - 1;
    let last = bin_edges[bins];
    let mut table = RangeBinTable {
        bin_edges: bin_edges.to_vec(),
        counts: Vec::with_capacity(bins),
        detected: Vec::with_capacity(bins),
        mean_abs_relative_error: Vec::with_capacity(bins),
        detection_fraction: Vec::with_capacity(bins),
    };
    for b in 0..bins {
        let (lo, hi) = (bin_edges[b], bin_edges[b + 1]);
        let s = summarize(records.iter().filter(|r| r.true_range.is_some_and(|t| t >= lo && (t < hi || (b + 1 == bins && t == last)))));
        table.counts.push(s.count);
        table.detected.push(s.detected);
        table.mean_abs_relative_error.push(s.mean_abs_relative_error);
        table.detection_fraction.push(s.detection_fraction());
    }
    Ok(table)
}

/// A clean recorded segment with its true range, re-noised by the sweep.
#[derive(Debug, Clone)]
pub struct SweepSegment {
    pub example_id: u64,
    pub audio: TimeSeries,
    pub true_range: f64,
}

/// A ranging method evaluated by the sweep.
#[derive(Debug, Clone)]
pub enum SweepMethod<'a> {
    Network { tag: String, checkpoint: &'a Checkpoint },
    Baseline { tag: String, geometry: RangingGeometry, min_prominence: f64 },
}

impl SweepMethod<'_> {
    pub fn tag(&self) -> &str {
        match self {
            SweepMethod::Network { tag, .. } | SweepMethod::Baseline { tag, .. } => tag,
        }
    }
}

/// Featurization shared by every method in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSettings {
    pub lifter: LifterWindow,
    pub spectral: SpectralParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub method_tag: String,
    pub far_field: ErrorSummary,
}

/// Far-field records for one method on already-noised segments.
pub fn method_records(
    method: &SweepMethod<'_>,
    segments: &[(u64, &TimeSeries, f64)],
    features: &FeatureSettings,
) -> Result<Vec<PredictionRecord>> {
    let step = 1.0 / segments.first().map_or(1.0, |s| s.1.sample_rate);
    let mut out = Vec::with_capacity(segments.len());
    match method {
        SweepMethod::Network { tag, checkpoint } => {
            let n = checkpoint.model.config.input_width;
            let feats = segments
                .iter()
                .map(|s| cepstrogram(s.1, n, features.lifter, &features.spectral))
                .collect::<Result<Vec<_>>>()?;
            let raw: Vec<&[f64]> = feats.iter().map(|f| f.values.as_slice()).collect();
            for (s, p) in segments.iter().zip(checkpoint.predict_raw(&raw)?) {
                out.push(network_record(s.0, Some(s.2), p, tag));
            }
        }
        SweepMethod::Baseline { tag, geometry, min_prominence } => {
            for s in segments {
                let c = liftered_cepstrum(s.1, features.lifter, &features.spectral)?;
                let est = estimate_range(&c, features.lifter, step, geometry, *min_prominence);
                out.push(baseline_record(s.0, Some(s.2), est, tag));
            }
        }
    }
    Ok(out)
}

/// Record for a network output; a score below [`DETECTION_THRESHOLD`]
/// withholds the range.
pub fn network_record(example_id: u64, true_range: Option<f64>, p: crate::nn::Prediction, tag: &str) -> PredictionRecord {
    PredictionRecord {
        example_id,
        true_presence: true_range.is_some(),
        true_range,
        score: p.presence_probability,
        predicted_range: (p.presence_probability >= DETECTION_THRESHOLD).then_some(p.range_estimate),
        method_tag: tag.to_string(),
    }
}

/// Record for a baseline output; the baseline's score is 1 when it ranges.
pub fn baseline_record(example_id: u64, true_range: Option<f64>, estimate: Option<f64>, tag: &str) -> PredictionRecord {
    PredictionRecord {
        example_id,
        true_presence: true_range.is_some(),
        true_range,
        score: if estimate.is_some() { 1.0 } else { 0.0 },
        predicted_range: estimate,
        method_tag: tag.to_string(),
    }
}

/// Re-noises the far-field segments (true range beyond `far_threshold`)
/// at each SNR and evaluates every method. Each segment keeps the same
/// noise seed across SNRs so rows differ only in level.
pub fn snr_sweep(
    methods: &[SweepMethod<'_>],
    segments: &[SweepSegment],
    psd: &PsdModel,
    features: &FeatureSettings,
    snr_list_db: &[f64],
    far_threshold: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if snr_list_db.is_empty() {
        return Err(Error::EmptyInput("SNR list".into()));
    }
    if methods.is_empty() {
        return Err(Error::EmptyInput("sweep methods".into()));
    }
    let far: Vec<&SweepSegment> = segments.iter().filter(|s| s.true_range > far_threshold).collect();
    let mut rows = Vec::with_capacity(snr_list_db.len() * methods.len());
    for &snr in snr_list_db {
        let noisy = far
            .iter()
            .map(|s| augment_snr(&s.audio, psd, [snr, snr], stream_seed(seed, s.example_id)).map(|(a, _)| a))
            .collect::<Result<Vec<_>>>()?;
        let view: Vec<(u64, &TimeSeries, f64)> = far.iter().zip(&noisy).map(|(s, a)| (s.example_id, a, s.true_range)).collect();
        for m in methods {
            let recs = method_records(m, &view, features)?;
            rows.push(SweepRow { snr_db: snr, method_tag: m.tag().to_string(), far_field: summarize(recs.iter()) });
        }
    }
    Ok(rows)
}

/// One point of a range-versus-time track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub time: f64,
    pub true_range: f64,
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeTrack {
    pub transit: String,
    pub method_tag: String,
    pub points: Vec<TrackPoint>,
}

/// Everything a comparison report is rendered from.
#[derive(Debug, Clone, Copy)]
pub struct ReportInput<'a> {
    pub records: &'a [PredictionRecord],
    pub bin_edges: &'a [f64],
    pub far_threshold: f64,
    pub sweep: &'a [SweepRow],
    pub tracks: &'a [RangeTrack],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method_tag: String,
    pub examples: usize,
    /// `None` when the method's records hold a single class.
    pub average_precision: Option<f64>,
    pub near_field: ErrorSummary,
    pub far_field: ErrorSummary,
}

pub const AP_FILE: &str = "ap_table.csv";
pub const BINS_FILE: &str = "error_by_bin.csv";
pub const SWEEP_FILE: &str = "snr_sweep.csv";
pub const TRACKS_FILE: &str = "range_tracks.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Per-method summaries, sorted by method tag.
pub fn method_summaries(records: &[PredictionRecord], far_threshold: f64) -> Result<Vec<MethodSummary>> {
    let mut by_tag: BTreeMap<&str, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        by_tag.entry(&r.method_tag).or_default().push(r.clone());
    }
    by_tag
        .into_iter()
        .map(|(tag, recs)| {
            let ap = match average_precision(&recs) {
                Ok(v) => Some(v),
                Err(Error::SingleClass(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(MethodSummary {
                method_tag: tag.to_string(),
                examples: recs.len(),
                average_precision: ap,
                near_field: summarize_range(&recs, 0.0, far_threshold),
                far_field: summarize_range(&recs, far_threshold, f64::INFINITY),
            })
        })
        .collect()
}

/// Writes the AP table, error-by-bin table, SNR sweep, range tracks and a
/// `key = value` summary into `out_dir`. Output depends only on the input.
pub fn compare_report(input: &ReportInput<'_>, out_dir: &Path) -> Result<Vec<MethodSummary>> {
    if input.records.is_empty() {
        return Err(Error::EmptyInput("no prediction records to report".into()));
    }
    let summaries = method_summaries(input.records, input.far_threshold)?;
    fs::create_dir_all(out_dir)?;

    let mut ap = String::from("method,examples,positives,average_precision\n");
    for s in &summaries {
        let positives = input.records.iter().filter(|r| r.method_tag == s.method_tag && r.true_presence).count();
        writeln!(ap, "{},{},{},{}", s.method_tag, s.examples, positives, fmt_opt(s.average_precision)).unwrap();
    }
    fs::write(out_dir.join(AP_FILE), ap)?;

    let mut bins = String::from("method,bin_low,bin_high,count,detected,detection_fraction,mean_abs_relative_error\n");
    for s in &summaries {
        let recs: Vec<PredictionRecord> = input.records.iter().filter(|r| r.method_tag == s.method_tag).cloned().collect();
        if !recs.iter().any(|r| r.true_range.is_some()) {
            continue;
        }
        let t = range_error_by_bin(&recs, input.bin_edges)?;
        for b in 0..t.counts.len() {
            writeln!(
                bins,
                "{},{},{},{},{},{},{}",
                s.method_tag,
                t.bin_edges[b],
                t.bin_edges[b + 1],
                t.counts[b],
                t.detected[b],
                fmt_opt(t.detection_fraction[b]),
                fmt_opt(t.mean_abs_relative_error[b])
            )
            .unwrap();
        }
    }
    fs::write(out_dir.join(BINS_FILE), bins)?;

    let mut sweep = String::from("snr_db,method,count,detected,far_field_mean_abs_relative_error\n");
    for r in input.sweep {
        writeln!(
            sweep,
            "{},{},{},{},{}",
            r.snr_db,
            r.method_tag,
            r.far_field.count,
            r.far_field.detected,
            fmt_opt(r.far_field.mean_abs_relative_error)
        )
        .unwrap();
    }
    fs::write(out_dir.join(SWEEP_FILE), sweep)?;

    let mut tracks = String::from("transit,method,time,true_range,estimated_range\n");
    for t in input.tracks {
        for p in &t.points {
            writeln!(tracks, "{},{},{:.3},{:.3},{}", t.transit, t.method_tag, p.time, p.true_range, p.estimate.map(|e| format!("{e:.3}")).unwrap_or_default())
                .unwrap();
        }
    }
    fs::write(out_dir.join(TRACKS_FILE), tracks)?;

    let mut summary = String::new();
    writeln!(summary, "# mean absolute relative error over detected examples; far field starts at the threshold range").unwrap();
    writeln!(summary, "far_field_threshold_m = {:.3}", input.far_threshold).unwrap();
    for s in &summaries {
        let tag = &s.method_tag;
        writeln!(summary, "{tag}.examples = {}", s.examples).unwrap();
        writeln!(summary, "{tag}.average_precision = {}", fmt_opt(s.average_precision)).unwrap();
        for (name, e) in [("near", s.near_field), ("far", s.far_field)] {
            writeln!(summary, "{tag}.{name}.count = {}", e.count).unwrap();
            writeln!(summary, "{tag}.{name}.detection_fraction = {}", fmt_opt(e.detection_fraction())).unwrap();
            writeln!(summary, "{tag}.{name}.mean_abs_relative_error = {}", fmt_opt(e.mean_abs_relative_error)).unwrap();
        }
    }
    fs::write(out_dir.join(SUMMARY_FILE), summary)?;
    Ok(summaries)
}
