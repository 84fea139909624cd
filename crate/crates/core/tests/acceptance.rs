//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured values, then asserts. Criteria 6, 7 and 9 share one
//! full-scale experiment run, which dominates the runtime.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cepsonar::acoustics::{make_transit_track, propagate, required_source_len, source_signal_samples, ScenarioConfig, SourceKind};
use cepsonar::baseline::{tdoa_to_range, track_ranges, RangingGeometry, DEFAULT_MEDIAN_WINDOW, DEFAULT_MIN_PROMINENCE};
use cepsonar::config::KvConfig;
use cepsonar::dsp::{liftered_cepstrum, LifterWindow, SpectralParams};
use cepsonar::eval::{
    average_precision, baseline_record, load_records, range_error_by_bin, summarize_range, ErrorSummary, PredictionRecord,
    SweepRow,
};
use cepsonar::nn::{gradient_check, Label, ModelConfig, NetworkModel, PARAM_NAMES};
use cepsonar::pipeline::{self, read_sweep, ExperimentConfig, Layout, Split, Variant, BASELINE_TAG};
use cepsonar::series::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(n: u32, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {n}: {} ({})", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), |v| format!("{v:.4}"))
}

#[test]
fn criterion_01_gradient_check() {
    let start = Instant::now();
    let cfg = ModelConfig { conv_filters: 4, hidden_units: 16, ..ModelConfig::new(40, 2) };
    let model = NetworkModel::<f64>::init(cfg, 101).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let inputs: Vec<Vec<f64>> = (0..6).map(|_| (0..cfg.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<Label> = (0..6)
        .map(|i| if i % 2 == 0 { Label { present: true, range: Some(rng.random_range(0.0..1.0)) } } else { Label { present: false, range: None } })
        .collect();
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.99] {
        for (_, err) in gradient_check(&model, &refs, &labels, alpha, 1e-5).unwrap() {
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    report(1, worst < 1e-4 && elapsed < Duration::from_secs(60), format!("worst relative error {worst:.2e}, {:.1}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_02_cepstrum_echo_oracle() {
    const FS: f64 = 250_000.0;
    let start = Instant::now();
    let w = LifterWindow::ranging(FS).unwrap();
    let params = SpectralParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = usize::MAX;
    let len = 250_000;
    for delay_us in [100usize, 400, 800, 1200] {
        let delay = delay_us * 250 / 1000;
        let mut hits = 0;
        for _ in 0..100 {
            let s: Vec<f64> = (0..len + delay).map(|_| StandardNormal.sample(&mut rng)).collect();
            let echo: Vec<f64> = (0..len).map(|t| s[t + delay] + 0.5 * s[t]).collect();
            let power = echo.iter().map(|v| v * v).sum::<f64>() / len as f64;
            let noise_sd = (power / 100.0).sqrt();
            let x: Vec<f64> = echo.iter().map(|v| v + noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let band = liftered_cepstrum(&TimeSeries::new(x, FS).unwrap(), w, &params).unwrap();
            let (i, _) = band.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            if (i + w.low_index).abs_diff(delay) <= 1 {
                hits += 1;
            }
        }
        worst = worst.min(hits);
    }
    let elapsed = start.elapsed();
    report(
        2,
        worst >= 95 && elapsed < Duration::from_secs(120),
        format!("fewest hits {worst}/100 over 4 delays, {:.1}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_03_lifter_bounds() {
    let fs = 250_000.0;
    let w = LifterWindow::ranging(fs).unwrap();
    let step = 1.0 / fs;
    let low = w.low_index as f64 * step;
    let high = w.high_index as f64 * step;
    let pass = (w.low_index, w.high_index, w.len()) == (21, 350, 330) && low == 84e-6 && high == 1.4e-3;
    report(3, pass, format!("indices {}..={}, height {}, {low:e} s .. {high:e} s", w.low_index, w.high_index, w.len()));
}

#[test]
fn criterion_04_geometry_round_trip() {
    let g = RangingGeometry::from_environment(&ScenarioConfig::default().environment, 1.0);
    // Image-source path difference for source 1 m and receiver 29 m deep.
    let forward = |r: f64| ((r * r + 30.0f64.powi(2)).sqrt() - (r * r + 28.0f64.powi(2)).sqrt()) / 1500.0;
    let worst = [0.0, 10.0, 50.0, 100.0, 200.0, 500.0]
        .iter()
        .map(|&r| (tdoa_to_range(forward(r), &g).unwrap() - r).abs())
        .fold(0.0, f64::max);
    report(4, worst < 0.1, format!("worst inversion error {worst:.4} m"));
}

#[test]
fn criterion_05_baseline_transit() {
    let cfg = ScenarioConfig::default();
    let track = make_transit_track(&cfg).unwrap();
    let need = required_source_len(&track, &cfg.environment, cfg.source_depth, cfg.max_reflection_order, cfg.sample_rate).unwrap();
    let src = source_signal_samples(SourceKind::A, need, cfg.sample_rate, 7).unwrap();
    let rec = propagate(&track, &src, &cfg.environment, cfg.source_depth, cfg.max_reflection_order).unwrap();
    drop(src);
    let fs = cfg.sample_rate;
    let w = LifterWindow::ranging(fs).unwrap();
    let g = RangingGeometry::from_environment(&cfg.environment, cfg.source_depth);
    let (seg, hop) = (fs as usize, fs as usize / 2);
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    let mut s = 0;
    while s + seg <= rec.len() {
        frames.push(liftered_cepstrum(&rec.slice(s, seg).unwrap(), w, &SpectralParams::default()).unwrap());
        truth.push(track.horizontal_ranges[track.index_at((s + seg / 2) as f64 / fs)]);
        s += hop;
    }
    let est = track_ranges(&frames, w, 1.0 / fs, &g, DEFAULT_MIN_PROMINENCE, DEFAULT_MEDIAN_WINDOW).unwrap();
    let records: Vec<PredictionRecord> =
        truth.iter().zip(&est).enumerate().map(|(i, (&t, &e))| baseline_record(i as u64, Some(t), e, BASELINE_TAG)).collect();
    let threshold = g.threshold_range(w.low_index as f64 / fs).unwrap();
    let near = summarize_range(&records, 0.0, threshold);
    let far = summarize_range(&records, threshold, f64::INFINITY);
    let near_ok = near.mean_abs_relative_error.is_some_and(|e| e < 0.05);
    let far_ok = far.count > 0 && far.detection_fraction().is_some_and(|d| d < 0.10);
    report(
        5,
        near_ok && far_ok,
        format!(
            "threshold {threshold:.1} m; near error {} over {}/{} detected; far detection fraction {}",
            opt(near.mean_abs_relative_error),
            near.detected,
            near.count,
            opt(far.detection_fraction())
        ),
    );
}

#[test]
fn criterion_08_absent_batch_masks_regression() {
    let cfg = ModelConfig { conv_filters: 4, hidden_units: 16, ..ModelConfig::new(40, 2) };
    let model = NetworkModel::<f64>::init(cfg, 801).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(802);
    let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..cfg.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let head_nonzero = |labels: &[Label], alpha: f64| {
        let (_, grads) = model.batch_loss_and_grads(&refs, labels, alpha, Some(803)).unwrap();
        grads
            .iter()
            .zip(PARAM_NAMES)
            .filter(|(_, name)| name.starts_with("range_"))
            .flat_map(|(g, _)| &g.values)
            .filter(|v| v.to_bits() != 0)
            .count()
    };
    let absent = vec![Label { present: false, range: None }; 8];
    let present = vec![Label { present: true, range: Some(250.0) }; 8];
    let leaked: usize = [0.0, 0.5, 0.99].iter().map(|&a| head_nonzero(&absent, a)).sum();
    // Guards against a selector that matches nothing.
    let live = head_nonzero(&present, 0.5);
    report(
        8,
        leaked == 0 && live > 0,
        format!("{leaked} non-zero regression-head gradient entries on absent batches; {live} on a present batch"),
    );
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
fn criterion_10_end_to_end_determinism() {
    let text = "
        seed = 1010
        scenario.sample_rate = 50000
        scenario.start_range = 60
        scenario.end_range = 60
        scenario.speed = 20
        spectral.window_length = 1024
        lifter.low_index = 5
        lifter.high_index = 70
        augment.psd_window = 1024
        transits.train = 1
        transits.val = 1
        transits.test = 1
        transits.generalization = 1
        examples.train = 16
        examples.val = 6
        examples.test = 6
        examples.generalization = 6
        train.batch_size = 4
        train.max_epochs = 2
    ";
    let cfg = ExperimentConfig::from_kv(&KvConfig::parse(text).unwrap()).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline::run_experiment(&cfg, a.path()).unwrap();
    pipeline::run_experiment(&cfg, b.path()).unwrap();
    let (ra, rb) = (tree(&a.path().join("report")), tree(&b.path().join("report")));
    let identical = !ra.is_empty() && ra == rb;
    let bytes: usize = ra.iter().map(|(_, d)| d.len()).sum();
    report(10, identical, format!("{} report files, {bytes} bytes, identical: {identical}", ra.len()));
}

/// Outputs of one full-scale experiment at the default configuration.
struct FullRun {
    layout: Layout,
    far_threshold: f64,
    bin_edges: Vec<f64>,
    /// Simulation, then featurization and training of the n=8 augmented variant.
    headline_time: Duration,
    sweep: Vec<SweepRow>,
}

impl FullRun {
    fn records(&self, method: &str, split: Split) -> Vec<PredictionRecord> {
        load_records(&self.layout.records(method, split)).unwrap()
    }

    fn sweep_at(&self, tag: &str, snr: f64) -> ErrorSummary {
        self.sweep.iter().find(|r| r.method_tag == tag && r.snr_db == snr).unwrap().far_field.clone()
    }
}

fn full_run() -> &'static FullRun {
    static RUN: OnceLock<FullRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-full");
        if out.exists() {
            fs::remove_dir_all(&out).unwrap();
        }
        let cfg = ExperimentConfig::default();
        let headline = Variant { n: 8, augment: true };
        let start = Instant::now();
        pipeline::cmd_simulate(&cfg, &out).unwrap();
        pipeline::cmd_featurize(&cfg, &out, headline).unwrap();
        pipeline::cmd_train(&cfg, &out, headline).unwrap();
        let headline_time = start.elapsed();
        pipeline::cmd_eval(&cfg, &out, headline).unwrap();
        for v in Variant::ALL.into_iter().filter(|&v| v != headline) {
            pipeline::cmd_featurize(&cfg, &out, v).unwrap();
            pipeline::cmd_train(&cfg, &out, v).unwrap();
            pipeline::cmd_eval(&cfg, &out, v).unwrap();
        }
        pipeline::cmd_baseline(&cfg, &out).unwrap();
        pipeline::cmd_sweep(&cfg, &out).unwrap();
        pipeline::cmd_report(&cfg, &out).unwrap();
        let layout = Layout::new(&out);
        let sweep = read_sweep(&layout.sweep()).unwrap();
        FullRun { far_threshold: cfg.far_field_threshold().unwrap(), bin_edges: cfg.bin_edges.clone(), layout, headline_time, sweep }
    })
}

/// Pooled CNN error over the range bins past the far-field threshold
/// (by bin midpoint) where the baseline detects under 10% of examples.
fn far_bins_error(run: &FullRun, cnn: &[PredictionRecord], baseline: &[PredictionRecord]) -> (Vec<(f64, f64)>, ErrorSummary) {
    let table = range_error_by_bin(baseline, &run.bin_edges).unwrap();
    let bins: Vec<(f64, f64)> = (0..table.counts.len())
        .filter(|&i| 0.5 * (run.bin_edges[i] + run.bin_edges[i + 1]) > run.far_threshold)
        .filter(|&i| table.detection_fraction[i].is_some_and(|d| d < 0.10))
        .map(|i| (run.bin_edges[i], run.bin_edges[i + 1]))
        .collect();
    let last = *run.bin_edges.last().unwrap();
    let selected: Vec<PredictionRecord> = cnn
        .iter()
        .filter(|r| r.true_range.is_some_and(|t| bins.iter().any(|&(lo, hi)| t >= lo && (t < hi || (hi == last && t <= hi)))))
        .cloned()
        .collect();
    (bins, summarize_range(&selected, f64::NEG_INFINITY, f64::INFINITY))
}

#[test]
fn criterion_06_desk_scale_cnn() {
    let run = full_run();
    let tag = Variant { n: 8, augment: true }.tag();
    let test = run.records(&tag, Split::Test);
    let ap = average_precision(&test).unwrap();
    let (bins, far) = far_bins_error(run, &test, &run.records(BASELINE_TAG, Split::Test));
    let far_ok = !bins.is_empty() && far.mean_abs_relative_error.is_some_and(|e| e <= 0.20);
    let minutes = run.headline_time.as_secs_f64() / 60.0;
    report(
        6,
        ap >= 0.95 && far_ok && minutes < 30.0,
        format!(
            "AP {ap:.4}; far bins {bins:?}: error {} over {}/{} detected; simulate+featurize+train {minutes:.1} min",
            opt(far.mean_abs_relative_error),
            far.detected,
            far.count
        ),
    );
}

#[test]
fn criterion_07_augmentation_benefit() {
    let run = full_run();
    let err = |n: usize, augment: bool, snr: f64| run.sweep_at(&Variant { n, augment }.tag(), snr).mean_abs_relative_error;
    let (n8_aug, n8_plain) = (err(8, true, 0.0), err(8, false, 0.0));
    let n8_ok = matches!((n8_aug, n8_plain), (Some(a), Some(p)) if a <= p) || (n8_aug.is_some() && n8_plain.is_none());
    let snrs = [-10.0, 0.0, 10.0, 20.0];
    let n1_wins = snrs
        .iter()
        .filter(|&&s| match (err(1, true, s), err(1, false, s)) {
            (Some(a), Some(p)) => a <= p,
            (Some(_), None) => true,
            _ => false,
        })
        .count();
    let detail = format!(
        "n8 at 0 dB: aug {} vs no-aug {}; n1 aug no worse at {n1_wins}/4 SNRs ({})",
        opt(n8_aug),
        opt(n8_plain),
        snrs.iter().map(|&s| format!("{s} dB: {} vs {}", opt(err(1, true, s)), opt(err(1, false, s)))).collect::<Vec<_>>().join(", ")
    );
    report(7, n8_ok && n1_wins >= 3, detail);
}

#[test]
fn criterion_09_generalization() {
    let run = full_run();
    let tag = Variant { n: 8, augment: true }.tag();
    let gen = run.records(&tag, Split::Generalization);
    let test = run.records(&tag, Split::Test);
    let ap = average_precision(&gen).unwrap();
    let gen_far = summarize_range(&gen, run.far_threshold, f64::INFINITY);
    let test_far = summarize_range(&test, run.far_threshold, f64::INFINITY);
    let ratio_ok = match (gen_far.mean_abs_relative_error, test_far.mean_abs_relative_error) {
        (Some(g), Some(t)) => g <= 1.5 * t,
        _ => false,
    };
    report(
        9,
        ap >= 0.90 && ratio_ok,
        format!(
            "kind-B AP {ap:.4}; far error kind-B {} ({}/{}) vs kind-A {} ({}/{})",
            opt(gen_far.mean_abs_relative_error),
            gen_far.detected,
            gen_far.count,
            opt(test_far.mean_abs_relative_error),
            test_far.detected,
            test_far.count
        ),
    );
}
