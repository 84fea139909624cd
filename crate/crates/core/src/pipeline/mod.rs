//! End-to-end experiment: corpus simulation, featurization, training,
//! evaluation, baseline, SNR sweep and report. Every stage reads and writes
//! files under one output directory so stages can run separately.

mod commands;
mod config;
mod corpus;
mod dataset;

pub use commands::{
    cmd_baseline, cmd_eval, cmd_featurize, cmd_report, cmd_simulate, cmd_sweep, cmd_train, far_field_segments, read_sweep,
    run_experiment, Layout, BASELINE_TAG, EVAL_SPLITS,
};
pub use config::{ExperimentConfig, Split, SplitCounts, Stream, Variant};
pub use corpus::{
    extract_features, index_text, load_psd, load_track, read_track, segments_of, select_examples, simulate_background,
    simulate_corpus, simulate_transit, write_track as write_transit_track, Augmentation, Manifest, Recording, RecordingKind,
    SegmentRef, MANIFEST_FILE, PSD_FILE,
};
pub use dataset::{DatasetFile, LabeledExample, CEPS_MAGIC, CEPS_VERSION};

/// A few seconds of audio at a reduced rate keeps the simulation quick.
#[cfg(test)]
pub(crate) fn tiny_config() -> ExperimentConfig {
    let text = "
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
        examples.train = 8
        examples.val = 4
        examples.test = 4
        examples.generalization = 4
    ";
    ExperimentConfig::from_kv(&crate::config::KvConfig::parse(text).unwrap()).unwrap()
}
